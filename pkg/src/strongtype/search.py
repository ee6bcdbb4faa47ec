"""Seeded multi-start search for ratio maximization.

Candidates are generated in fixed-size chunks, each chunk drawing from its own
generator ``default_rng([seed, tag, chunk])``. The chunk layout never depends
on the worker count, so a run with 1 worker and a run with 8 workers evaluate
exactly the same candidates and reduce them in the same order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

CHUNK = 256
NUM_FLOOR = 1e-12
DEN_FLOOR = 1e-12
DEGENERATE_NUM = 1e-6

# (batch of configurations) -> (numerators, denominators)
RatioFn = Callable[[np.ndarray], "tuple[np.ndarray, np.ndarray]"]
# configuration -> path of configurations with shrinking denominator
ProbeFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ConstantEstimate:
    """Best ratio found for one of the inequality constants, with its witness.

    ``lower_bound`` is always finite. Configurations whose denominator vanishes
    while the numerator does not are reported through ``unbounded_flag`` and
    ``unbounded_witness`` instead of an infinite bound.
    """

    kind: str
    exponent: float | None
    lower_bound: float
    witness: dict
    unbounded_flag: bool = False
    unbounded_witness: dict | None = None
    unbounded_ratio: float | None = None
    seed: int | None = None
    evaluations: int = 0
    depth: int | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "exponent": self.exponent,
            "lower_bound": self.lower_bound,
            "witness": self.witness,
            "unbounded_flag": self.unbounded_flag,
            "unbounded_witness": self.unbounded_witness,
            "unbounded_ratio": self.unbounded_ratio,
            "seed": self.seed,
            "evaluations": self.evaluations,
            "depth": self.depth,
        }


@dataclass
class SearchResult:
    ratio: float
    z: np.ndarray
    index: int
    evaluations: int = 0
    unbounded: bool = False
    unbounded_z: np.ndarray | None = None
    unbounded_ratio: float | None = None
    notes: list = field(default_factory=list)


def ratios(num: np.ndarray, den: np.ndarray, scale: np.ndarray, ok: np.ndarray | None = None,
           deg_floor: float = DEGENERATE_NUM) -> tuple[np.ndarray, np.ndarray]:
    """Finite ratios and a (not yet confirmed) degeneracy mask.

    Numerator and denominator are homogeneous of degree one in the
    configuration, so both are divided by the configuration size before the
    floors apply. ``ok`` marks configurations whose brackets are large enough
    to be free of cancellation; the others get ratio 0.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    s = np.where(scale > 0, scale, 1.0)
    nn = num / s
    dn = den / s
    degenerate = (dn < DEN_FLOOR) & (nn > deg_floor)
    valid = (dn >= DEN_FLOOR) & (nn > NUM_FLOOR)
    if ok is not None:
        valid &= np.asarray(ok, dtype=bool)
    r = np.zeros_like(nn)
    np.divide(num, den, out=r, where=valid)
    r[~np.isfinite(r)] = 0.0
    return r, degenerate


def _scale(Z: np.ndarray) -> np.ndarray:
    return np.max(np.abs(Z), axis=-1)


def _unpack(out) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    if len(out) == 3:
        return out
    return out[0], out[1], None


def confirm_degenerate(fn: RatioFn, Z: np.ndarray, deg_floor: float = DEGENERATE_NUM) -> np.ndarray:
    """Re-evaluate suspected degenerate rows in extended precision.

    A vanishing bracket in double precision can be pure cancellation (e.g. a
    true value of 1e-17 next to terms of size 1). Only rows whose denominator
    still vanishes in ``longdouble`` are kept.
    """
    if Z.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    Zl = Z.astype(np.longdouble)
    num, den, _ = _unpack(fn(Zl))
    s = np.max(np.abs(Zl), axis=-1)
    s = np.where(s > 0, s, 1)
    return np.asarray((den / s < DEN_FLOOR) & (num / s > deg_floor), dtype=bool)


class _Evaluator:
    def __init__(self, fn: RatioFn, deg_floor: float = DEGENERATE_NUM):
        self.fn = fn
        self.deg_floor = deg_floor
        self.count = 0

    def __call__(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Z = np.atleast_2d(Z)
        num, den, ok = _unpack(self.fn(Z))
        self.count += Z.shape[0]
        r, deg = ratios(num, den, _scale(Z), ok, self.deg_floor)
        if np.any(deg):
            idx = np.flatnonzero(deg)
            deg[idx] = confirm_degenerate(self.fn, Z[idx], self.deg_floor)
        return r, deg


def sample_chunk(seed: int, tag: int, chunk: int, size: int, dim: int,
                 blocks: Sequence[slice] | None = None) -> np.ndarray:
    """Uniform candidates in [-1, 1]^dim; half of them get random block scales."""
    rng = np.random.default_rng([seed, tag, chunk])
    Z = rng.uniform(-1.0, 1.0, size=(size, dim))
    if blocks:
        scales = 2.0 ** rng.uniform(-8.0, 0.0, size=(size, len(blocks)))
        mixed = rng.random(size) < 0.5
        for b, sl in enumerate(blocks):
            Z[mixed, sl] *= scales[mixed, b, None]
    return Z


def polish(evaluate: _Evaluator, z0: np.ndarray, r0: float, *, rel_tol: float = 1e-10,
           min_step: float = 1e-10, max_sweeps: int = 4000, minimize: bool = False):
    """Coordinate-wise perturbation with a shrinking step.

    Each sweep evaluates the 2*dim moves ``z +- step * e_i`` and takes the best
    one if it improves the objective by more than ``rel_tol`` relative; otherwise
    the step is halved. Stops once the step drops below ``min_step`` (relative
    to the configuration size).
    """
    z = np.array(z0, dtype=float)
    D = z.size
    size = max(np.max(np.abs(z)), 1e-300)
    step = 0.25 * size
    best = r0
    degenerate_z = None
    E = np.vstack([np.eye(D), -np.eye(D)])
    sweeps = 0
    while step > min_step * size and sweeps < max_sweeps:
        sweeps += 1
        P = z + step * E
        r, deg = evaluate(P)
        if degenerate_z is None and np.any(deg):
            degenerate_z = P[int(np.argmax(deg))].copy()
        vals = -r if minimize else r
        j = int(np.argmax(vals))
        target = -best if minimize else best
        if vals[j] > target + rel_tol * max(abs(target), 1e-300):
            z = P[j]
            best = r[j]
            size = max(np.max(np.abs(z)), 1e-300)
        else:
            step *= 0.5
    return z, best, degenerate_z


def blowup(path_ratios: np.ndarray, window: int = 10) -> bool:
    """True when the ratio grows like a negative power of the shrink factor.

    Along a path that halves the denominator at every step, a bounded ratio
    flattens out while a power-law blow-up keeps increasing at a constant
    logarithmic rate.
    """
    r = np.asarray(path_ratios, dtype=float)
    bad = np.flatnonzero(~np.isfinite(r) | (r <= 0))
    if bad.size:
        r = r[:bad[0]]  # past this point the brackets drown in rounding
    if r.size <= window:
        return False
    tail = r[-(window + 1):]
    if not np.all(np.diff(tail) > 0):
        return False
    return tail[-1] >= 2.0 * tail[0] and r[-1] >= 10.0 and r[-1] >= 10.0 * r[0]


def maximize_ratio(fn: RatioFn, dim: int, *, budget: int, seed: int,
                   starts: np.ndarray | None = None, workers: int = 1,
                   polish_top: int = 4, probe: ProbeFn | None = None,
                   blocks: Sequence[slice] | None = None, tag: int = 0,
                   deg_floor: float = DEGENERATE_NUM) -> SearchResult:
    """Maximize ``num/den`` over configurations in R^dim.

    Structured ``starts`` take indices ``0..S-1``, random candidates follow.
    The ``polish_top`` best candidates are polished; the reduction picks the
    largest ratio with the smallest candidate index on ties.
    """
    ev = _Evaluator(fn, deg_floor)
    starts = np.zeros((0, dim)) if starts is None else np.atleast_2d(np.asarray(starts, float))
    S = starts.shape[0]
    n_random = max(int(budget), 1)
    n_chunks = -(-n_random // CHUNK)

    def run_chunk(c: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        size = min(CHUNK, n_random - c * CHUNK)
        Z = sample_chunk(seed, tag, c, size, dim, blocks)
        r, deg = _Evaluator(fn, deg_floor)(Z)
        return Z, r, deg

    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, range(n_chunks)))
    else:
        parts = [run_chunk(c) for c in range(n_chunks)]
    ev.count += n_random

    Zs = [starts] + [p[0] for p in parts]
    if S:
        r_s, deg_s = ev(starts)
    else:
        r_s, deg_s = np.zeros(0), np.zeros(0, dtype=bool)
    allZ = np.vstack(Zs)
    allR = np.concatenate([r_s] + [p[1] for p in parts])
    allDeg = np.concatenate([deg_s] + [p[2] for p in parts])

    result = SearchResult(ratio=0.0, z=allZ[0].copy(), index=0)
    if np.any(allDeg):
        i = int(np.argmax(allDeg))
        result.unbounded = True
        result.unbounded_z = allZ[i].copy()
        result.unbounded_ratio = float("inf")
        result.notes.append(f"degenerate candidate {i}")

    # smallest index among equal ratios: stable sort on -ratio
    order = np.argsort(-allR, kind="stable")
    top = [int(i) for i in order[:polish_top]]

    def run_polish(i: int):
        sub = _Evaluator(fn, deg_floor)
        z, r, dz = polish(sub, allZ[i], float(allR[i]))
        return i, z, r, dz, sub.count

    if workers > 1 and len(top) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            polished = list(pool.map(run_polish, top))
    else:
        polished = [run_polish(i) for i in top]

    best_r, best_i, best_z = float(allR[order[0]]), int(order[0]), allZ[order[0]].copy()
    for i, z, r, dz, cnt in polished:
        ev.count += cnt
        if r > best_r or (r == best_r and i < best_i):
            best_r, best_i, best_z = float(r), i, z
        if dz is not None and not result.unbounded:
            result.unbounded = True
            result.unbounded_z = dz
            result.unbounded_ratio = float("inf")
            result.notes.append(f"degenerate point while polishing candidate {i}")

    if probe is not None and not result.unbounded:
        probe_from = [z for _, z, _, _, _ in polished] + list(starts)
        for z in probe_from:
            path = probe(np.asarray(z), np.asarray(z))
            if path.shape[0] == 0:
                continue
            r, deg = ev(path)
            if np.any(deg):
                result.unbounded = True
                k = int(np.argmax(deg))
                result.unbounded_z = path[k].copy()
                result.unbounded_ratio = float("inf")
                break
            if blowup(r):
                k = int(np.argmax(r))
                result.unbounded = True
                result.unbounded_z = path[k].copy()
                result.unbounded_ratio = float(r[k])
                result.notes.append("power-law blow-up along shrink path")
                break

    result.ratio = best_r
    result.z = np.asarray(best_z, dtype=float)
    result.index = best_i
    result.evaluations = ev.count
    return result


def shrink_path(mask: np.ndarray, steps: int = 34) -> ProbeFn:
    """Probe that scales the masked coordinates by 2^-j, j = 0..steps-1."""
    mask = np.asarray(mask, dtype=bool)
    factors = 2.0 ** -np.arange(steps)

    def probe(z: np.ndarray, _unused: np.ndarray) -> np.ndarray:
        P = np.repeat(z[None, :], steps, axis=0)
        P[:, mask] *= factors[:, None]
        return P

    return probe


def minimize_value(fn: Callable[[np.ndarray], np.ndarray], dim: int, *, budget: int,
                   seed: int, starts: np.ndarray, tag: int = 0, scale: float = 1.0,
                   polish_top: int = 1, max_sweeps: int = 400, min_step: float = 1e-7,
                   workers: int = 1) -> tuple[np.ndarray, float, int]:
    """Minimize a plain batch objective; ``starts[0]`` wins all ties.

    Used by the renorming searches, whose objectives are brackets rather than
    ratios. Returns (argmin, min, evaluations).
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    n_chunks = -(-budget // CHUNK) if budget > 0 else 0

    def run_chunk(c: int) -> tuple[np.ndarray, np.ndarray]:
        size = min(CHUNK, budget - c * CHUNK)
        Z = scale * sample_chunk(seed, tag, c, size, dim)
        return Z, fn(Z)

    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, range(n_chunks)))
    else:
        parts = [run_chunk(c) for c in range(n_chunks)]
    allZ = np.vstack([starts] + [p[0] for p in parts])
    allV = np.concatenate([fn(starts)] + [p[1] for p in parts])
    count = allZ.shape[0]
    order = np.argsort(allV, kind="stable")
    best_i = int(order[0])
    best_z, best_v = allZ[best_i].copy(), float(allV[best_i])

    class _Plain:
        def __init__(self):
            self.count = 0

        def __call__(self, Z):
            self.count += Z.shape[0]
            return fn(Z), np.zeros(Z.shape[0], dtype=bool)

    for i in [int(k) for k in order[:polish_top]]:
        ev = _Plain()
        z, v, _ = _polish_abs(ev, allZ[i], float(allV[i]), scale, max_sweeps, min_step)
        count += ev.count
        if v < best_v:
            best_z, best_v = z, v
    return best_z, best_v, count


def _polish_abs(evaluate, z0, v0, scale, max_sweeps, min_step):
    """Minimizing coordinate polish with an absolute initial step."""
    z = np.array(z0, dtype=float)
    D = z.size
    E = np.vstack([np.eye(D), -np.eye(D)])
    step = 0.25 * scale
    best = v0
    sweeps = 0
    while step > min_step * scale and sweeps < max_sweeps:
        sweeps += 1
        v, _ = evaluate(z + step * E)
        j = int(np.argmin(v))
        if v[j] < best - 1e-14 * max(abs(best), 1.0):
            z = z + step * E[j]
            best = float(v[j])
        else:
            step *= 0.5
    return z, best, None


def polish_rows(fn: Callable[[np.ndarray, np.ndarray], np.ndarray], Z0: np.ndarray,
                v0: np.ndarray, *, step: float = 0.25, min_step: float = 1e-7,
                max_iter: int = 400, project: Callable[[np.ndarray], np.ndarray] | None = None
                ) -> tuple[np.ndarray, np.ndarray]:
    """Independent minimizing coordinate polishes, one per row, run in lockstep.

    ``fn(rows, Z)`` takes row indices (R,) and candidates (R, K, D) and returns
    (R, K) values. Each row's trajectory depends only on that row, so results
    do not change with the batch they are computed in.
    """
    Z = np.array(Z0, dtype=float)
    v = np.array(v0, dtype=float)
    B, D = Z.shape
    if D == 0 or B == 0:
        return Z, v
    E = np.vstack([np.eye(D), -np.eye(D)])
    steps = np.full(B, float(step))
    it = 0
    while it < max_iter:
        active = np.flatnonzero(steps > min_step)
        if active.size == 0:
            break
        it += 1
        cand = Z[active, None, :] + steps[active, None, None] * E[None, :, :]
        if project is not None:
            cand = project(cand)
        vals = fn(active, cand)
        j = np.argmin(vals, axis=1)
        best = vals[np.arange(active.size), j]
        better = best < v[active] - 1e-15 * np.maximum(np.abs(v[active]), 1.0)
        up = active[better]
        Z[up] = cand[better, j[better]]
        v[up] = best[better]
        steps[active[~better]] *= 0.5
    return Z, v
