"""Inequality defects for uniform convexity/smoothness and (strong) martingale
cotype/type, plus best-constant estimation.

Every defect comes back as a :class:`DefectReport` with ``value = lhs - rhs``
(nonpositive when the inequality holds at the given constant) and a
``power_gap``: the same inequality written as ``bracket <= 0`` after raising
both sides to the exponent. Power gaps are what the depth-one reductions and
the telescoping sums compare, since different forms of one inequality agree
there exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .martingale import DifferenceSequence, batch_leaves, from_rademacher, split_levels
from .search import (DEGENERATE_NUM, ConstantEstimate, ProbeFn, confirm_degenerate,
                     maximize_ratio, ratios, shrink_path)
from .spaces import LinearOperator

KINDS = ("smooth", "convex", "strong_type", "strong_cotype", "plain_type", "plain_cotype")
TYPE_KINDS = ("smooth", "strong_type", "plain_type")

BRUTE_FORCE_MAX_POINTS = 6_000_000
# brackets below this (relative to size^exponent) are dominated by rounding
BRACKET_FLOOR = 1e-7


class ExponentError(ValueError):
    pass


@dataclass(frozen=True)
class DefectReport:
    value: float
    lhs: float
    rhs: float
    power_gap: float = 0.0
    exponent: float | None = None
    c: float | None = None
    config: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.value <= 0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "power_gap": self.power_gap,
            "exponent": self.exponent,
            "c": self.c,
            "config": _jsonable(self.config),
        }


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, DifferenceSequence):
        return obj.to_dict()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        # strict JSON has no infinities; float() parses these strings back
        return str(obj)
    return obj


def check_type_exponent(p: float) -> None:
    if not 1 <= p <= 2:
        raise ExponentError(f"type/smoothness exponent must lie in [1, 2], got {p}")


def check_cotype_exponent(q: float) -> None:
    if not (2 <= q < np.inf):
        raise ExponentError(f"cotype/convexity exponent must lie in [2, inf), got {q}")


def _check_c(c: float) -> None:
    if not c > 0:
        raise ValueError(f"constant must be positive, got {c}")


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1)


def _level_power_sums(N, levels, r: float) -> np.ndarray:
    """sum_k ||d_k||_{L_r}^r for stored levels (batched or not, last axes (2^{k-1}, m))."""
    total = 0.0
    for v in levels:
        total = total + np.mean(N(v) ** r, axis=-1)
    return np.asarray(total, dtype=float)


# -- single-configuration defects --------------------------------------------


def convexity_defect(T: LinearOperator, x_plus, x_minus, q: float, c: float) -> DefectReport:
    """Uniform q-convexity at one pair: ``||T(x+ - x-)/2|| <= c * bracket^(1/q)``."""
    check_cotype_exponent(q)
    _check_c(c)
    xp, xm = _vec(x_plus), _vec(x_minus)
    X, Y = T.domain, T.codomain
    half = (xp - xm) / 2
    mid = (xp + xm) / 2
    bracket = (X(xp) ** q + X(xm) ** q) / 2 - X(mid) ** q
    lhs = float(Y(T(half)))
    rhs = float(c * max(bracket, 0.0) ** (1 / q))
    return DefectReport(
        value=lhs - rhs, lhs=lhs, rhs=rhs,
        power_gap=float(lhs**q / c**q - bracket),
        exponent=q, c=c,
        config={"x_plus": xp, "x_minus": xm, "x": half, "x0": mid, "bracket": float(bracket)},
    )


def convexity_defect_centered(T: LinearOperator, x, x0, q: float, c: float) -> DefectReport:
    """The same inequality parametrized by half-difference ``x`` and midpoint ``x0``."""
    x, x0 = _vec(x), _vec(x0)
    return convexity_defect(T, x0 + x, x0 - x, q, c)


def smoothness_defect(T: LinearOperator, x, y, p: float, c: float) -> DefectReport:
    """Uniform p-smoothness at one pair: ``bracket^(1/p) <= c ||x||``."""
    check_type_exponent(p)
    _check_c(c)
    x, y = _vec(x), _vec(y)
    X, Y = T.domain, T.codomain
    Tx = T(x)
    bracket = (Y(y + Tx) ** p + Y(y - Tx) ** p) / 2 - Y(y) ** p
    lhs = float(max(bracket, 0.0) ** (1 / p))
    rhs = float(c * X(x))
    return DefectReport(
        value=lhs - rhs, lhs=lhs, rhs=rhs,
        power_gap=float(bracket - rhs**p),
        exponent=p, c=c,
        config={"x": x, "y": y, "bracket": float(bracket)},
    )


def strong_cotype_defect(T: LinearOperator, seq: DifferenceSequence, q: float, c: float) -> DefectReport:
    check_cotype_exponent(q)
    _check_c(c)
    if seq.initial is None:
        raise ValueError("strong cotype needs the initial term d_0 = x")
    X, Y = T.domain, T.codomain
    x = seq.initial
    S = float(_level_power_sums(Y, [T(v) for v in seq.levels], q))
    leaves = batch_leaves(x[None, :], [v[None] for v in seq.levels])[0]
    Rq = float(np.mean(X(leaves) ** q))
    nx = float(X(x))
    lhs = (nx**q + S / c**q) ** (1 / q)
    rhs = Rq ** (1 / q)
    return DefectReport(
        value=lhs - rhs, lhs=lhs, rhs=rhs,
        power_gap=nx**q + S / c**q - Rq,
        exponent=q, c=c, config={"sequence": seq},
    )


def strong_type_defect(T: LinearOperator, y, seq: DifferenceSequence, p: float, c: float) -> DefectReport:
    check_type_exponent(p)
    _check_c(c)
    if seq.initial is not None:
        raise ValueError("strong type takes no initial term; fold it into y as y + Tx")
    X, Y = T.domain, T.codomain
    y = _vec(y)
    Tlev = [T(v)[None] for v in seq.levels]
    leaves = batch_leaves(y[None, :], Tlev)[0]
    Lp = float(np.mean(Y(leaves) ** p))
    S = float(_level_power_sums(X, seq.levels, p))
    ny = float(Y(y))
    lhs = Lp ** (1 / p)
    rhs = (ny**p + c**p * S) ** (1 / p)
    return DefectReport(
        value=lhs - rhs, lhs=lhs, rhs=rhs,
        power_gap=Lp - ny**p - c**p * S,
        exponent=p, c=c, config={"y": y, "sequence": seq},
    )


def plain_type_defect(T: LinearOperator, seq: DifferenceSequence, p: float, c: float) -> DefectReport:
    check_type_exponent(p)
    _check_c(c)
    X, Y = T.domain, T.codomain
    x = np.zeros(seq.dim) if seq.initial is None else seq.initial
    leaves = batch_leaves(T(x)[None, :], [T(v)[None] for v in seq.levels])[0]
    Lp = float(np.mean(Y(leaves) ** p))
    S = float(X(x)) ** p + float(_level_power_sums(X, seq.levels, p))
    lhs = Lp ** (1 / p)
    rhs = c * S ** (1 / p)
    return DefectReport(
        value=lhs - rhs, lhs=lhs, rhs=rhs, power_gap=Lp - c**p * S,
        exponent=p, c=c, config={"sequence": seq},
    )


def plain_cotype_defect(T: LinearOperator, seq: DifferenceSequence, q: float, c: float) -> DefectReport:
    check_cotype_exponent(q)
    _check_c(c)
    X, Y = T.domain, T.codomain
    x = np.zeros(seq.dim) if seq.initial is None else seq.initial
    S = float(Y(T(x))) ** q + float(_level_power_sums(Y, [T(v) for v in seq.levels], q))
    leaves = batch_leaves(x[None, :], [v[None] for v in seq.levels])[0]
    Rq = float(np.mean(X(leaves) ** q))
    lhs = (S / c**q) ** (1 / q)
    rhs = Rq ** (1 / q)
    return DefectReport(
        value=lhs - rhs, lhs=lhs, rhs=rhs, power_gap=S / c**q - Rq,
        exponent=q, c=c, config={"sequence": seq},
    )


# -- depth-one reduction and telescoping --------------------------------------


def depth1_reduction_check(T: LinearOperator, a, b, exponent: float, c: float = 1.0,
                           side: str = "type") -> float:
    """Distance between a depth-one martingale defect and its two-point form.

    ``side="type"``: ``a = x``, ``b = y``; compares strong type on the
    sequence ``d_1 = x r_1`` with smoothness at ``(x, y)``.
    ``side="cotype"``: ``a = x_0``, ``b = x_1``; compares strong cotype on
    ``x_0 + x_1 r_1`` with convexity at ``x_+- = x_0 +- x_1``.
    """
    a, b = _vec(a), _vec(b)
    if side == "type":
        seq = from_rademacher([np.zeros_like(a), a]).with_initial(None)
        strong = strong_type_defect(T, b, seq, exponent, c)
        pair = smoothness_defect(T, a, b, exponent, c)
    elif side == "cotype":
        strong = strong_cotype_defect(T, from_rademacher([a, b]), exponent, c)
        pair = convexity_defect(T, a + b, a - b, exponent, c)
    else:
        raise ValueError(f"side must be 'type' or 'cotype', got {side!r}")
    return abs(strong.power_gap - pair.power_gap)


def telescoping_check(T: LinearOperator, y, seq: DifferenceSequence, p: float, c: float) -> list[DefectReport]:
    """Level-wise ``||y + Tf_k||^p <= ||y + Tf_{k-1}||^p + c^p ||d_k||^p`` (all in L_p)."""
    check_type_exponent(p)
    _check_c(c)
    if seq.initial is not None:
        raise ValueError("type telescoping takes no initial term")
    X, Y = T.domain, T.codomain
    f = _vec(y)[None, :]
    prev = float(Y(f[0]) ** p)
    out = []
    for k, v in enumerate(seq.levels, start=1):
        f = np.repeat(f, 2, axis=0)
        Tv = T(v)
        f[0::2] += Tv
        f[1::2] -= Tv
        cur = float(np.mean(Y(f) ** p))
        dk = float(np.mean(X(v) ** p))
        rhs = prev + c**p * dk
        out.append(DefectReport(value=cur - rhs, lhs=cur, rhs=rhs, power_gap=cur - rhs,
                                exponent=p, c=c, config={"level": k}))
        prev = cur
    return out


def telescoping_cotype_check(T: LinearOperator, seq: DifferenceSequence, q: float, c: float) -> list[DefectReport]:
    """Level-wise ``c^-q ||Td_k||^q <= ||f_k||^q - ||f_{k-1}||^q`` (all in L_q)."""
    check_cotype_exponent(q)
    _check_c(c)
    if seq.initial is None:
        raise ValueError("cotype telescoping needs the initial term")
    X, Y = T.domain, T.codomain
    f = seq.initial[None, :].copy()
    prev = float(X(f[0]) ** q)
    out = []
    for k, v in enumerate(seq.levels, start=1):
        f = np.repeat(f, 2, axis=0)
        f[0::2] += v
        f[1::2] -= v
        cur = float(np.mean(X(f) ** q))
        lhs = float(np.mean(Y(T(v)) ** q)) / c**q
        rhs = cur - prev
        out.append(DefectReport(value=lhs - rhs, lhs=lhs, rhs=rhs, power_gap=lhs - rhs,
                                exponent=q, c=c, config={"level": k}))
        prev = cur
    return out


# -- batched ratio problems ---------------------------------------------------


@dataclass
class Problem:
    """Ratio ``num/den`` whose supremum is the best constant of one inequality."""

    kind: str
    T: LinearOperator
    exponent: float
    depth: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.kind in TYPE_KINDS:
            check_type_exponent(self.exponent)
        else:
            check_cotype_exponent(self.exponent)
        self.n = self.T.domain.dim
        self.m = self.T.codomain.dim
        self.n_levels = self.n * (2**self.depth - 1)

    @property
    def head(self) -> int:
        """Size of the leading block (x, y or x_+/x_- pair)."""
        if self.kind == "smooth":
            return self.n + self.m
        if self.kind == "convex":
            return 2 * self.n
        if self.kind == "strong_type":
            return self.m
        return self.n

    @property
    def dim(self) -> int:
        if self.kind in ("smooth", "convex"):
            return self.head
        return self.head + self.n_levels

    def blocks(self) -> list[slice]:
        if self.kind == "smooth":
            return [slice(0, self.n), slice(self.n, self.n + self.m)]
        if self.kind == "convex":
            return [slice(0, self.n), slice(self.n, 2 * self.n)]
        out = [slice(0, self.head)]
        start = self.head
        for k in range(1, self.depth + 1):
            size = 2 ** (k - 1) * self.n
            out.append(slice(start, start + size))
            start += size
        return out

    @property
    def deg_floor(self) -> float:
        """Numerator floor for degenerate witnesses.

        When the denominator is the root of a bracket, extended precision
        still cannot resolve brackets below ~eps_ld; the numerator must sit
        well above the size such a bracket could hide.
        """
        if self.kind in ("convex", "strong_cotype"):
            eps = float(np.finfo(np.longdouble).eps)
            return max(DEGENERATE_NUM, 10 * (4 * eps) ** (1 / self.exponent))
        return DEGENERATE_NUM

    def __call__(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Numerators, denominators and a cancellation-free mask for a batch."""
        X, Y, M = self.T.domain, self.T.codomain, self.T.matrix
        r = self.exponent
        n = self.n
        scale_r = np.max(np.abs(Z), axis=1) ** r
        scale_r = np.where(scale_r > 0, scale_r, 1.0)

        def ok(bracket):
            return bracket >= BRACKET_FLOOR * scale_r

        if self.kind == "smooth":
            x, y = Z[:, :n], Z[:, n:]
            Tx = x @ M.T
            br = (Y(y + Tx) ** r + Y(y - Tx) ** r) / 2 - Y(y) ** r
            return np.maximum(br, 0.0) ** (1 / r), X(x), ok(br)
        if self.kind == "convex":
            xp, xm = Z[:, :n], Z[:, n:]
            br = (X(xp) ** r + X(xm) ** r) / 2 - X((xp + xm) / 2) ** r
            return Y(((xp - xm) / 2) @ M.T), np.maximum(br, 0.0) ** (1 / r), ok(br)
        head = Z[:, :self.head]
        levels = split_levels(Z, self.depth, n, offset=self.head)
        ones = np.ones(Z.shape[0])
        if self.kind == "strong_type":
            leaves = batch_leaves(head, [v @ M.T for v in levels])
            br = np.mean(Y(leaves) ** r, axis=1) - Y(head) ** r
            den = _level_power_sums(X, levels, r) * ones
            return np.maximum(br, 0.0) ** (1 / r), den ** (1 / r), ok(br)
        if self.kind == "strong_cotype":
            leaves = batch_leaves(head, levels)
            num = _level_power_sums(Y, [v @ M.T for v in levels], r) * ones
            br = np.mean(X(leaves) ** r, axis=1) - X(head) ** r
            return num ** (1 / r), np.maximum(br, 0.0) ** (1 / r), ok(br)
        if self.kind == "plain_type":
            leaves = batch_leaves(head @ M.T, [v @ M.T for v in levels])
            num = np.mean(Y(leaves) ** r, axis=1) ** (1 / r)
            den = (X(head) ** r + _level_power_sums(X, levels, r)) ** (1 / r)
            return num, den, ones > 0
        leaves = batch_leaves(head, levels)
        num = (Y(head @ M.T) ** r + _level_power_sums(Y, [v @ M.T for v in levels], r)) ** (1 / r)
        den = np.mean(X(leaves) ** r, axis=1) ** (1 / r)
        return num, den, ones > 0

    # -- witnesses ------------------------------------------------------------

    def witness(self, z: np.ndarray) -> dict:
        z = np.asarray(z, dtype=float)
        n = self.n
        if self.kind == "smooth":
            return {"x": z[:n].tolist(), "y": z[n:].tolist()}
        if self.kind == "convex":
            return {"x_plus": z[:n].tolist(), "x_minus": z[n:].tolist()}
        seq = DifferenceSequence.from_flat(z[self.head:], self.depth, n)
        if self.kind == "strong_type":
            return {"y": z[:self.head].tolist(), "sequence": seq.to_dict()}
        return {"sequence": seq.with_initial(z[:self.head]).to_dict()}

    @classmethod
    def from_witness(cls, kind: str, T: LinearOperator, exponent: float,
                     witness: dict) -> tuple["Problem", np.ndarray]:
        if kind in ("smooth", "convex"):
            a, b = ("x", "y") if kind == "smooth" else ("x_plus", "x_minus")
            return cls(kind, T, exponent), np.concatenate([_vec(witness[a]), _vec(witness[b])])
        seq = DifferenceSequence.from_dict(witness["sequence"])
        prob = cls(kind, T, exponent, seq.depth)
        head = _vec(witness["y"]) if kind == "strong_type" else (
            seq.initial if seq.initial is not None else np.zeros(seq.dim))
        return prob, np.concatenate([head, seq.flat()])

    def probe(self) -> ProbeFn | None:
        if self.kind == "smooth":
            mask = np.zeros(self.dim, dtype=bool)
            mask[:self.n] = True
            return shrink_path(mask)
        if self.kind == "convex":
            n = self.n
            factors = 2.0 ** -np.arange(34)

            def probe(z: np.ndarray, _unused) -> np.ndarray:
                mid, half = (z[:n] + z[n:]) / 2, (z[:n] - z[n:]) / 2
                h = factors[:, None] * half
                return np.hstack([mid + h, mid - h])

            return probe
        if self.kind in ("strong_type", "strong_cotype") and self.depth > 0:
            mask = np.zeros(self.dim, dtype=bool)
            mask[self.head:] = True
            return shrink_path(mask)
        return None

    def starts(self, limit: int = 1500) -> np.ndarray:
        """Structured configurations: coordinate axes, +-e_i +- e_j and sign vectors."""
        VX = structured_vectors(self.n)
        VY = structured_vectors(self.m)
        if self.kind == "smooth":
            ys = np.vstack([np.zeros((1, self.m)), VY])
            rows = [np.concatenate([x, y]) for x, y in itertools.product(VX, ys)]
        elif self.kind == "convex":
            rows = [np.concatenate([a, b]) for a, b in itertools.product(VX, VX)]
        else:
            heads = np.vstack([np.zeros((1, self.head)), VY if self.kind == "strong_type" else VX])
            rows = []
            if self.depth == 0:
                rows = [h for h in heads]
            else:
                for h, v in itertools.product(heads, VX):
                    z = np.zeros(self.dim)
                    z[:self.head] = h
                    z[self.head:self.head + self.n] = v
                    rows.append(z)
        rows = rows[:limit]
        return np.array(rows, dtype=float).reshape(-1, self.dim)


def structured_vectors(n: int, limit: int = 40) -> np.ndarray:
    """+-e_i, e_i +- e_j and the sign vectors of R^n (one per +-pair except axes)."""
    out = []
    eye = np.eye(n)
    for i in range(n):
        out.append(eye[i])
        out.append(-eye[i])
    for i, j in itertools.combinations(range(n), 2):
        out.append(eye[i] + eye[j])
        out.append(eye[i] - eye[j])
    if n > 2:
        for signs in itertools.product((1.0, -1.0), repeat=n - 1):
            out.append(np.array((1.0,) + signs))
    return np.array(out[:limit])


def base_kind(kind: str) -> str:
    """Accept ``smooth`` as well as ``smooth_p`` or ``smooth_1.5``."""
    if kind in KINDS:
        return kind
    head, _, _ = kind.rpartition("_")
    if head in KINDS:
        return head
    raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")


def witness_ratio(kind: str, T: LinearOperator, exponent: float, witness: dict) -> tuple[float, float, float]:
    """Replay a stored witness: (numerator, denominator, ratio)."""
    prob, z = Problem.from_witness(base_kind(kind), T, exponent, witness)
    num, den, _ = prob(z[None, :])
    num, den = float(num[0]), float(den[0])
    if den == 0:
        return num, den, (float("inf") if num > 0 else 0.0)
    return num, den, num / den


def best_constant(kind: str, T: LinearOperator, exponent: float, depth_cap: int = 2,
                  budget: int = 4000, seed: int = 0, workers: int = 1,
                  polish_top: int = 4) -> ConstantEstimate:
    """Lower bound for the optimal constant of one inequality, with witness.

    Pair kinds (``smooth``, ``convex``) search vector pairs; sequence kinds
    split the budget over depths 1..depth_cap (0..depth_cap for the plain
    kinds). Deterministic in ``seed`` for any ``workers``.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    kind = base_kind(kind)
    if kind in ("smooth", "convex"):
        depths = [0]
    elif kind.startswith("plain"):
        depths = list(range(0, depth_cap + 1))
    else:
        depths = list(range(1, max(depth_cap, 1) + 1))
    per_depth = max(budget // len(depths), 1)
    best = None
    flagged = None
    total = 0
    for depth in depths:
        prob = Problem(kind, T, exponent, depth)
        res = maximize_ratio(prob, prob.dim, budget=per_depth, seed=seed, starts=prob.starts(),
                             workers=workers, polish_top=polish_top, probe=prob.probe(),
                             blocks=prob.blocks(), tag=depth, deg_floor=prob.deg_floor)
        total += res.evaluations
        if best is None or res.ratio > best[0].ratio:
            best = (res, prob)
        if res.unbounded and flagged is None:
            flagged = (res, prob)
    res, prob = best
    suffix = "p" if kind in TYPE_KINDS else "q"
    est = ConstantEstimate(
        kind=f"{kind}_{suffix}",
        exponent=exponent,
        lower_bound=float(res.ratio),
        witness=prob.witness(res.z),
        unbounded_flag=flagged is not None,
        unbounded_witness=None if flagged is None else flagged[1].witness(flagged[0].unbounded_z),
        unbounded_ratio=None if flagged is None else flagged[0].unbounded_ratio,
        seed=seed,
        evaluations=total,
        depth=prob.depth,
    )
    return est


def brute_force_constant(kind: str, T: LinearOperator, exponent: float, grid_step: float,
                         depth: int = 1, radius: float = 1.0) -> ConstantEstimate:
    """Exact maximum of the ratio over all configurations on a coordinate grid.

    The grid is ``{i * grid_step : |i * grid_step| <= radius}`` in every
    coordinate. Restricted to depth <= 2 and dimension <= 2.
    """
    if depth > 2 or T.domain.dim > 2 or T.codomain.dim > 2:
        raise ValueError("brute force is limited to depth <= 2 and dimension <= 2")
    if grid_step <= 0:
        raise ValueError("grid step must be positive")
    if kind in ("smooth", "convex"):
        depth = 0
    kind = base_kind(kind)
    prob = Problem(kind, T, exponent, depth)
    K = int(np.floor(radius / grid_step + 1e-9))
    axis = np.arange(-K, K + 1) * grid_step
    D = prob.dim
    total = axis.size**D
    if total > BRUTE_FORCE_MAX_POINTS:
        raise ValueError(f"instance too large: {total} grid points (limit {BRUTE_FORCE_MAX_POINTS})")
    best_r, best_z = 0.0, np.zeros(D)
    flag_z = None
    if D == 1:
        heads = [()]
        rest = D
    else:
        heads = list(itertools.product(axis, repeat=1))
        rest = D - 1
    mesh = np.stack(np.meshgrid(*([axis] * rest), indexing="ij"), axis=-1).reshape(-1, rest)
    for h in heads:
        Z = np.hstack([np.full((mesh.shape[0], len(h)), h), mesh]) if h else mesh
        num, den, ok = prob(Z)
        r, deg = ratios(num, den, np.max(np.abs(Z), axis=1), ok, prob.deg_floor)
        i = int(np.argmax(r))
        if r[i] > best_r:
            best_r, best_z = float(r[i]), Z[i].copy()
        if flag_z is None and np.any(deg):
            idx = np.flatnonzero(deg)
            confirmed = idx[confirm_degenerate(prob, Z[idx], prob.deg_floor)]
            if confirmed.size:
                flag_z = Z[confirmed[0]].copy()
    suffix = "p" if kind in TYPE_KINDS else "q"
    return ConstantEstimate(
        kind=f"{kind}_{suffix}",
        exponent=exponent,
        lower_bound=best_r,
        witness=prob.witness(best_z),
        unbounded_flag=flag_z is not None,
        unbounded_witness=None if flag_z is None else prob.witness(flag_z),
        unbounded_ratio=None if flag_z is None else float("inf"),
        evaluations=int(total),
        depth=depth,
    )
