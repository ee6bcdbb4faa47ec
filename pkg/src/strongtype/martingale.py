"""Dyadic martingale difference sequences.

Level k of a :class:`DifferenceSequence` holds one vector per level-(k-1)
interval: the value of d_k on the left child. The right child carries the
negative, so ``E(d_k | F_{k-1}) = 0`` holds by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import dyadic
from .dyadic import StepFunction
from .spaces import LinearOperator, Norm, euclidean


class MartingaleError(ValueError):
    def __init__(self, message: str, level: int | None = None, index: int | None = None):
        super().__init__(message)
        self.level = level
        self.index = index


@dataclass(frozen=True, eq=False)
class DifferenceSequence:
    """d_0 (optional constant ``initial``) followed by levels d_1..d_n."""

    levels: tuple
    dim: int
    initial: np.ndarray | None = None

    def __post_init__(self) -> None:
        levels = []
        for k, v in enumerate(self.levels, start=1):
            a = np.array(v, dtype=float).reshape(-1, self.dim) if np.size(v) else np.zeros((2 ** (k - 1), self.dim))
            if a.shape != (2 ** (k - 1), self.dim):
                raise MartingaleError(
                    f"level {k} needs shape ({2 ** (k - 1)}, {self.dim}), got {a.shape}", level=k
                )
            a.setflags(write=False)
            levels.append(a)
        if len(levels) > dyadic.DEPTH_CAP:
            raise MartingaleError(f"depth {len(levels)} exceeds the cap {dyadic.DEPTH_CAP}")
        object.__setattr__(self, "levels", tuple(levels))
        if self.initial is not None:
            x = np.array(self.initial, dtype=float).reshape(-1)
            if x.shape != (self.dim,):
                raise MartingaleError(f"initial term must have dimension {self.dim}")
            x.setflags(write=False)
            object.__setattr__(self, "initial", x)

    @property
    def depth(self) -> int:
        return len(self.levels)

    @classmethod
    def empty(cls, dim: int, initial=None) -> "DifferenceSequence":
        return cls((), dim, initial)

    def with_initial(self, x) -> "DifferenceSequence":
        return replace(self, initial=None if x is None else np.asarray(x, dtype=float))

    def padded(self, depth: int) -> "DifferenceSequence":
        """Append zero levels up to ``depth``."""
        if depth < self.depth:
            raise MartingaleError(f"cannot pad depth {self.depth} down to {depth}")
        extra = tuple(np.zeros((2 ** (k - 1), self.dim)) for k in range(self.depth + 1, depth + 1))
        return replace(self, levels=self.levels + extra)

    def scaled(self, t: float) -> "DifferenceSequence":
        init = None if self.initial is None else t * self.initial
        return DifferenceSequence(tuple(t * v for v in self.levels), self.dim, init)

    def flat(self) -> np.ndarray:
        """Levels 1..n concatenated (the search parametrization)."""
        if not self.levels:
            return np.zeros(0)
        return np.concatenate([v.reshape(-1) for v in self.levels])

    @classmethod
    def from_flat(cls, z: np.ndarray, depth: int, dim: int, initial=None) -> "DifferenceSequence":
        z = np.asarray(z, dtype=float)
        if z.size != dim * (2**depth - 1):
            raise MartingaleError(f"flat vector of size {z.size} does not fit depth {depth}")
        levels, start = [], 0
        for k in range(1, depth + 1):
            n = 2 ** (k - 1) * dim
            levels.append(z[start:start + n].reshape(-1, dim))
            start += n
        return cls(tuple(levels), dim, initial)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "initial": None if self.initial is None else self.initial.tolist(),
            "levels": [v.tolist() for v in self.levels],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DifferenceSequence":
        return cls(tuple(np.asarray(v, dtype=float) for v in d["levels"]), int(d["dim"]), d.get("initial"))

    def equals(self, other: "DifferenceSequence") -> bool:
        if self.dim != other.dim or self.depth != other.depth:
            return False
        if (self.initial is None) != (other.initial is None):
            return False
        if self.initial is not None and not np.array_equal(self.initial, other.initial):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.levels, other.levels))


@dataclass(frozen=True)
class MartingalePath:
    """f_0, ..., f_n with f_k of depth k."""

    steps: tuple

    def __post_init__(self) -> None:
        for k, f in enumerate(self.steps):
            if f.depth != k:
                raise MartingaleError(f"f_{k} has depth {f.depth}, expected {k}", level=k)


def signed_leaves(v: np.ndarray) -> np.ndarray:
    """Interleave +v and -v: the leaf values of a level from its left-child vectors."""
    out = np.empty((v.shape[0] * 2,) + v.shape[1:], dtype=float)
    out[0::2] = v
    out[1::2] = -v
    return out


def to_step(seq: DifferenceSequence, k: int, space: Norm | None = None,
            partial: bool = False) -> StepFunction:
    """d_k (or, with ``partial``, the partial sum f_k) as a depth-k step function."""
    if not 0 <= k <= seq.depth:
        raise MartingaleError(f"index {k} outside 0..{seq.depth}")
    space = euclidean(seq.dim) if space is None else space
    x0 = np.zeros(seq.dim) if seq.initial is None else seq.initial
    if not partial:
        if k == 0:
            return StepFunction.constant(x0, space)
        return StepFunction(signed_leaves(seq.levels[k - 1]), space)
    f = x0[None, :]
    for j in range(1, k + 1):
        f = np.repeat(f, 2, axis=0) + signed_leaves(seq.levels[j - 1])
    return StepFunction(f, space)


def partial_sums(seq: DifferenceSequence, space: Norm | None = None) -> MartingalePath:
    return MartingalePath(tuple(to_step(seq, k, space, partial=True) for k in range(seq.depth + 1)))


def validate(path: MartingalePath | Sequence[StepFunction], tol: float = 1e-12) -> DifferenceSequence:
    """Recover the difference representation of a martingale path.

    Raises :class:`MartingaleError` naming the first level/index where a parent
    value differs from its children's mean by more than ``tol``.
    """
    steps = path.steps if isinstance(path, MartingalePath) else tuple(path)
    if not steps:
        raise MartingaleError("empty path")
    for k, f in enumerate(steps):
        if f.depth != k:
            raise MartingaleError(f"f_{k} has depth {f.depth}, expected {k}", level=k)
    dim = steps[0].space_dim
    levels = []
    for k in range(1, len(steps)):
        child = steps[k].values
        parent = steps[k - 1].values
        means = 0.5 * (child[0::2] + child[1::2])
        err = np.max(np.abs(means - parent), axis=1)
        bad = np.flatnonzero(err > tol)
        if bad.size:
            i = int(bad[0])
            raise MartingaleError(
                f"martingale property fails at level {k}, block {i}: "
                f"parent {parent[i].tolist()} vs children mean {means[i].tolist()}",
                level=k,
                index=i,
            )
        levels.append(child[0::2] - parent)
    return DifferenceSequence(tuple(levels), dim, steps[0].values[0])


def from_rademacher(vectors: Sequence) -> DifferenceSequence:
    """d_0 = x_0 and d_k = x_k r_k for k >= 1."""
    vs = [np.asarray(v, dtype=float).reshape(-1) for v in vectors]
    if not vs:
        raise MartingaleError("need at least x_0")
    dim = vs[0].size
    if any(v.size != dim for v in vs):
        raise MartingaleError("all vectors must share one dimension")
    levels = tuple(np.tile(v, (2 ** (k - 1), 1)) for k, v in enumerate(vs[1:], start=1))
    return DifferenceSequence(levels, dim, vs[0])


def glue(seq_plus: DifferenceSequence, seq_minus: DifferenceSequence,
         x_plus, x_minus) -> DifferenceSequence:
    """Glue two difference sequences below a first step between x_plus and x_minus.

    d_1 is (x_+ - x_-)/2 on [0, 1/2) and its negative on [1/2, 1); level k+1
    runs ``seq_plus`` compressed into the left half and ``seq_minus`` into the
    right half. The result has no initial term; the midpoint (x_+ + x_-)/2 is
    the caller's.
    """
    if seq_plus.initial is not None or seq_minus.initial is not None:
        raise MartingaleError("glue takes sequences without an initial term")
    if seq_plus.dim != seq_minus.dim:
        raise MartingaleError("dimension mismatch")
    if seq_plus.depth != seq_minus.depth:
        raise MartingaleError(f"depth mismatch: {seq_plus.depth} vs {seq_minus.depth}")
    xp = np.asarray(x_plus, dtype=float).reshape(-1)
    xm = np.asarray(x_minus, dtype=float).reshape(-1)
    if xp.size != seq_plus.dim or xm.size != seq_plus.dim:
        raise MartingaleError("x_plus/x_minus dimension mismatch")
    first = ((xp - xm) / 2)[None, :]
    rest = tuple(np.vstack([a, b]) for a, b in zip(seq_plus.levels, seq_minus.levels))
    return DifferenceSequence((first,) + rest, seq_plus.dim)


def apply_operator(T: LinearOperator, seq: DifferenceSequence) -> DifferenceSequence:
    if seq.dim != T.domain.dim:
        raise MartingaleError(f"operator domain has dimension {T.domain.dim}, sequence {seq.dim}")
    init = None if seq.initial is None else T(seq.initial)
    return DifferenceSequence(tuple(T(v) for v in seq.levels), T.codomain.dim, init)


def random_sequence(seed: int, depth: int, dim: int, scale: float = 1.0,
                    with_initial: bool = False) -> DifferenceSequence:
    """Levels uniform on [-scale, scale]^dim, deterministic in ``seed``."""
    if depth > dyadic.DEPTH_CAP:
        raise MartingaleError(f"depth {depth} exceeds the cap {dyadic.DEPTH_CAP}")
    rng = np.random.default_rng(seed)
    init = rng.uniform(-scale, scale, dim) if with_initial else None
    levels = tuple(rng.uniform(-scale, scale, (2 ** (k - 1), dim)) for k in range(1, depth + 1))
    return DifferenceSequence(levels, dim, init)


# -- batched helpers used by the searches ------------------------------------


def batch_leaves(init: np.ndarray, levels: Sequence[np.ndarray]) -> np.ndarray:
    """Leaf values of x + sum d_k for a batch.

    ``init`` has shape (B, m); level k has shape (B, 2^{k-1}, m). Returns
    (B, 2^n, m).
    """
    f = init[:, None, :]
    for v in levels:
        B, K, m = v.shape
        f = (f[:, :, None, :] + np.stack([v, -v], axis=2)).reshape(B, 2 * K, m)
    return f


def split_levels(Z: np.ndarray, depth: int, dim: int, offset: int = 0) -> list:
    """Cut a batch of flat parameter vectors into level arrays."""
    out, start = [], offset
    B = Z.shape[0]
    for k in range(1, depth + 1):
        n = 2 ** (k - 1) * dim
        out.append(Z[:, start:start + n].reshape(B, 2 ** (k - 1), dim))
        start += n
    return out
