"""Dyadic intervals and step functions on [0, 1).

A step function of depth n is stored as its 2^n leaf values; every integral is
the exact weighted sum over leaves, so there is no quadrature error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spaces import Norm, dual_index

DEPTH_CAP = 12


class DyadicError(ValueError):
    pass


@dataclass(frozen=True)
class DyadicInterval:
    level: int
    index: int

    def __post_init__(self) -> None:
        if self.level < 0 or not 0 <= self.index < 2**self.level:
            raise DyadicError(f"no dyadic interval ({self.level}, {self.index})")

    @property
    def left(self) -> float:
        return self.index / 2**self.level

    @property
    def right(self) -> float:
        return (self.index + 1) / 2**self.level

    @property
    def length(self) -> float:
        return 2.0**-self.level

    def children(self) -> tuple["DyadicInterval", "DyadicInterval"]:
        k, i = self.level + 1, 2 * self.index
        return DyadicInterval(k, i), DyadicInterval(k, i + 1)

    def parent(self) -> "DyadicInterval":
        if self.level == 0:
            raise DyadicError("[0, 1) has no parent")
        return DyadicInterval(self.level - 1, self.index // 2)

    def contains(self, t: float) -> bool:
        return self.left <= t < self.right


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Piecewise-constant map [0, 1) -> R^m, constant on level-``depth`` intervals.

    ``values[i]`` is the value on ``[i/2^depth, (i+1)/2^depth)``; ``space`` is the
    norm used pointwise.
    """

    values: np.ndarray
    space: Norm

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise DyadicError("values must be an array of shape (2^n, m)")
        n_leaves, m = v.shape
        depth = n_leaves.bit_length() - 1
        if n_leaves != 2**depth:
            raise DyadicError(f"number of values must be a power of two, got {n_leaves}")
        if depth > DEPTH_CAP:
            raise DyadicError(f"depth {depth} exceeds the cap {DEPTH_CAP}")
        if m != self.space.dim:
            raise DyadicError(f"values have dimension {m}, space has {self.space.dim}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def depth(self) -> int:
        return self.values.shape[0].bit_length() - 1

    @property
    def space_dim(self) -> int:
        return self.values.shape[1]

    @classmethod
    def constant(cls, x, space: Norm, depth: int = 0) -> "StepFunction":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return cls(np.repeat(x, 2**depth, axis=0), space)

    def __call__(self, t: float) -> np.ndarray:
        if not 0 <= t < 1:
            raise DyadicError("step functions live on [0, 1)")
        return self.values[int(t * 2**self.depth)]

    def __add__(self, other: "StepFunction") -> "StepFunction":
        a, b = _common(self, other)
        return StepFunction(a.values + b.values, self.space)

    def __sub__(self, other: "StepFunction") -> "StepFunction":
        a, b = _common(self, other)
        return StepFunction(a.values - b.values, self.space)

    def __neg__(self) -> "StepFunction":
        return StepFunction(-self.values, self.space)

    def map(self, matrix: np.ndarray, space: Norm) -> "StepFunction":
        """Apply a matrix pointwise, landing in ``space``."""
        return StepFunction(self.values @ np.asarray(matrix, dtype=float).T, space)

    def allclose(self, other: "StepFunction", atol: float = 0.0) -> bool:
        a, b = _common(self, other)
        return bool(np.allclose(a.values, b.values, rtol=0.0, atol=atol))


def _common(f: StepFunction, g: StepFunction) -> tuple[StepFunction, StepFunction]:
    if f.space_dim != g.space_dim:
        raise DyadicError(f"dimension mismatch: {f.space_dim} vs {g.space_dim}")
    n = max(f.depth, g.depth)
    return refine(f, n), refine(g, n)


def refine(f: StepFunction, depth: int) -> StepFunction:
    """Same function written on the finer level-``depth`` partition."""
    if depth < f.depth:
        raise DyadicError(f"cannot refine depth {f.depth} down to {depth}")
    if depth == f.depth:
        return f
    return StepFunction(np.repeat(f.values, 2 ** (depth - f.depth), axis=0), f.space)


def lp_norm(f: StepFunction, p: float, space: Norm | None = None) -> float:
    """``(2^-n sum_i ||v_i||^p)^(1/p)``, with ``space`` overriding f's pointwise norm."""
    if not np.isfinite(p):
        raise DyadicError("only finite exponents are supported")
    if p < 1:
        raise DyadicError(f"invalid exponent {p}")
    N = f.space if space is None else space
    pointwise = N(f.values)
    if p == 1:
        return float(np.mean(pointwise))
    return float(np.mean(pointwise**p) ** (1.0 / p))


def lp_norm_dual(g: StepFunction, p: float) -> float:
    """L_{p'} norm of ``g`` with the dual of g's pointwise norm."""
    return lp_norm(g, dual_index(p), g.space.dual())


def pairing(f: StepFunction, g: StepFunction) -> float:
    """``int_0^1 <f(t), g(t)> dt`` at the common depth."""
    a, b = _common(f, g)
    return float(np.mean(np.sum(a.values * b.values, axis=1)))


def block_means(values: np.ndarray, k: int) -> np.ndarray:
    """Means of ``values`` (2^n leading entries) over the 2^k level-k blocks."""
    n_leaves = values.shape[0]
    if 2**k > n_leaves:
        raise DyadicError(f"level {k} is finer than the data")
    return values.reshape(2**k, n_leaves // 2**k, *values.shape[1:]).mean(axis=1)


def cond_expect(f: StepFunction, k: int) -> StepFunction:
    """Conditional expectation onto the level-k dyadic sigma-algebra (depth-k result)."""
    if not 0 <= k <= f.depth:
        raise DyadicError(f"level {k} outside 0..{f.depth}")
    if k == f.depth:
        return f
    return StepFunction(block_means(f.values, k), f.space)


def integral(f: StepFunction) -> np.ndarray:
    return f.values.mean(axis=0)
