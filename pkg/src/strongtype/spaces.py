"""Finite-dimensional normed spaces: a closed catalog of norms, their duals,
and matrix operators between them.

Every norm evaluates along the last axis, so ``norm(values)`` works for a
single vector of shape ``(m,)`` as well as for stacks of shape ``(..., m)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

KINDS = ("lp", "euclidean", "sup", "polyhedral")

# vertex enumeration visits C(r, m) * 2^m linear systems
MAX_VERTEX_SYSTEMS = 200_000
# above this exponent lp norms are evaluated with the largest term factored out
LARGE_P = 8.0


class NormError(ValueError):
    """Invalid norm or operator specification."""


class DualNotImplemented(NormError):
    """The requested dual norm cannot be evaluated for this catalog member."""


def _as_real(x: Any) -> np.ndarray:
    # extended precision passes through (used to confirm degenerate witnesses)
    v = np.asarray(x)
    if v.dtype != np.longdouble:
        v = v.astype(float)
    return v


def dual_index(p: float) -> float:
    """Return p' with 1/p + 1/p' = 1 (``inf`` for p = 1)."""
    if p < 1:
        raise NormError(f"exponent must be >= 1, got {p}")
    if p == 1:
        return float("inf")
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True, eq=False)
class Norm:
    """A norm on R^dim drawn from the catalog.

    ``kind`` is one of ``lp``, ``euclidean``, ``sup`` or ``polyhedral``.
    ``lp`` and ``sup`` take optional positive weights; the weighted lp norm is
    ``(sum w_i |x_i|^p)^(1/p)`` and the weighted sup norm ``max w_i |x_i|``.
    A polyhedral norm is ``max_j |<f_j, x>|`` over its supporting functionals.
    """

    kind: str
    dim: int
    p: float | None = None
    weights: np.ndarray | None = None
    functionals: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise NormError(f"unknown norm kind {self.kind!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise NormError(f"dimension must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if self.kind == "lp":
            if self.p is None or not np.isfinite(self.p) or self.p < 1:
                raise NormError(f"lp norm needs a finite exponent p >= 1, got {self.p}")
            object.__setattr__(self, "p", float(self.p))
        if self.weights is not None:
            if self.kind not in ("lp", "sup"):
                raise NormError(f"{self.kind} norm takes no weights")
            w = np.array(self.weights, dtype=float)
            if w.shape != (self.dim,):
                raise NormError(f"weights must have shape ({self.dim},), got {w.shape}")
            if np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise NormError("weights must be positive and finite")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)
        if self.kind == "polyhedral":
            F = np.array(self.functionals, dtype=float)
            if F.ndim != 2 or F.shape[1] != self.dim or F.shape[0] == 0:
                raise NormError(f"functionals must be an (r, {self.dim}) array")
            if np.linalg.matrix_rank(F) < self.dim:
                raise NormError("polyhedral functionals must span the dual space")
            F.setflags(write=False)
            object.__setattr__(self, "functionals", F)
        elif self.functionals is not None:
            raise NormError(f"{self.kind} norm takes no functionals")

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x: Any) -> Any:
        v = _as_real(x)
        if v.shape[-1:] != (self.dim,):
            raise NormError(f"expected trailing dimension {self.dim}, got shape {v.shape}")
        a = np.abs(v)
        if self.kind == "euclidean":
            return np.sqrt(np.sum(a * a, axis=-1))
        if self.kind == "sup":
            if self.weights is not None:
                a = a * self.weights
            return np.max(a, axis=-1)
        if self.kind == "polyhedral":
            return np.max(np.abs(v @ self.functionals.T), axis=-1)
        p = self.p
        if p == 1:
            s = a if self.weights is None else a * self.weights
            return np.sum(s, axis=-1)
        if p == 2 and self.weights is None:
            return np.sqrt(np.sum(a * a, axis=-1))
        if p > LARGE_P:
            # factor out the largest term so a**p neither overflows nor underflows
            b = a if self.weights is None else a * self.weights ** (1.0 / p)
            top = np.max(b, axis=-1, keepdims=True)
            safe = np.where(top > 0, top, 1)
            return top[..., 0] * np.sum((b / safe) ** p, axis=-1) ** (1.0 / p)
        s = a**p
        if self.weights is not None:
            s = s * self.weights
        return np.sum(s, axis=-1) ** (1.0 / p)

    def power(self, x: Any, r: float) -> Any:
        """||x||^r, skipping the root when r matches the norm's own exponent."""
        own = 2.0 if self.kind == "euclidean" else self.p
        if own is None or r != own or self.weights is not None or own > LARGE_P:
            return self(x) ** r
        v = _as_real(x)
        if v.shape[-1:] != (self.dim,):
            raise NormError(f"expected trailing dimension {self.dim}, got shape {v.shape}")
        if r == 2:
            return np.sum(v * v, axis=-1)
        a = np.abs(v)
        if r == 1:
            return np.sum(a, axis=-1)
        return np.sum(a * a * a if r == 3 else a**r, axis=-1)

    # -- duality ------------------------------------------------------------

    def dual(self) -> "Norm":
        """The dual norm on R^dim under the Euclidean pairing."""
        if "dual" in self._cache:
            return self._cache["dual"]
        if self.kind == "euclidean":
            d = Norm("euclidean", self.dim)
        elif self.kind == "sup":
            w = None if self.weights is None else 1.0 / self.weights
            d = Norm("lp", self.dim, p=1.0, weights=w)
        elif self.kind == "lp" and self.p == 1:
            w = None if self.weights is None else 1.0 / self.weights
            d = Norm("sup", self.dim, weights=w)
        elif self.kind == "lp":
            q = dual_index(self.p)
            w = None if self.weights is None else self.weights ** (-q / self.p)
            d = Norm("lp", self.dim, p=q, weights=w)
        else:
            d = Norm("polyhedral", self.dim, functionals=self.vertices())
        self._cache["dual"] = d
        return d

    def vertices(self) -> np.ndarray:
        """Vertices of the unit ball of a polyhedral norm, one per +-pair."""
        if self.kind != "polyhedral":
            raise NormError("vertices are only defined for polyhedral norms")
        if "vertices" in self._cache:
            return self._cache["vertices"]
        F = self.functionals
        r, m = F.shape
        n_systems = _comb(r, m) * 2**m
        if n_systems > MAX_VERTEX_SYSTEMS:
            raise DualNotImplemented(
                f"polyhedral dual needs {n_systems} vertex systems (limit {MAX_VERTEX_SYSTEMS})"
            )
        found: list[np.ndarray] = []
        for rows in itertools.combinations(range(r), m):
            A = F[list(rows)]
            if abs(np.linalg.det(A)) < 1e-12:
                continue
            for signs in itertools.product((1.0, -1.0), repeat=m):
                if signs[0] < 0:
                    continue  # -v is the same vertex pair
                v = np.linalg.solve(A, np.array(signs))
                if np.max(np.abs(F @ v)) <= 1 + 1e-10:
                    if not any(np.allclose(v, u, atol=1e-12) or np.allclose(v, -u, atol=1e-12) for u in found):
                        found.append(v)
        V = np.array(found)
        V.setflags(write=False)
        self._cache["vertices"] = V
        return V

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind, "dim": self.dim}
        if self.p is not None:
            d["p"] = self.p
        if self.weights is not None:
            d["weights"] = self.weights.tolist()
        if self.functionals is not None:
            d["functionals"] = self.functionals.tolist()
        return d

    @classmethod
    def from_dict(cls, spec: dict) -> "Norm":
        spec = dict(spec)
        kind = spec.pop("kind", None)
        dim = spec.pop("dim", None)
        if dim is None and spec.get("functionals") is not None:
            dim = int(np.shape(spec["functionals"])[-1])
        if kind is None or dim is None:
            raise NormError("norm spec needs 'kind' and 'dim'")
        if kind == "lp" and spec.get("p") in ("inf", float("inf")):
            spec.pop("p")
            kind = "sup"
        allowed = {"p", "weights", "functionals"}
        extra = set(spec) - allowed
        if extra:
            raise NormError(f"unknown norm fields {sorted(extra)}")
        return cls(kind, dim, **spec)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Norm) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(repr(sorted(self.to_dict().items())))

    def __repr__(self) -> str:
        if self.kind == "lp":
            w = "" if self.weights is None else ", weighted"
            return f"Norm(l_{self.p:g}^{self.dim}{w})"
        return f"Norm({self.kind}^{self.dim})"


def _comb(n: int, k: int) -> int:
    from math import comb

    return comb(n, k)


def lp(p: float, dim: int, weights: Sequence[float] | None = None) -> Norm:
    if np.isinf(p):
        return Norm("sup", dim, weights=weights)
    return Norm("lp", dim, p=p, weights=weights)


def euclidean(dim: int) -> Norm:
    return Norm("euclidean", dim)


def sup(dim: int, weights: Sequence[float] | None = None) -> Norm:
    return Norm("sup", dim, weights=weights)


def polyhedral(functionals: Any) -> Norm:
    F = np.asarray(functionals, dtype=float)
    return Norm("polyhedral", F.shape[1], functionals=F)


def norm_eval(N: Norm, x: Any) -> Any:
    return N(x)


def dual_norm_eval(N: Norm, xd: Any) -> Any:
    """Evaluate the dual norm of ``N`` at ``xd``."""
    return N.dual()(xd)


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """A matrix ``T: (R^n, domain) -> (R^m, codomain)`` acting as ``x -> M x``."""

    matrix: np.ndarray
    domain: Norm
    codomain: Norm

    def __post_init__(self) -> None:
        M = np.array(self.matrix, dtype=float)
        if M.ndim != 2:
            raise NormError("operator matrix must be two-dimensional")
        if M.shape != (self.codomain.dim, self.domain.dim):
            raise NormError(
                f"matrix shape {M.shape} does not match codomain/domain dims "
                f"({self.codomain.dim}, {self.domain.dim})"
            )
        if not np.all(np.isfinite(M)):
            raise NormError("operator matrix must be finite")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    def __call__(self, x: Any) -> np.ndarray:
        v = _as_real(x)
        if v.shape[-1:] != (self.domain.dim,):
            raise NormError(f"expected trailing dimension {self.domain.dim}, got shape {v.shape}")
        return v @ self.matrix.T

    @property
    def is_identity(self) -> bool:
        M = self.matrix
        return M.shape[0] == M.shape[1] and np.array_equal(M, np.eye(M.shape[0]))

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "domain": self.domain.to_dict(),
            "codomain": self.codomain.to_dict(),
        }

    @classmethod
    def from_dict(cls, spec: dict, space: Norm | None = None) -> "LinearOperator":
        domain = Norm.from_dict(spec["domain"]) if "domain" in spec else space
        codomain = Norm.from_dict(spec["codomain"]) if "codomain" in spec else domain
        if domain is None or codomain is None:
            raise NormError("operator spec needs a domain (or a top-level space)")
        if "matrix" not in spec:
            if domain.dim != codomain.dim:
                raise NormError("operator without matrix needs equal domain/codomain dimensions")
            return cls(np.eye(domain.dim), domain, codomain)
        return cls(np.asarray(spec["matrix"], dtype=float), domain, codomain)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, LinearOperator)
            and self.domain == other.domain
            and self.codomain == other.codomain
            and np.array_equal(self.matrix, other.matrix)
        )

    def __hash__(self) -> int:
        return hash((self.domain, self.codomain, self.matrix.tobytes()))


def identity(N: Norm) -> LinearOperator:
    return LinearOperator(np.eye(N.dim), N, N)


def adjoint(T: LinearOperator) -> LinearOperator:
    """``T'``: transposed matrix from the dual of the codomain to the dual of the domain."""
    return LinearOperator(T.matrix.T.copy(), T.codomain.dual(), T.domain.dual())


def operator_norm(T: LinearOperator, budget: int = 2000, seed: int = 0, workers: int = 1):
    """Lower bound for ``||T||`` by multi-start search of ``||Tx|| / ||x||``."""
    from .search import ConstantEstimate, maximize_ratio

    if budget < 1:
        raise ValueError("budget must be >= 1")
    n = T.domain.dim
    M = T.matrix

    def evaluate(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return T.codomain(Z @ M.T), T.domain(Z)

    starts = np.vstack([np.eye(n), _sign_vectors(n)])
    res = maximize_ratio(evaluate, n, budget=budget, seed=seed, starts=starts, workers=workers)
    return ConstantEstimate(
        kind="operator_norm",
        exponent=None,
        lower_bound=res.ratio,
        witness={"x": res.z.tolist()},
        seed=seed,
        evaluations=res.evaluations,
    )


def _sign_vectors(n: int, limit: int = 64) -> np.ndarray:
    out = []
    for signs in itertools.product((1.0, -1.0), repeat=n):
        if signs[0] < 0:
            continue
        out.append(signs)
        if len(out) >= limit:
            break
    return np.array(out, dtype=float)
