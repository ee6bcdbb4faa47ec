"""Duality between smoothness/type of T and convexity/cotype of its adjoint.

Covers the algebra behind the passage from T to T': extraction of dual
differences from a norming function, the pairing split across martingale
levels, the lambda balance, and a numerical comparison of constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dyadic
from .dyadic import StepFunction
from .martingale import DifferenceSequence, MartingaleError, to_step
from .moduli import DefectReport, best_constant, check_type_exponent
from .search import ConstantEstimate
from .spaces import LinearOperator, adjoint, dual_index


class DualityError(ValueError):
    pass


@dataclass(frozen=True)
class DualityReport:
    primal: ConstantEstimate
    dual: ConstantEstimate
    relative_gap: float
    p: float

    def to_dict(self) -> dict:
        return {"p": self.p, "p_dual": dual_index(self.p), "primal": self.primal.to_dict(),
                "dual": self.dual.to_dict(), "relative_gap": self.relative_gap}


def extract_dual_differences(g: StepFunction, n: int) -> DifferenceSequence:
    """e_0 = E(g | F_0) and e_k = E(g | F_k) - E(g | F_{k-1}) for k = 1..n."""
    if g.depth > n:
        raise dyadic.DyadicError(f"g has depth {g.depth} > {n}")
    g = dyadic.refine(g, n)
    means = [dyadic.cond_expect(g, k).values for k in range(n + 1)]
    # left child of each level-(k-1) block minus the block's mean
    levels = tuple(means[k][0::2] - means[k - 1] for k in range(1, n + 1))
    return DifferenceSequence(levels, g.space_dim, means[0][0])


def pairing_split_check(y, Td: DifferenceSequence, g: StepFunction) -> DefectReport:
    """<y + sum T d_k, g> against <y, e_0> + sum <T d_k, e_k>."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if Td.initial is not None:
        raise MartingaleError("the image sequence carries no initial term; y plays d_0")
    if y.size != Td.dim or g.space_dim != Td.dim:
        raise MartingaleError("dimension mismatch between y, the sequence and g")
    n = max(Td.depth, g.depth)
    seq = Td.padded(n)
    f = to_step(seq.with_initial(y), n, g.space, partial=True)
    lhs = dyadic.pairing(f, g)
    e = extract_dual_differences(g, n)
    rhs = float(y @ e.initial)
    for k in range(1, n + 1):
        rhs += dyadic.pairing(to_step(seq, k, g.space), to_step(e, k, g.space))
    return DefectReport(abs(lhs - rhs), lhs, rhs, abs(lhs - rhs), None, None, {"depth": n})


def balance_lambda(a: float, t: float, c: float, p: float) -> float:
    """lambda = c a^(p'-1) / (t^p' - a^p')^(1/p).

    With the root 1/p the two sides of the balance agree for every p; the
    root 1/p' only makes them agree at p = 2.
    """
    pd = dual_index(p)
    return c * a ** (pd - 1) / (t**pd - a**pd) ** (1 / p)


def lambda_balance_check(y_norm: float, total_norm: float, c: float, p: float) -> DefectReport:
    """t (c^p + lambda^p)^(1/p) against c (t^p' - a^p')^(1/p') + lambda a, with a = ||y'||, t = total."""
    check_type_exponent(p)
    if not 1 < p <= 2:
        raise DualityError(f"need 1 < p <= 2, got {p}")
    a, t = float(y_norm), float(total_norm)
    if not (a > 0 and t > a):
        raise DualityError(f"need total_norm > y_norm > 0, got {t} and {a}")
    if not c > 0:
        raise DualityError(f"constant must be positive, got {c}")
    pd = dual_index(p)
    lam = balance_lambda(a, t, c, p)
    lhs = t * (c**p + lam**p) ** (1 / p)
    rhs = c * (t**pd - a**pd) ** (1 / pd) + lam * a
    gap = abs(lhs - rhs)
    return DefectReport(gap, lhs, rhs, gap, p, c, {"lambda": lam})


def duality_experiment(T: LinearOperator, p: float, budget: int = 10_000, seed: int = 0,
                       workers: int = 1) -> DualityReport:
    """Smoothness constant of T (exponent p) against convexity constant of T' (exponent p')."""
    check_type_exponent(p)
    if not 1 < p <= 2:
        raise DualityError(f"need 1 < p <= 2, got {p}")
    Td = adjoint(T)
    primal = best_constant("smooth", T, p, budget=budget, seed=seed, workers=workers)
    dual = best_constant("convex", Td, dual_index(p), budget=budget, seed=seed, workers=workers)
    a, b = primal.lower_bound, dual.lower_bound
    gap = abs(a - b) / max(a, b) if max(a, b) > 0 else 0.0
    return DualityReport(primal, dual, float(gap), p)
