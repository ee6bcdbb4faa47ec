"""Renorming functionals at truncated martingale depth.

Two brace functionals are computed by search over difference sequences of
depth at most N:

* ``cotype_inf``: {x}_N = inf (||x + sum d_k||_q^q - c^-q sum ||T d_k||_q^q)^(1/q)
* ``type_sup``:   {x}_N = sup (||Tx + sum T d_k||_p^p - c^p sum ||d_k||_p^p)^(1/p)

Every value is a truncation at the reported depth. Searches run in the unit
sphere of the domain norm (both functionals are positively homogeneous), one
independent trajectory per input row, so a value never depends on the batch
it was computed in.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dyadic
from .martingale import DifferenceSequence, batch_leaves, glue, split_levels
from .moduli import DefectReport, check_cotype_exponent, check_type_exponent
from .search import polish_rows
from .spaces import LinearOperator

DIRECTIONS = ("cotype_inf", "type_sup")
VIOLATION_TOL = 1e-9
# floats held by one block of the random stage
_BLOCK_FLOATS = 4_000_000
CACHE_LIMIT = 200_000
MAX_DECOMPOSITION_LEVEL = 3


class RenormError(ValueError):
    pass


class CertificateViolation(RenormError):
    """A candidate sequence beats the bound a valid certificate constant forces."""

    def __init__(self, message: str, x: np.ndarray, depth: int, value: float,
                 witness: DifferenceSequence):
        super().__init__(message)
        self.x = x
        self.depth = depth
        self.value = value
        self.witness = witness

    def to_dict(self) -> dict:
        return {"message": str(self), "x": self.x.tolist(), "depth": self.depth,
                "value": self.value, "witness": self.witness.to_dict()}


class HomogeneityError(RenormError):
    pass


class DecompositionError(RenormError):
    pass


@dataclass(frozen=True)
class BraceResult:
    """Truncations at depths 0..N per row, with the depth-N witnesses."""

    values: np.ndarray
    witnesses: list

    @property
    def depth(self) -> int:
        return self.values.shape[1] - 1

    @property
    def last(self) -> np.ndarray:
        return self.values[:, -1]


@dataclass(frozen=True, eq=False)
class BraceFunctional:
    direction: str
    T: LinearOperator
    exponent: float
    c: float
    depth_cap: int = 5
    budget: int = 256
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.direction not in DIRECTIONS:
            raise RenormError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.direction == "cotype_inf":
            check_cotype_exponent(self.exponent)
        else:
            check_type_exponent(self.exponent)
        if not self.c > 0:
            raise RenormError(f"certificate constant must be positive, got {self.c}")
        if not 0 <= self.depth_cap <= dyadic.DEPTH_CAP:
            raise RenormError(f"depth cap must lie in 0..{dyadic.DEPTH_CAP}")
        if self.budget < 1:
            raise RenormError("budget must be positive")

    @property
    def cotype(self) -> bool:
        return self.direction == "cotype_inf"

    @property
    def dim(self) -> int:
        return self.T.domain.dim

    def to_dict(self) -> dict:
        return {"direction": self.direction, "operator": self.T.to_dict(),
                "exponent": self.exponent, "c": self.c, "depth_cap": self.depth_cap,
                "budget": self.budget, "seed": self.seed}

    # -- objective --------------------------------------------------------

    def _objective(self, depth: int):
        """Minimized objective in normalized coordinates: Phi, or -Psi for type."""
        X, Y, M = self.T.domain, self.T.codomain, self.T.matrix
        r, c, m = self.exponent, self.c, self.dim

        def apply(v):
            return v if self.T.is_identity else v @ M.T

        def f(H: np.ndarray, Z: np.ndarray) -> np.ndarray:
            R, K, D = Z.shape
            flat = Z.reshape(R * K, D)
            heads = np.repeat(H, K, axis=0)
            levels = split_levels(flat, depth, m)
            if self.cotype:
                leaves = batch_leaves(heads, levels)
                val = np.mean(X.power(leaves, r), axis=1)
                for v in levels:
                    val = val - c ** -r * np.mean(Y.power(apply(v), r), axis=1)
            else:
                leaves = batch_leaves(apply(heads), [apply(v) for v in levels])
                val = np.mean(Y.power(leaves, r), axis=1)
                for v in levels:
                    val = val - c**r * np.mean(X.power(v, r), axis=1)
                val = -val
            return val.reshape(R, K)

        return f

    def _random(self, depth: int, D: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, depth, D])
        Z = rng.uniform(-1.0, 1.0, (self.budget, D))
        return Z * 2.0 ** rng.uniform(-4.0, 0.0, (self.budget, 1))

    def _to_brace(self, v: np.ndarray) -> np.ndarray:
        v = v if self.cotype else -v
        return np.maximum(v, 0.0) ** (1.0 / self.exponent)

    def _violated(self, v: np.ndarray) -> np.ndarray:
        if self.cotype:
            return v < -VIOLATION_TOL
        return -v > (self.c + VIOLATION_TOL) ** self.exponent

    def _raise(self, Xn, s, rows, Z, v, depth) -> None:
        i = int(rows[0])
        seq = DifferenceSequence.from_flat(s[i] * Z[i], depth, self.dim)
        if self.cotype:
            msg = (f"cotype certificate c={self.c} violated: bracket {v[i] * s[i] ** self.exponent:.6g}"
                   f" < 0 at depth {depth}")
            value = float(v[i] * s[i] ** self.exponent)
        else:
            value = float(s[i] * self._to_brace(v[i:i + 1])[0])
            msg = (f"type certificate c={self.c} violated: objective {value:.6g} exceeds "
                   f"c*||x|| = {self.c * s[i]:.6g} at depth {depth}")
        raise CertificateViolation(msg, s[i] * Xn[i], depth, value, seq)

    # -- search ------------------------------------------------------------

    def _search(self, Xn: np.ndarray, s: np.ndarray, N: int, hints: dict) -> tuple[np.ndarray, np.ndarray]:
        """Depth-by-depth minimization for unit rows ``Xn``; returns (values, Z at depth N)."""
        B, m = Xn.shape
        vals = np.empty((B, N + 1))
        M = self.T.matrix
        if self.cotype:
            v0 = self.T.domain(Xn) ** self.exponent
        else:
            v0 = -self.T.codomain(Xn @ M.T) ** self.exponent
        bad = np.flatnonzero(self._violated(v0))
        if bad.size:
            self._raise(Xn, s, bad, np.zeros((B, 0)), v0, 0)
        vals[:, 0] = v0
        prev = np.zeros((B, 0))
        for k in range(1, N + 1):
            D = m * (2**k - 1)
            f = self._objective(k)
            starts = [np.concatenate([prev, np.zeros((B, m * 2 ** (k - 1)))], axis=1)]
            if k in hints:
                starts.append(np.asarray(hints[k], dtype=float).reshape(B, D))
            S = np.stack(starts, axis=1)
            sv = f(Xn, S)
            si = np.argmin(sv, axis=1)
            z_start = S[np.arange(B), si]
            v_start = sv[np.arange(B), si]
            R = self._random(k, D)
            z_rand, v_rand = self._best_random(f, Xn, R, k)
            Z0 = np.vstack([z_start, z_rand])
            V0 = np.concatenate([v_start, v_rand])
            H2 = np.vstack([Xn, Xn])
            Zp, Vp = self._tree_polish(H2, Z0, V0, k)
            take = Vp[B:] < Vp[:B]
            prev = np.where(take[:, None], Zp[B:], Zp[:B])
            vk = np.where(take, Vp[B:], Vp[:B])
            bad = np.flatnonzero(self._violated(vk))
            if bad.size:
                self._raise(Xn, s, bad, prev, vk, k)
            vals[:, k] = vk
        return vals, prev

    def _tree_polish(self, H: np.ndarray, Z0: np.ndarray, v0: np.ndarray, depth: int, *,
                     step: float = 0.25, min_step: float = 1e-7, max_iter: int = 400
                     ) -> tuple[np.ndarray, np.ndarray]:
        """Per-row coordinate polish of the objective, one trajectory per row.

        Moving one coordinate of a level-j vector shifts only the leaves below
        that node, so all 2D candidate values come from per-leaf increments
        summed over subtree blocks. A move is kept only if the exact objective
        improves.
        """
        f = self._objective(depth)
        X, Y, M = self.T.domain, self.T.codomain, self.T.matrix
        r, c, m = self.exponent, self.c, self.dim
        if self.cotype:
            leaf_norm, level_norm, sgn, w = X, Y, 1.0, -(c ** -r)
            leaf_dir, level_dir = np.eye(m), M.T
        else:
            leaf_norm, level_norm, sgn, w = Y, X, -1.0, -(c**r)
            leaf_dir, level_dir = M.T, np.eye(m)

        def to_leaf(v):
            return v if (self.cotype or self.T.is_identity) else v @ M.T

        def to_level(v):
            return v @ M.T if (self.cotype and not self.T.is_identity) else v

        Z = np.array(Z0, dtype=float)
        v = np.array(v0, dtype=float)
        B, D = Z.shape
        steps = np.full(B, float(step))
        n_leaves = 2**depth
        for _ in range(max_iter):
            act = np.flatnonzero(steps > min_step)
            if act.size == 0:
                break
            R = act.size
            d = steps[act][:, None, None, None]
            levels = split_levels(Z[act], depth, m)
            L = batch_leaves(to_leaf(H[act]), [to_leaf(u) for u in levels])
            base = leaf_norm.power(L, r)[..., None]
            gp = leaf_norm.power(L[:, :, None, :] + d * leaf_dir, r) - base
            gm = leaf_norm.power(L[:, :, None, :] - d * leaf_dir, r) - base
            plus, minus = [], []
            for j, u in enumerate(levels, start=1):
                nodes = 2 ** (j - 1)
                Sp = gp.reshape(R, nodes, 2, -1, m).sum(axis=3)
                Sm = gm.reshape(R, nodes, 2, -1, m).sum(axis=3)
                V = to_level(u)
                vb = level_norm.power(V, r)[..., None]
                hp = level_norm.power(V[:, :, None, :] + d * level_dir, r) - vb
                hm = level_norm.power(V[:, :, None, :] - d * level_dir, r) - vb
                plus.append(sgn * ((Sp[:, :, 0] + Sm[:, :, 1]) / n_leaves + w * hp / nodes))
                minus.append(sgn * ((Sm[:, :, 0] + Sp[:, :, 1]) / n_leaves + w * hm / nodes))
            delta = np.concatenate([a.reshape(R, -1) for a in plus + minus], axis=1)
            j = np.argmin(delta, axis=1)
            thr = 1e-15 * np.maximum(np.abs(v[act]), 1.0)
            hope = delta[np.arange(R), j] < -thr
            moved = np.zeros(R, dtype=bool)
            if np.any(hope):
                rows = act[hope]
                jj = j[hope]
                Zn = Z[rows].copy()
                Zn[np.arange(rows.size), jj % D] += np.where(jj < D, 1.0, -1.0) * steps[rows]
                exact = f(H[rows], Zn[:, None, :])[:, 0]
                good = exact < v[rows] - thr[hope]
                Z[rows[good]] = Zn[good]
                v[rows[good]] = exact[good]
                moved[np.flatnonzero(hope)[good]] = True
            steps[act[~moved]] *= 0.5
        return Z, v

    def _best_random(self, f, Xn, R, depth):
        B = Xn.shape[0]
        K, D = R.shape
        per_row = K * 2**depth * self.dim * 2
        block = max(1, _BLOCK_FLOATS // per_row)
        z = np.empty((B, D))
        v = np.empty(B)
        for a in range(0, B, block):
            H = Xn[a:a + block]
            vals = f(H, np.broadcast_to(R, (H.shape[0], K, D)))
            j = np.argmin(vals, axis=1)
            z[a:a + block] = R[j]
            v[a:a + block] = vals[np.arange(H.shape[0]), j]
        return z, v

    def evaluate(self, X, N: int, hints: dict | None = None) -> BraceResult:
        """Braces of every row of ``X`` at depths 0..N, with depth-N witnesses.

        ``hints`` maps a depth to extra starting sequences (one flat vector per
        row, in the original scale). Raises :class:`CertificateViolation` when
        a candidate breaks the bound a valid constant forces.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise RenormError(f"points must have dimension {self.dim}, got {X.shape[1]}")
        if not 0 <= N <= self.depth_cap:
            raise RenormError(f"depth {N} outside 0..{self.depth_cap}")
        B, m = X.shape
        s = self.T.domain(X)
        nz = s > 0
        Xn = np.zeros_like(X)
        Xn[nz] = X[nz] / s[nz, None]
        vals = np.zeros((B, N + 1))
        Zs = np.zeros((B, m * (2**N - 1)))
        todo = np.flatnonzero(nz)
        if hints:
            hints_n = {k: np.asarray(h, dtype=float).reshape(B, -1)[todo] / s[todo, None]
                       for k, h in hints.items()}
            v, Z = self._search(Xn[todo], s[todo], N, hints_n)
            vals[todo], Zs[todo] = v, Z
        else:
            keys = [(Xn[i].tobytes(), N) for i in todo]
            first = {}
            for i, key in zip(todo, keys):
                if key not in self._cache:
                    first.setdefault(key, i)
            missing = list(first)
            if missing:
                rows = np.array(list(first.values()))
                v, Z = self._search(Xn[rows], s[rows], N, {})
                if len(self._cache) + len(missing) > CACHE_LIMIT:
                    self._cache.clear()
                for j, key in enumerate(missing):
                    self._cache[key] = (v[j], Z[j])
            for i, key in zip(todo, keys):
                vals[i], Zs[i] = self._cache[key]
        braces = np.zeros((B, N + 1))
        braces[todo] = s[todo, None] * self._to_brace(vals[todo])
        wits = [DifferenceSequence.from_flat(s[i] * Zs[i], N, m) for i in range(B)]
        return BraceResult(braces, wits)

    def __call__(self, X, N: int) -> np.ndarray | float:
        X = np.asarray(X, dtype=float)
        out = self.evaluate(X, N).last
        return float(out[0]) if X.ndim == 1 else out

    def objective(self, x, seq: DifferenceSequence) -> float:
        """The bracket raised to 1/r at one explicit sequence (negative brackets give -|.|^(1/r))."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        f = self._objective(seq.depth)
        v = float(f(x, seq.flat()[None, None, :])[0, 0])
        v = v if self.cotype else -v
        return float(np.sign(v) * abs(v) ** (1.0 / self.exponent))


def _require(F: BraceFunctional, direction: str) -> None:
    if F.direction != direction:
        raise RenormError(f"expected a {direction} functional, got {F.direction}")


def brace_cotype(F: BraceFunctional, x, N: int) -> float:
    _require(F, "cotype_inf")
    return float(F.evaluate(np.asarray(x, dtype=float).reshape(1, -1), N).last[0])


def brace_type(F: BraceFunctional, x, N: int) -> float:
    _require(F, "type_sup")
    return float(F.evaluate(np.asarray(x, dtype=float).reshape(1, -1), N).last[0])


def brace_table(F: BraceFunctional, x, N: int) -> tuple[np.ndarray, DifferenceSequence]:
    """{x}_0..{x}_N for one point, with the depth-N witness."""
    res = F.evaluate(np.asarray(x, dtype=float).reshape(1, -1), N)
    return res.values[0], res.witnesses[0]


# -- midpoint inequalities ----------------------------------------------------


def midpoint_arrays(F: BraceFunctional, Xp, Xm, N: int) -> dict:
    """Both sides of the cross-depth midpoint inequality for rows of pairs.

    The depth-N witnesses of x_+ and x_- are glued into a depth-(N+1)
    candidate for the midpoint, which seeds its search.
    """
    if N + 1 > F.depth_cap:
        raise RenormError(f"depth {N + 1} exceeds the functional's cap {F.depth_cap}")
    Xp = np.atleast_2d(np.asarray(Xp, dtype=float))
    Xm = np.atleast_2d(np.asarray(Xm, dtype=float))
    if Xp.shape != Xm.shape:
        raise RenormError("x_plus and x_minus must have the same shape")
    rp, rm = F.evaluate(Xp, N), F.evaluate(Xm, N)
    mid = (Xp + Xm) / 2
    glued = np.stack([glue(a, b, xp, xm).flat()
                      for a, b, xp, xm in zip(rp.witnesses, rm.witnesses, Xp, Xm)])
    rmid = F.evaluate(mid, N + 1, hints={N + 1: glued})
    r, c = F.exponent, F.c
    half = (Xp - Xm) / 2
    lhs = rmid.last**r
    avg = (rp.last**r + rm.last**r) / 2
    if F.cotype:
        rhs = avg - c**-r * F.T.codomain(half @ F.T.matrix.T) ** r
        value = lhs - rhs
    else:
        rhs = avg - c**r * F.T.domain(half) ** r
        value = rhs - lhs
    return {"value": value, "lhs": lhs, "rhs": rhs, "mid": rmid, "plus": rp, "minus": rm,
            "glued": glued}


def _midpoint_report(F, x_plus, x_minus, N, direction) -> DefectReport:
    _require(F, direction)
    out = midpoint_arrays(F, x_plus, x_minus, N)
    return DefectReport(float(out["value"][0]), float(out["lhs"][0]), float(out["rhs"][0]),
                        float(out["value"][0]), F.exponent, F.c,
                        {"depth": N, "x_plus": np.asarray(x_plus, dtype=float).reshape(-1),
                         "x_minus": np.asarray(x_minus, dtype=float).reshape(-1),
                         "glued": DifferenceSequence.from_flat(out["glued"][0], N + 1, F.dim)})


def midpoint_cotype_check(F: BraceFunctional, x_plus, x_minus, N: int) -> DefectReport:
    """{mid}_{N+1}^q <= ({x+}_N^q + {x-}_N^q)/2 - c^-q ||T(x+ - x-)/2||^q."""
    return _midpoint_report(F, x_plus, x_minus, N, "cotype_inf")


def midpoint_type_check(F: BraceFunctional, x_plus, x_minus, N: int) -> DefectReport:
    """{mid}_{N+1}^p >= ({x+}_N^p + {x-}_N^p)/2 - c^p ||(x+ - x-)/2||^p."""
    return _midpoint_report(F, x_plus, x_minus, N, "type_sup")


# -- equivalent norms -----------------------------------------------------------


def equivalent_norm_cotype(F: BraceFunctional, x, N: int) -> np.ndarray | float:
    """(||x||^q + {x}_N^q)^(1/q); vectorized over rows."""
    _require(F, "cotype_inf")
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    q = F.exponent
    out = (F.T.domain(X) ** q + F.evaluate(X, N).last ** q) ** (1 / q)
    return float(out[0]) if x.ndim == 1 else out


@dataclass(frozen=True)
class Decomposition:
    """y = mean(ys) together with the paired points xs."""

    ys: np.ndarray
    xs: np.ndarray

    def __post_init__(self) -> None:
        ys = np.atleast_2d(np.asarray(self.ys, dtype=float))
        xs = np.atleast_2d(np.asarray(self.xs, dtype=float))
        k = ys.shape[0]
        if k != xs.shape[0] or k & (k - 1):
            raise DecompositionError(f"need 2^n pairs, got {ys.shape[0]} and {xs.shape[0]}")
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "xs", xs)

    @property
    def n(self) -> int:
        return self.ys.shape[0].bit_length() - 1

    @property
    def target(self) -> np.ndarray:
        return self.ys.mean(axis=0)

    def duplicated(self, reps: int = 1) -> "Decomposition":
        return Decomposition(np.tile(self.ys, (2**reps, 1)), np.tile(self.xs, (2**reps, 1)))

    def scaled(self, t: float) -> "Decomposition":
        return Decomposition(t * self.ys, t * self.xs)

    def to_dict(self) -> dict:
        return {"ys": self.ys.tolist(), "xs": self.xs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Decomposition":
        return cls(np.asarray(d["ys"], dtype=float), np.asarray(d["xs"], dtype=float))


def check_decomposition(D: Decomposition, y, tol: float = 1e-12) -> None:
    y = np.asarray(y, dtype=float).reshape(-1)
    err = np.max(np.abs(D.target - y), initial=0.0)
    if err > tol * max(1.0, float(np.max(np.abs(y), initial=0.0))):
        raise DecompositionError(f"decomposition mean misses y by {err:.3g}")


def decomposition_objective(F: BraceFunctional, D: Decomposition, N: int) -> float:
    """(mean(||y_k - T x_k||^p + {x_k}_N^p))^(1/p)."""
    _require(F, "type_sup")
    p = F.exponent
    resid = F.T.codomain(D.ys - D.xs @ F.T.matrix.T)
    b = F.evaluate(D.xs, N).last
    return float(np.mean(resid**p + b**p) ** (1 / p))


def type_norm_search(F: BraceFunctional, Ys, N: int, N_dec: int = 1,
                     budget: int = 200) -> tuple[np.ndarray, list]:
    """Decomposition norm of every row of ``Ys`` with its best decomposition.

    Sizes 2^n for n = 0..N_dec are searched in turn; each size starts from the
    previous optimum duplicated (same objective) and from n = 0, x = 0.
    """
    _require(F, "type_sup")
    if not 0 <= N_dec <= MAX_DECOMPOSITION_LEVEL:
        raise RenormError(f"decomposition level must lie in 0..{MAX_DECOMPOSITION_LEVEL}")
    Ys = np.atleast_2d(np.asarray(Ys, dtype=float))
    B, mY = Ys.shape
    if mY != F.T.codomain.dim:
        raise RenormError(f"points must have dimension {F.T.codomain.dim}")
    mX, M, p = F.dim, F.T.matrix, F.exponent
    Y = F.T.codomain
    s = Y(Ys)
    nz = np.flatnonzero(s > 0)
    Yn = Ys[nz] / s[nz, None]
    values = np.zeros(B)
    decs = [Decomposition(Ys[i:i + 1], np.zeros((1, mX))) for i in range(B)]
    if nz.size == 0:
        return values, decs
    pinv = np.linalg.pinv(M)

    best_z = None
    best_v = None
    for n in range(N_dec + 1):
        K2 = 2**n
        Du = K2 * mY

        def split(C, K2=K2, Du=Du):
            u = C[..., :Du].reshape(C.shape[:-1] + (K2, mY))
            u = u - u.mean(axis=-2, keepdims=True)
            xs = C[..., Du:].reshape(C.shape[:-1] + (K2, mX))
            return u, xs

        def project(C, K2=K2, Du=Du):
            u, xs = split(C)
            return np.concatenate([u.reshape(C.shape[:-1] + (Du,)), C[..., Du:]], axis=-1)

        def obj(rows, C, split=split):
            u, xs = split(C)
            ys = Yn[rows][:, None, None, :] + u
            resid = Y(ys - xs @ M.T)
            b = F.evaluate(xs.reshape(-1, mX), N).last.reshape(resid.shape)
            return np.mean(resid**p + b**p, axis=-1)

        R = nz.size
        starts = [np.zeros((R, Du + K2 * mX))]
        if n == 0:
            half = Yn @ pinv.T / 2
            starts.append(np.concatenate([np.zeros((R, Du)), half], axis=1))
            starts.append(np.concatenate([np.zeros((R, Du)), 2 * half], axis=1))
        else:
            u_prev, x_prev = best_z[:, :Du // 2], best_z[:, Du // 2:]
            starts.append(np.concatenate([np.tile(u_prev, 2), np.tile(x_prev, 2)], axis=1))
        S = np.stack(starts, axis=1)
        sv = obj(np.arange(R), S)
        si = np.argmin(sv, axis=1)
        z0, v0 = S[np.arange(R), si], sv[np.arange(R), si]
        best_z, best_v = polish_rows(obj, z0, v0, min_step=1e-6, max_iter=budget, project=project)
    for j, i in enumerate(nz):
        u, xs = split(best_z[j])
        decs[i] = Decomposition(s[i] * (Yn[j] + u), s[i] * xs)
        values[i] = s[i] * best_v[j] ** (1 / p)
    lower = 2 ** (1 / p - 1) * s
    if np.any(values < lower * (1 - 1e-9)) or np.any(values > s * (1 + 1e-12)):
        raise RenormError("decomposition norm left its forced bounds")
    return values, decs


def equivalent_norm_type(F: BraceFunctional, y, N: int, N_dec: int = 1,
                         budget: int = 200) -> float:
    values, _ = type_norm_search(F, np.asarray(y, dtype=float).reshape(1, -1), N, N_dec, budget)
    return float(values[0])


def smoothness_step_check(F: BraceFunctional, y, x, D: Decomposition, N: int) -> DefectReport:
    """Shift a decomposition of y by (Tx, x) both ways and compare with depth N+1.

    (obj_+^p + obj_-^p)/2 <= obj_{N+1}(D)^p + c^p ||x||^p, where obj_+- use depth N.
    """
    _require(F, "type_sup")
    check_decomposition(D, y)
    x = np.asarray(x, dtype=float).reshape(-1)
    p, c = F.exponent, F.c
    out = midpoint_arrays(F, D.xs + x, D.xs - x, N)
    resid = F.T.codomain(D.ys - D.xs @ F.T.matrix.T) ** p
    lhs = float(np.mean(resid + (out["plus"].last ** p + out["minus"].last ** p) / 2))
    rhs = float(np.mean(resid + out["lhs"]) + c**p * F.T.domain(x) ** p)
    return DefectReport(lhs - rhs, lhs, rhs, lhs - rhs, p, c,
                        {"depth": N, "y": np.asarray(y, dtype=float).reshape(-1), "x": x,
                         "decomposition": D.to_dict()})


def padding_identity_check(F: BraceFunctional, D: Decomposition, reps: int = 1, N: int = 1) -> DefectReport:
    """Duplicating every pair leaves the objective unchanged."""
    a = decomposition_objective(F, D, N)
    b = decomposition_objective(F, D.duplicated(reps), N)
    return DefectReport(abs(a - b), b, a, abs(a - b), F.exponent, F.c, {"reps": reps, "depth": N})


def type_norm_midpoint_check(F: BraceFunctional, y_plus, y_minus, N: int, N_dec: int = 1,
                             budget: int = 200) -> DefectReport:
    """|||(y+ + y-)/2|||^p <= (|||y+|||^p + |||y-|||^p)/2 via the combined decomposition."""
    p = F.exponent
    Ys = np.vstack([np.asarray(y_plus, dtype=float).reshape(1, -1),
                    np.asarray(y_minus, dtype=float).reshape(1, -1)])
    vals, (Dp, Dm) = type_norm_search(F, Ys, N, N_dec, budget)
    n = max(Dp.n, Dm.n)
    Dp, Dm = Dp.duplicated(n - Dp.n), Dm.duplicated(n - Dm.n)
    comb = Decomposition(np.vstack([Dp.ys, Dm.ys]), np.vstack([Dp.xs, Dm.xs]))
    lhs = decomposition_objective(F, comb, N) ** p
    rhs = float((vals[0] ** p + vals[1] ** p) / 2)
    return DefectReport(lhs - rhs, lhs, rhs, lhs - rhs, p, F.c,
                        {"depth": N, "combined": comb.to_dict()})


# -- midpoint-to-triangle certificate -------------------------------------------


@dataclass(frozen=True)
class GluedBraces:
    """Cotype braces at depth N whose chain midpoints are certified by gluing.

    Evaluating the functional returns {x}_N. Inside the dyadic chain each
    midpoint inherits the glue of its neighbours' witnesses, one level deeper,
    so chain values are explicit brackets at depth N + j rather than searches.
    """

    F: BraceFunctional
    N: int

    def __post_init__(self) -> None:
        _require(self.F, "cotype_inf")

    def __call__(self, P) -> np.ndarray:
        return self.F.evaluate(np.atleast_2d(P), self.N).last

    def chain(self, u, v, seq_u: DifferenceSequence, seq_v: DifferenceSequence,
              m: int) -> tuple[np.ndarray, np.ndarray, list]:
        """Points at lambda = k/2^m (from v to u), their brackets^(1/q), and sequences."""
        if self.N + m > dyadic.DEPTH_CAP:
            raise RenormError(f"chain depth {self.N + m} exceeds the cap {dyadic.DEPTH_CAP}")
        pts = [np.asarray(v, dtype=float), np.asarray(u, dtype=float)]
        seqs = [seq_v, seq_u]
        for _ in range(m):
            depth = seqs[0].depth + 1
            new_pts, new_seqs = [pts[0]], [seqs[0].padded(depth)]
            for a, b, sa, sb in zip(pts[:-1], pts[1:], seqs[:-1], seqs[1:]):
                new_pts += [(a + b) / 2, b]
                new_seqs += [glue(sb, sa, b, a), sb.padded(depth)]
            pts, seqs = new_pts, new_seqs
        P = np.vstack(pts)
        f = self.F._objective(seqs[0].depth)
        vals = np.empty(len(seqs))
        for a in range(0, len(seqs), 64):
            Z = np.stack([s.flat() for s in seqs[a:a + 64]])[:, None, :]
            vals[a:a + 64] = f(P[a:a + 64], Z)[:, 0]
        q = self.F.exponent
        return P, np.sign(vals) * np.abs(vals) ** (1 / q), seqs

    def bracket_root(self, x, seq: DifferenceSequence) -> float:
        return self.F.objective(x, seq)


def _batch_callback(func):
    def f(P):
        return np.asarray(func(np.atleast_2d(P)), dtype=float).reshape(-1)
    return f


def lemma5_certificate(func, x_plus, x_minus, m: int = 10,
                       homogeneity_tol: float = 1e-9) -> DefectReport:
    """Walk the dyadic chain between normalized x_+ and x_- and test subadditivity.

    ``func`` maps an array of points (rows) to functional values, or is a
    :class:`GluedBraces`. After normalizing both points to value 1, the chain
    points at lambda = k/2^m are built as midpoints of their level-(j-1)
    neighbours; every one must have value at most 1. The final gap is the
    relative excess of the value at x_+ + x_- over func(x_+) + func(x_-).
    """
    f = _batch_callback(func)
    xp = np.asarray(x_plus, dtype=float).reshape(-1)
    xm = np.asarray(x_minus, dtype=float).reshape(-1)
    lams = np.array([0.5, 2.0, 3.0])
    base = f(np.vstack([xp, xm]))
    scaled = f(np.vstack([lams[:, None] * xp, lams[:, None] * xm]))
    expect = np.concatenate([lams * base[0], lams * base[1]])
    err = np.abs(scaled - expect) / np.maximum(1.0, np.abs(expect))
    if np.any(err > homogeneity_tol):
        raise HomogeneityError(f"functional is not positively homogeneous (error {np.max(err):.3g})")
    fp, fm = float(base[0]), float(base[1])
    total = float(f((xp + xm)[None, :])[0])
    if fp <= 0 or fm <= 0:
        # lambda is undefined; only the direct inequality is left
        gap = total - fp - fm
        return DefectReport(gap, total, fp + fm, gap, None, None,
                            {"lambda": None, "chain_gap": None, "subadditivity_gap": gap})
    u, v = xp / fp, xm / fm
    lam = fp / (fp + fm)
    k_lam = int(round(lam * 2**m))
    if isinstance(func, GluedBraces):
        wp = func.F.evaluate(xp[None, :], func.N).witnesses[0].scaled(1 / fp)
        wm = func.F.evaluate(xm[None, :], func.N).witnesses[0].scaled(1 / fm)
        pts, vals, seqs = func.chain(u, v, wp, wm, m)
        # the chain witness nearest lambda, moved onto x_+ + x_- itself
        via_chain = func.bracket_root(xp + xm, seqs[k_lam].scaled(fp + fm))
        total = min(total, via_chain)
    else:
        pts = np.vstack([v, u])
        for _ in range(m):
            new = np.empty((2 * pts.shape[0] - 1, pts.shape[1]))
            new[0::2], new[1::2] = pts, (pts[:-1] + pts[1:]) / 2
            pts = new
        vals = f(pts)
    mid_gap = -np.inf
    for j in range(1, m + 1):
        # odd positions at level j are midpoints of their level-(j-1) neighbours
        step = 2 ** (m - j)
        idx = np.arange(step, 2**m, 2 * step)
        nb = np.maximum(vals[idx - step], vals[idx + step])
        mid_gap = max(mid_gap, float(np.max(vals[idx] - np.maximum(nb, 1.0))))
    chain_gap = float(np.max(vals - 1.0))
    sub_gap = total / (fp + fm) - 1.0
    worst = max(chain_gap, sub_gap)
    return DefectReport(worst, total, fp + fm, sub_gap, None, None,
                        {"lambda": lam, "chain_gap": chain_gap, "midpoint_gap": mid_gap,
                         "subadditivity_gap": sub_gap, "chain_depth": m})
