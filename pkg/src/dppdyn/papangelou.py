"""Papangelou intensities of the determinantal measure.

The conditional intensity of adding a particle at x to configuration xi is
the Schur complement of A(xi,xi) in A(x xi, x xi), equivalently the ratio
det A(x xi) / det A(xi). Three independent computation paths are provided
(Schur complement, determinant ratio, variational least squares) plus an
incremental engine that maintains a Cholesky factorization of A(xi,xi)
across single-site updates for O(|xi|^2) queries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .backend import get_backend
from .errors import (
    BoundViolatedError,
    EnumerationTooLargeError,
    IdenticalSitesError,
    NumericallySingularError,
    SiteEmptyError,
    SiteOccupiedError,
    ValidationError,
)
from .kernel import Kernel

# Schur complements at or below this fraction of the operator norm are
# treated as numerically singular.
SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class Configuration:
    """A subset of sites, the state of the particle system.

    Immutable; with_site / without_site return new configurations and
    reject inserting a present site or removing an absent one. The mask
    property packs occupancy into an integer, bit i = site i.
    """

    n_sites: int
    occupied: frozenset

    def __post_init__(self):
        occ = frozenset(int(s) for s in self.occupied)
        if occ and (min(occ) < 0 or max(occ) >= self.n_sites):
            raise ValidationError(f"occupied sites out of range 0..{self.n_sites - 1}")
        object.__setattr__(self, "occupied", occ)

    @classmethod
    def empty(cls, n_sites: int) -> "Configuration":
        return cls(n_sites, frozenset())

    @classmethod
    def full(cls, n_sites: int) -> "Configuration":
        return cls(n_sites, frozenset(range(n_sites)))

    @classmethod
    def from_sites(cls, n_sites: int, sites) -> "Configuration":
        return cls(n_sites, frozenset(int(s) for s in sites))

    @classmethod
    def from_mask(cls, n_sites: int, mask: int) -> "Configuration":
        return cls(n_sites, frozenset(i for i in range(n_sites) if mask >> i & 1))

    @property
    def mask(self) -> int:
        m = 0
        for s in self.occupied:
            m |= 1 << s
        return m

    @property
    def size(self) -> int:
        return len(self.occupied)

    def __len__(self):
        return len(self.occupied)

    def __contains__(self, site):
        return site in self.occupied

    def __iter__(self):
        return iter(sorted(self.occupied))

    def sites(self) -> list:
        return sorted(self.occupied)

    def free_sites(self) -> list:
        return [i for i in range(self.n_sites) if i not in self.occupied]

    def with_site(self, x: int) -> "Configuration":
        if x in self.occupied:
            raise SiteOccupiedError(f"site {x} already occupied")
        return Configuration(self.n_sites, self.occupied | {x})

    def without_site(self, x: int) -> "Configuration":
        if x not in self.occupied:
            raise SiteEmptyError(f"site {x} not occupied")
        return Configuration(self.n_sites, self.occupied - {x})

    def bitstring(self) -> str:
        return "".join("1" if i in self.occupied else "0" for i in range(self.n_sites))


def _check_free(kernel: Kernel, x: int, xi: Configuration):
    if not 0 <= x < kernel.n_sites:
        raise ValidationError(f"site {x} out of range")
    if xi.n_sites != kernel.n_sites:
        raise ValidationError("configuration size does not match kernel")
    if x in xi:
        raise SiteOccupiedError(f"site {x} is occupied")


def _as_real(value, what="intensity"):
    value = complex(value)
    if abs(value.imag) > 1e-9 * max(1.0, abs(value.real)):
        raise NumericallySingularError(f"{what} has non-negligible imaginary part {value.imag:.3e}")
    return value.real


def alpha(kernel: Kernel, x: int, xi: Configuration) -> float:
    """Intensity of a birth at x given xi, as a Schur complement."""
    _check_free(kernel, x, xi)
    a = kernel.matrix
    sites = xi.sites()
    if not sites:
        return float(a[x, x].real)
    idx = np.asarray(sites, dtype=np.intp)
    try:
        low = np.linalg.cholesky(a[np.ix_(idx, idx)])
    except np.linalg.LinAlgError as exc:
        raise NumericallySingularError(f"A(xi,xi) not factorizable: {exc}") from exc
    w = solve_triangular(low, a[idx, x], lower=True, check_finite=False)
    val = float(a[x, x].real - np.real(np.vdot(w, w)))
    if val <= SINGULAR_RTOL * kernel.op_norm:
        raise NumericallySingularError(f"alpha({x}; xi) = {val:.3e} is numerically singular")
    return val


def beta(kernel: Kernel, x: int, xi: Configuration) -> float:
    """Dual intensity: 1 / alpha."""
    return 1.0 / alpha(kernel, x, xi)


def alpha_det_ratio(kernel: Kernel, x: int, xi: Configuration) -> float:
    """Same quantity as a ratio of principal-minor determinants."""
    _check_free(kernel, x, xi)
    a = kernel.matrix
    sites = xi.sites()
    if not sites:
        return float(a[x, x].real)
    top = sorted(sites + [x])
    s1, l1 = np.linalg.slogdet(kernel.submatrix(top))
    s2, l2 = np.linalg.slogdet(kernel.submatrix(sites))
    return _as_real(s1 / s2) * float(np.exp(l1 - l2))


def alpha_variational(kernel: Kernel, x: int, xi: Configuration) -> float:
    """Best approximation of e_x from span{e_y : y in xi} in the A-norm.

    Solves the normal equations with Gram matrix A(xi,xi) and evaluates the
    residual quadratic form explicitly, making this path independent of the
    Schur-complement code.
    """
    _check_free(kernel, x, xi)
    a = kernel.matrix
    sites = xi.sites()
    v = np.zeros(kernel.n_sites, dtype=a.dtype)
    v[x] = 1.0
    if sites:
        idx = np.asarray(sites, dtype=np.intp)
        coeff = np.linalg.solve(a[np.ix_(idx, idx)], a[idx, x])
        v[idx] -= coeff
    return _as_real(np.vdot(v, a @ v), "variational value")


def beta_variational(kernel: Kernel, x: int, xi: Configuration) -> float:
    """Best approximation of e_x from the complement sites in the A^-1-norm.

    The minimization runs over span{e_y : y outside x xi}; with an empty
    complement it degenerates to (A^-1)(x,x). Duality makes the result the
    reciprocal of alpha.
    """
    _check_free(kernel, x, xi)
    inv = kernel.inverse
    outside = [y for y in range(kernel.n_sites) if y != x and y not in xi]
    v = np.zeros(kernel.n_sites, dtype=inv.dtype)
    v[x] = 1.0
    if outside:
        idx = np.asarray(outside, dtype=np.intp)
        coeff = np.linalg.solve(inv[np.ix_(idx, idx)], inv[idx, x])
        v[idx] -= coeff
    return _as_real(np.vdot(v, inv @ v), "dual variational value")


def _check_pair(kernel: Kernel, x: int, u: int, xi: Configuration):
    if x == u:
        raise IdenticalSitesError(f"sites must differ, got {x} twice")
    _check_free(kernel, x, xi)
    _check_free(kernel, u, xi)


def alpha_difference(kernel: Kernel, x: int, u: int, xi: Configuration) -> float:
    """Drop in alpha(x; xi) caused by adding a particle at u.

    Computed from the squared conditional cross term divided by alpha(u; xi);
    always nonnegative (fermionic repulsion).
    """
    _check_pair(kernel, x, u, xi)
    a = kernel.matrix
    sites = xi.sites()
    cross = a[x, u]
    if sites:
        idx = np.asarray(sites, dtype=np.intp)
        cross = cross - a[x, idx] @ np.linalg.solve(a[np.ix_(idx, idx)], a[idx, u])
    return float(abs(cross) ** 2 / alpha(kernel, u, xi))


def alpha_difference_direct(kernel: Kernel, x: int, u: int, xi: Configuration) -> float:
    """The same difference by direct subtraction of two intensities."""
    _check_pair(kernel, x, u, xi)
    return alpha(kernel, x, xi) - alpha(kernel, x, xi.with_site(u))


def alpha_difference_pair_schur(kernel: Kernel, x: int, u: int, xi: Configuration) -> float:
    """The same difference from the 2x2 conditional kernel of the pair {x,u}.

    S is the Schur complement of A(xi,xi) in A restricted to {x,u} union xi;
    the value is S(x,u) S(u,u)^-1 S(u,x).
    """
    _check_pair(kernel, x, u, xi)
    a = kernel.matrix
    pair = np.asarray([x, u], dtype=np.intp)
    s = a[np.ix_(pair, pair)].astype(np.complex128 if kernel.is_complex else np.float64)
    sites = xi.sites()
    if sites:
        idx = np.asarray(sites, dtype=np.intp)
        s = s - a[np.ix_(pair, idx)] @ np.linalg.solve(a[np.ix_(idx, idx)], a[np.ix_(idx, pair)])
    return _as_real(s[0, 1] * s[1, 0] / s[1, 1], "pair Schur difference")


def alpha_profile(kernel: Kernel, xi: Configuration):
    """From-scratch alpha(y; xi) for every free site y.

    Returns (free_sites, alphas) as arrays; the batch shares one
    factorization of A(xi,xi).
    """
    a = kernel.matrix
    diag = a.diagonal().real
    free = np.asarray(xi.free_sites(), dtype=np.intp)
    sites = xi.sites()
    if not sites or free.size == 0:
        return free, diag[free].copy()
    idx = np.asarray(sites, dtype=np.intp)
    low = np.linalg.cholesky(a[np.ix_(idx, idx)])
    w = solve_triangular(low, a[np.ix_(idx, free)], lower=True, check_finite=False)
    return free, diag[free] - np.einsum("ij,ij->j", w.conj(), w).real


def alpha_table(kernel: Kernel, limit: int = 16) -> np.ndarray:
    """Dense table T[mask, y] = alpha(y; mask) for every configuration.

    NaN marks occupied positions. The leave-one-out intensity of x in xi is
    T[mask & ~bit(x), x], so one table drives every exhaustive check.
    """
    n = kernel.n_sites
    if n > limit:
        raise EnumerationTooLargeError(f"alpha table for {n} sites needs 2^{n} rows")
    a = kernel.matrix
    diag = a.diagonal().real
    table = np.full((1 << n, n), np.nan)
    all_sites = np.arange(n, dtype=np.intp)
    for mask in range(1 << n):
        bits = np.array([mask >> i & 1 for i in range(n)], dtype=bool)
        idx = all_sites[bits]
        free = all_sites[~bits]
        if idx.size == 0:
            table[mask] = diag
            continue
        if free.size == 0:
            continue
        low = np.linalg.cholesky(a[np.ix_(idx, idx)])
        w = solve_triangular(low, a[np.ix_(idx, free)], lower=True, check_finite=False)
        table[mask, free] = diag[free] - np.einsum("ij,ij->j", w.conj(), w).real
    return table


@dataclass(frozen=True)
class BoundsReport:
    exhaustive: bool
    checked: int
    min_alpha: float
    max_alpha: float
    lower_bound: float
    upper_bound: float


def alpha_bounds_check(
    kernel: Kernel, exhaustive_limit: int = 16, samples: int = 2000, seed: int = 0
) -> BoundsReport:
    """Verify lambda <= alpha(x;xi) <= A(x,x) over all or sampled (x,xi).

    Exhaustive when the site count permits, otherwise random configurations.
    Raises BoundViolatedError with a witness on failure.
    """
    n = kernel.n_sites
    lam = kernel.lambda_margin
    diag = kernel.matrix.diagonal().real
    tol = 1e-9 * max(kernel.op_norm, 1.0)
    min_a, max_a = np.inf, -np.inf
    checked = 0
    exhaustive = n <= exhaustive_limit

    def _scan(mask, values, free):
        nonlocal min_a, max_a, checked
        for y, val in zip(free, values):
            checked += 1
            min_a = min(min_a, val)
            max_a = max(max_a, val)
            if val < lam - tol or val > diag[y] + tol:
                raise BoundViolatedError(
                    f"alpha({y}; mask={mask:#x}) = {val} outside [{lam}, {diag[y]}]"
                )

    if exhaustive:
        table = alpha_table(kernel, limit=exhaustive_limit)
        for mask in range(1 << n):
            free = [i for i in range(n) if not mask >> i & 1]
            _scan(mask, table[mask, free], free)
    else:
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            mask_bits = rng.random(n) < rng.random()
            xi = Configuration.from_sites(n, np.flatnonzero(mask_bits))
            free, values = alpha_profile(kernel, xi)
            _scan(xi.mask, values, free)
    return BoundsReport(
        exhaustive=exhaustive,
        checked=checked,
        min_alpha=float(min_a),
        max_alpha=float(max_a),
        lower_bound=lam,
        upper_bound=float(diag.max()),
    )


@dataclass(frozen=True)
class PairProfile:
    """All intensities needed for one sweep of jump rates.

    occupied: sites in factor order. free: candidate target sites.
    alpha_without[i] is alpha(occupied[i]; xi minus that site);
    alpha_target[i, j] is alpha(free[j]; xi minus occupied[i]).
    """

    occupied: np.ndarray
    free: np.ndarray
    alpha_without: np.ndarray
    alpha_target: np.ndarray


class PapangelouEngine:
    """Incremental intensity queries against a mutable configuration.

    Maintains the Cholesky factor of A(xi,xi) in insertion order; add and
    remove cost O(|xi|^2) and the factor is rebuilt from scratch every
    refactor_period updates to bound drift. Single-owner mutable: do not
    share one engine across threads.
    """

    def __init__(self, kernel: Kernel, xi: Configuration | None = None,
                 refactor_period: int = 256, backend=None):
        if refactor_period < 1:
            raise ValidationError("refactor_period must be >= 1")
        self.kernel = kernel
        self._impl = backend if backend is not None else get_backend()
        n = kernel.n_sites
        self._a = kernel.matrix
        self._diag = np.ascontiguousarray(kernel.matrix.diagonal().real)
        self._L = np.zeros((n, n), dtype=kernel.matrix.dtype)
        self._order: list[int] = []
        self._pos: dict[int, int] = {}
        self._updates = 0
        self.refactor_period = refactor_period
        self._singular_tol = SINGULAR_RTOL * kernel.op_norm
        if xi is not None and len(xi) > 0:
            self._order = xi.sites()
            self._pos = {s: i for i, s in enumerate(self._order)}
            self.refactor()

    @property
    def size(self) -> int:
        return len(self._order)

    @property
    def configuration(self) -> Configuration:
        return Configuration.from_sites(self.kernel.n_sites, self._order)

    def contains(self, x: int) -> bool:
        return x in self._pos

    def add(self, x: int) -> None:
        if x in self._pos:
            raise SiteOccupiedError(f"site {x} already occupied")
        if not 0 <= x < self.kernel.n_sites:
            raise ValidationError(f"site {x} out of range")
        k = len(self._order)
        col = np.ascontiguousarray(self._a[self._order, x]) if k else np.empty(0, dtype=self._a.dtype)
        s = self._impl.chol_append(self._L, k, col, float(self._diag[x]))
        if s <= self._singular_tol:
            raise NumericallySingularError(f"adding site {x} gives Schur complement {s:.3e}")
        self._pos[x] = k
        self._order.append(x)
        self._bump()

    def remove(self, x: int) -> None:
        if x not in self._pos:
            raise SiteEmptyError(f"site {x} not occupied")
        i = self._pos.pop(x)
        self._impl.chol_drop(self._L, len(self._order), i)
        self._order.pop(i)
        for s in self._order[i:]:
            self._pos[s] -= 1
        self._bump()

    def _bump(self):
        self._updates += 1
        if self._updates >= self.refactor_period:
            self.refactor()

    def refactor(self) -> None:
        """Rebuild the factor from the kernel in the current site order."""
        k = len(self._order)
        self._updates = 0
        if k == 0:
            return
        idx = np.asarray(self._order, dtype=np.intp)
        try:
            self._L[:k, :k] = np.linalg.cholesky(self._a[np.ix_(idx, idx)])
        except np.linalg.LinAlgError as exc:
            raise NumericallySingularError(f"refactorization failed: {exc}") from exc

    def alpha(self, x: int) -> float:
        """alpha(x; xi) for a free site x."""
        if x in self._pos:
            raise SiteOccupiedError(f"site {x} is occupied")
        k = len(self._order)
        if k == 0:
            return float(self._diag[x])
        cols = np.ascontiguousarray(self._a[self._order, x]).reshape(k, 1)
        out = np.empty(1)
        self._impl.schur_batch(self._L, k, cols, self._diag[x : x + 1].copy(), out)
        val = float(out[0])
        if val <= self._singular_tol:
            raise NumericallySingularError(f"alpha({x}) = {val:.3e} is numerically singular")
        return val

    def alpha_removed(self, x: int) -> float:
        """alpha(x; xi minus x) for an occupied site x (leave-one-out)."""
        if x not in self._pos:
            raise SiteEmptyError(f"site {x} not occupied")
        k = len(self._order)
        if k == 1:
            return float(self._diag[x])
        unit = np.zeros((k, 1), dtype=self._a.dtype)
        unit[self._pos[x], 0] = 1.0
        out = np.empty(1)
        # 0 - ||L^-1 e_i||^2 = -(A(xi,xi)^-1)(i,i)
        self._impl.schur_batch(self._L, k, unit, np.zeros(1), out)
        return float(-1.0 / out[0])

    def alpha_all_free(self):
        """(free_sites, alphas) for every free site, one batched solve."""
        k = len(self._order)
        free = np.asarray(
            [i for i in range(self.kernel.n_sites) if i not in self._pos], dtype=np.intp
        )
        if free.size == 0:
            return free, np.empty(0)
        diags = np.ascontiguousarray(self._diag[free])
        if k == 0:
            return free, diags.copy()
        cols = np.ascontiguousarray(self._a[np.ix_(np.asarray(self._order, dtype=np.intp), free)])
        out = np.empty(free.size)
        self._impl.schur_batch(self._L, k, cols, diags, out)
        return free, out

    def alpha_all_removed(self):
        """(occupied_in_factor_order, leave-one-out alphas), one batch."""
        k = len(self._order)
        occ = np.asarray(self._order, dtype=np.intp)
        if k == 0:
            return occ, np.empty(0)
        inv = np.empty(k)
        self._impl.inv_diag(self._L, k, inv)
        return occ, 1.0 / inv

    def pair_profile(self) -> PairProfile:
        """Source and target intensities for every (occupied, free) pair.

        Uses the bordered-inverse identity: with U = A(xi,xi)^-1 A(xi, free)
        and t_i = (A(xi,xi)^-1)(i,i),
        alpha(free_j; xi minus occ_i) = alpha(free_j; xi) + |U[i,j]|^2 / t_i.
        """
        k = len(self._order)
        occ = np.asarray(self._order, dtype=np.intp)
        free = np.asarray(
            [i for i in range(self.kernel.n_sites) if i not in self._pos], dtype=np.intp
        )
        if k == 0 or free.size == 0:
            return PairProfile(occ, free, np.empty(0), np.empty((k, free.size)))
        cols = np.ascontiguousarray(self._a[np.ix_(occ, free)])
        alpha_free = np.empty(free.size)
        self._impl.schur_batch(self._L, k, cols, np.ascontiguousarray(self._diag[free]), alpha_free)
        self._impl.backward_conj_solve(self._L, k, cols)
        inv_d = np.empty(k)
        self._impl.inv_diag(self._L, k, inv_d)
        alpha_target = alpha_free[None, :] + (np.abs(cols) ** 2) / inv_d[:, None]
        return PairProfile(occ, free, 1.0 / inv_d, alpha_target)

    def factor_drift(self) -> float:
        """Max abs deviation of L L* from A(xi,xi); diagnostic."""
        k = len(self._order)
        if k == 0:
            return 0.0
        idx = np.asarray(self._order, dtype=np.intp)
        low = self._L[:k, :k]
        return float(np.abs(low @ low.conj().T - self._a[np.ix_(idx, idx)]).max())
