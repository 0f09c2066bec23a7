"""Exact small-system oracles.

Everything here enumerates the full configuration space: generator
matrices of both dynamics, stationarity and reversibility residuals,
spectral gaps against the ergodicity constants, semigroup contraction in
the oscillation seminorm, the brute-force inverse-submatrix bound with its
substochastic-walk certificate, and the complex-to-real embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .dpp import DppMeasure
from .errors import (
    AssumptionAViolatedError,
    NotReversibleError,
    TooManySitesError,
    ValidationError,
)
from .kernel import Kernel, SiteSpace, check_assumption_a, _abs1
from .papangelou import alpha_table
from .rates import RateSpec, g_factor, liggett_constants

GENERATOR_SITE_LIMIT = 14
DENSE_STATE_LIMIT = 4096


@dataclass(frozen=True)
class GeneratorMatrix:
    """Generator over all 2^n configurations, indexed by occupancy mask."""

    kernel: Kernel
    spec: RateSpec | None
    mode: str
    matrix: scipy.sparse.csr_matrix

    @property
    def n_sites(self) -> int:
        return self.kernel.n_sites

    @property
    def n_states(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        if self.n_states > DENSE_STATE_LIMIT:
            raise TooManySitesError(f"{self.n_states} states is too large to densify")
        return self.matrix.toarray()


def build_generator(kernel: Kernel, spec: RateSpec | None = None,
                    mode: str = "glauber") -> GeneratorMatrix:
    """Assemble the full transition-rate matrix of one dynamics.

    Off-diagonal entries are the single-event rates; the diagonal balances
    each row to zero. Exchange dynamics only connects states of equal
    particle number.
    """
    n = kernel.n_sites
    if n > GENERATOR_SITE_LIMIT:
        raise TooManySitesError(f"{n} sites gives 2^{n} states")
    if mode not in ("glauber", "kawasaki"):
        raise ValidationError(f"unknown mode {mode!r}")
    if mode == "kawasaki":
        if spec is None or spec.weight is None or spec.weight.shape[0] != n:
            raise ValidationError("kawasaki generator needs matching RateSpec weights")
    table = alpha_table(kernel)
    size = 1 << n
    masks = np.arange(size, dtype=np.int64)
    rows = []
    cols = []
    vals = []
    if mode == "glauber":
        for x in range(n):
            bit = 1 << x
            vacant = masks[(masks & bit) == 0]
            a = table[vacant, x]
            b = a / (1.0 + a)
            # births: m -> m | bit at rate b(x; m)
            rows.append(vacant)
            cols.append(vacant | bit)
            vals.append(b)
            # deaths: m | bit -> m at rate 1 - b(x; m)
            rows.append(vacant | bit)
            cols.append(vacant)
            vals.append(1.0 - b)
    else:
        w = spec.weight
        for x in range(n):
            for y in range(n):
                if x == y or w[x, y] == 0.0:
                    continue
                xbit, ybit = 1 << x, 1 << y
                source = masks[((masks & xbit) != 0) & ((masks & ybit) == 0)]
                base = source & ~xbit
                ax = table[base, x]
                ay = table[base, y]
                rows.append(source)
                cols.append(base | ybit)
                vals.append(w[x, y] * ay * g_factor(ax, ay, spec.t))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    off = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    gen = off - scipy.sparse.diags(np.asarray(off.sum(axis=1)).ravel())
    return GeneratorMatrix(kernel=kernel, spec=spec, mode=mode, matrix=gen.tocsr())


@dataclass(frozen=True)
class InvarianceReport:
    stationarity_residual: float
    reversibility_residual: float


def invariance_residual(kernel: Kernel, spec: RateSpec | None = None,
                        mode: str = "glauber") -> InvarianceReport:
    """Stationarity |mu^T L|_inf and entrywise mu-symmetry of the generator."""
    gen = build_generator(kernel, spec, mode)
    mu = DppMeasure(kernel).full_distribution()
    stationarity = float(np.abs(gen.matrix.T @ mu).max())
    flux = gen.matrix.multiply(mu[:, None]).tocsr()
    reversibility = float(np.abs((flux - flux.T).toarray()).max()) if gen.n_states <= DENSE_STATE_LIMIT \
        else float(abs(flux - flux.T).max())
    return InvarianceReport(stationarity, reversibility)


def spectral_gap(gen: GeneratorMatrix, mu: np.ndarray | None = None,
                 sector: int | None = None) -> float:
    """Second-smallest eigenvalue of -L in the mu-weighted inner product.

    Exchange dynamics is reducible over particle number, so a sector must
    be selected for it; the flip dynamics uses the whole space.
    """
    if mu is None:
        mu = DppMeasure(gen.kernel).full_distribution()
    n = gen.n_sites
    if gen.mode == "kawasaki":
        if sector is None:
            raise ValidationError("kawasaki gap needs a particle-number sector")
        states = np.asarray(
            [m for m in range(1 << n) if bin(m).count("1") == sector], dtype=np.intp
        )
        if states.size < 2:
            raise ValidationError(f"sector {sector} has fewer than 2 states")
    else:
        states = np.arange(1 << n, dtype=np.intp)
    if states.size > DENSE_STATE_LIMIT:
        raise TooManySitesError(f"{states.size} states is too large for a dense eigensolve")
    sub = gen.matrix.toarray()[np.ix_(states, states)]
    mu_s = mu[states]
    flux = mu_s[:, None] * sub
    scale = max(np.abs(flux).max(), 1e-300)
    rev = np.abs(flux - flux.T).max()
    if rev > 1e-8 * scale:
        raise NotReversibleError(f"mu-symmetry residual {rev:.3e} exceeds 1e-8 relative")
    root = np.sqrt(mu_s)
    sym = (root[:, None] / root[None, :]) * sub
    sym = (sym + sym.T) / 2.0
    eigs = np.linalg.eigvalsh(-sym)
    return float(eigs[1])


def oscillation(f: np.ndarray, n: int) -> np.ndarray:
    """Per-site oscillation: max over states of |f(state+x) - f(state)|."""
    size = 1 << n
    if f.shape[0] != size:
        raise ValidationError(f"function vector has {f.shape[0]} entries, expected {size}")
    masks = np.arange(size, dtype=np.int64)
    out = np.empty(n)
    for x in range(n):
        bit = 1 << x
        vacant = masks[(masks & bit) == 0]
        out[x] = np.abs(f[vacant | bit] - f[vacant]).max()
    return out


def triple_norm(f: np.ndarray, n: int) -> float:
    """Sum of the per-site oscillations, the smooth-function seminorm."""
    return float(oscillation(f, n).sum())


@dataclass(frozen=True)
class ContractionCase:
    t: float
    f_index: int
    measured: float
    bound: float
    vector_slack: float


@dataclass(frozen=True)
class ContractionReport:
    epsilon: float
    m: float
    cases: tuple
    worst_norm_violation: float
    worst_vector_violation: float

    @property
    def ok(self) -> bool:
        return self.worst_norm_violation <= 1e-9 and self.worst_vector_violation <= 1e-9


def contraction_check(gen: GeneratorMatrix, fs: np.ndarray, t_grid,
                      liggett=None) -> ContractionReport:
    """Semigroup decay of the seminorm against exp((M - epsilon) t).

    Also checks the componentwise oscillation bound with the
    interdependence matrix: osc(T_t f) <= exp(-eps t) expm(t Gamma) osc(f).
    fs may be a single vector or a (count, 2^n) batch.
    """
    n = gen.n_sites
    if gen.n_states > 1024:
        raise TooManySitesError("contraction check needs at most 10 sites")
    if liggett is None:
        liggett = liggett_constants(gen.kernel, gen.spec, gen.mode)
    eps = liggett.epsilon
    m = liggett.m_exact
    gamma = liggett.gamma
    fs = np.atleast_2d(np.asarray(fs, dtype=float))
    dense = gen.matrix.toarray()
    cases = []
    worst_norm = -np.inf
    worst_vec = -np.inf
    for t in t_grid:
        semigroup = scipy.linalg.expm(t * dense)
        decay = np.exp((m - eps) * t)
        gamma_prop = np.exp(-eps * t) * scipy.linalg.expm(t * gamma)
        for i, f in enumerate(fs):
            osc_f = oscillation(f, n)
            g = semigroup @ f
            osc_g = oscillation(g, n)
            measured = float(osc_g.sum())
            bound = decay * float(osc_f.sum())
            vec_slack = float((osc_g - gamma_prop @ osc_f).max())
            worst_norm = max(worst_norm, measured - bound)
            worst_vec = max(worst_vec, vec_slack)
            cases.append(ContractionCase(float(t), i, measured, bound, vec_slack))
    return ContractionReport(
        epsilon=eps, m=m, cases=tuple(cases),
        worst_norm_violation=float(worst_norm), worst_vector_violation=float(worst_vec),
    )


@dataclass(frozen=True)
class GammaData:
    """Substochastic-walk certificate for inverse-submatrix bounds.

    p_hat is the row-stochastic walk built from the off-diagonal profile of
    the kernel; gamma sums the geometric series of r p_hat via the
    resolvent; bound is the entrywise dominance matrix (1/lam on the
    diagonal, gamma/lam off it).
    """

    lam: float
    q: float
    r: float
    q_hat: np.ndarray
    p_hat: np.ndarray
    gamma: np.ndarray
    bound: np.ndarray


def build_gamma_data(kernel: Kernel, q: float | None = None) -> GammaData:
    rep = check_assumption_a(kernel)
    if not rep.holds:
        raise AssumptionAViolatedError(f"diagonal-dominance margin {rep.lam} is not positive")
    lam = rep.lam
    a = kernel.matrix
    off = _abs1(a).astype(float)
    np.fill_diagonal(off, 0.0)
    q_min = float(off.sum(axis=1).max())
    if q is None:
        q = kernel.q_value if kernel.q_value > 0 else 1.0
    if q < q_min - 1e-12:
        raise ValidationError(f"q={q} is below the off-diagonal mass {q_min}")
    if q <= 0:
        raise ValidationError("q must be positive")
    n = kernel.n_sites
    q_hat = off / q
    np.fill_diagonal(q_hat, -off.sum(axis=1) / q)
    p_hat = q_hat + np.eye(n)
    row_defect = np.abs(p_hat.sum(axis=1) - 1.0).max()
    if row_defect > 1e-12 or p_hat.min() < -1e-15:
        raise ValidationError(f"walk matrix is not row-stochastic (defect {row_defect:.3e})")
    r = q / (lam + q)
    gamma = np.linalg.solve(np.eye(n) - r * p_hat, r * p_hat)
    gamma = np.clip(gamma, 0.0, None)
    bound = gamma / lam
    np.fill_diagonal(bound, 1.0 / lam)
    return GammaData(lam=lam, q=q, r=r, q_hat=q_hat, p_hat=p_hat, gamma=gamma, bound=bound)


def gamma_series(data: GammaData, n_terms: int):
    """Truncated power series of the walk sum and its geometric tail bound."""
    x = data.r * data.p_hat
    partial = np.zeros_like(x)
    power = np.eye(x.shape[0])
    for _ in range(n_terms):
        power = power @ x
        partial += power
    tail = data.r ** (n_terms + 1) / (1.0 - data.r)
    return partial, tail


def gamma_for_subset(kernel: Kernel, sites, q: float | None = None) -> np.ndarray:
    """Walk sum restricted to a subset, with escaping mass sent to a cemetery.

    Entrywise below the full-space gamma because every path on the subset
    is also a path on the full site set.
    """
    data = build_gamma_data(kernel, q)
    idx = np.asarray(sorted(sites), dtype=np.intp)
    k = idx.size
    a = kernel.matrix
    off = _abs1(a).astype(float)
    np.fill_diagonal(off, 0.0)
    p = np.zeros((k + 1, k + 1))
    p[:k, :k] = off[np.ix_(idx, idx)] / data.q
    escape = (off[idx].sum(axis=1) - off[np.ix_(idx, idx)].sum(axis=1)) / data.q
    p[:k, k] = escape
    p[:k, :k] += np.diag(1.0 - off[idx].sum(axis=1) / data.q)
    # Absorbing cemetery; it never feeds back into the subset block.
    p[k, k] = 1.0
    full = np.linalg.solve(np.eye(k + 1) - data.r * p, data.r * p)
    return full[:k, :k]


@dataclass(frozen=True)
class Lemma41Report:
    data: GammaData
    max_ratio: float
    witness: tuple  # (mask, x, y)
    exhaustive: bool
    checked: int


def inverse_bound_bruteforce(kernel: Kernel, q: float | None = None,
                             exhaustive_limit: int = 14, samples: int = 2000,
                             seed: int = 0) -> Lemma41Report:
    """Check |A(xi,xi)^-1(x,y)| <= bound(x,y) over all (or sampled) subsets.

    Returns the largest observed ratio and its witness; values at most
    1 + 1e-9 confirm the dominance, and diagonal kernels attain 1.
    """
    data = build_gamma_data(kernel, q)
    n = kernel.n_sites
    exhaustive = n <= exhaustive_limit
    if exhaustive:
        mask_iter = range(1, 1 << n)
    else:
        rng = np.random.default_rng(seed)
        mask_iter = (
            int(m) for m in (rng.integers(1, 1 << n, dtype=np.int64) for _ in range(samples))
        )
    max_ratio = 0.0
    witness = (0, 0, 0)
    checked = 0
    tiny = 1e-13 * max(1.0, 1.0 / data.lam)
    for mask in mask_iter:
        idx = np.asarray([i for i in range(n) if mask >> i & 1], dtype=np.intp)
        inv = np.linalg.inv(kernel.matrix[np.ix_(idx, idx)])
        mag = np.abs(inv)
        cap = data.bound[np.ix_(idx, idx)]
        checked += 1
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(cap > 0, mag / cap, np.where(mag <= tiny, 0.0, np.inf))
        pos = np.unravel_index(np.argmax(ratio), ratio.shape)
        if ratio[pos] > max_ratio:
            max_ratio = float(ratio[pos])
            witness = (mask, int(idx[pos[0]]), int(idx[pos[1]]))
    return Lemma41Report(data=data, max_ratio=max_ratio, witness=witness,
                         exhaustive=exhaustive, checked=checked)


@dataclass(frozen=True)
class EmbeddingReport:
    embedded: Kernel
    lambda_margin: float
    max_reconstruction_error: float
    min_bound_slack: float
    checked: int


def complex_embedding(kernel: Kernel, subset_limit: int = 10, samples: int = 200,
                      seed: int = 0) -> EmbeddingReport:
    """Real doubling of a complex kernel: [[Re A, -Im A], [Im A, Re A]].

    Real kernels pass through as the block-diagonal doubling. For every
    tested subset the real and imaginary parts of the complex inverse are
    recovered from corner blocks of the doubled inverse, and the triangle
    bound |A^-1| <= |C| + |D| is confirmed.
    """
    a = kernel.matrix
    a1 = np.ascontiguousarray(a.real)
    a2 = np.ascontiguousarray(a.imag) if kernel.is_complex else np.zeros_like(a1)
    doubled = np.block([[a1, -a2], [a2, a1]])
    embedded = Kernel(doubled, SiteSpace(2 * kernel.n_sites))
    n = kernel.n_sites
    if n <= subset_limit:
        mask_iter = list(range(1, 1 << n))
    else:
        rng = np.random.default_rng(seed)
        mask_iter = [int(m) for m in rng.integers(1, 1 << n, size=samples, dtype=np.int64)]
    worst_err = 0.0
    worst_slack = np.inf
    for mask in mask_iter:
        idx = np.asarray([i for i in range(n) if mask >> i & 1], dtype=np.intp)
        k = idx.size
        inv = np.linalg.inv(a[np.ix_(idx, idx)])
        sub = np.block(
            [[a1[np.ix_(idx, idx)], -a2[np.ix_(idx, idx)]],
             [a2[np.ix_(idx, idx)], a1[np.ix_(idx, idx)]]]
        )
        winv = np.linalg.inv(sub)
        c_part = winv[:k, :k]
        d_part = -winv[:k, k:]
        worst_err = max(worst_err, float(np.abs(c_part + 1j * d_part - inv).max()))
        slack = (np.abs(c_part) + np.abs(d_part)) - np.abs(inv)
        worst_slack = min(worst_slack, float(slack.min()))
    return EmbeddingReport(
        embedded=embedded,
        lambda_margin=embedded.lambda_margin,
        max_reconstruction_error=worst_err,
        min_bound_slack=worst_slack,
        checked=len(mask_iter) if isinstance(mask_iter, list) else 0,
    )
