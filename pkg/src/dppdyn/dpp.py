"""The determinantal measure: correlations, marginals, exact sampling, DLR.

The measure is determined by the marginal kernel K = A(I+A)^-1 of a
validated Kernel. Inclusion probabilities of site tuples are minors of K;
window marginals combine det(I_W - K_W) with minors of the window
interaction operator. Sampling is exact via the spectral decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import get_backend
from .errors import (
    ConfigurationNotInWindowError,
    DuplicateSitesError,
    ValidationError,
    WindowTooLargeError,
)
from .kernel import Kernel, restrict_a_bracket
from .papangelou import Configuration, alpha

EXACT_ENUMERATION_LIMIT = 12


class DppMeasure:
    """Determinantal point process defined by a kernel's marginal operator."""

    def __init__(self, kernel: Kernel):
        self.kernel = kernel
        k = kernel.marginal_kernel
        eigvals, eigvecs = np.linalg.eigh(k)
        if eigvals[-1] >= 1.0:
            raise ValidationError(f"marginal kernel has eigenvalue {eigvals[-1]} >= 1")
        self.eigenvalues = np.clip(eigvals, 0.0, None)
        self.eigenvectors = eigvecs
        self.log_det_complement = float(np.log1p(-self.eigenvalues).sum())

    @property
    def n_sites(self) -> int:
        return self.kernel.n_sites

    @property
    def expected_size(self) -> float:
        """Mean particle number, the trace of the marginal kernel."""
        return float(self.eigenvalues.sum())

    def correlation(self, sites) -> float:
        """Inclusion probability of a tuple of distinct sites: det K(sites)."""
        sites = [int(s) for s in sites]
        if not sites:
            raise ValidationError("correlation needs at least one site")
        if len(set(sites)) != len(sites):
            raise DuplicateSitesError(f"duplicate sites in {sites}")
        idx = np.asarray(sites, dtype=np.intp)
        val = np.linalg.det(self.kernel.marginal_kernel[np.ix_(idx, idx)])
        return float(np.real(val))

    def window(self, sites) -> "WindowMarginals":
        return WindowMarginals(self, sites)

    def marginal_probability(self, window, zeta) -> float:
        """Probability that the window's trace equals zeta exactly."""
        return self.window(window).probability(zeta)

    def full_distribution(self) -> np.ndarray:
        """Exact probabilities of all 2^n configurations, indexed by bit mask."""
        n = self.n_sites
        if n > 20:
            raise WindowTooLargeError(f"full distribution over 2^{n} states")
        win = self.window(range(n))
        out = np.empty(1 << n)
        for mask in range(1 << n):
            out[mask] = win.probability_mask(mask)
        return out

    def sample(self, seed) -> Configuration:
        """One exact draw; seed may be an int or a numpy Generator.

        Phase one keeps each eigenvector independently with probability
        equal to its eigenvalue; phase two samples the resulting projection
        process site by site with rank-one conditional updates, sweeping
        sites in ascending order.
        """
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        keep = rng.random(self.n_sites) < self.eigenvalues
        m = int(keep.sum())
        if m == 0:
            return Configuration.empty(self.n_sites)
        vecs = self.eigenvectors[:, keep]
        proj = np.ascontiguousarray(vecs @ vecs.conj().T)
        uniforms = rng.random(m)
        out = np.empty(m, dtype=np.intp)
        get_backend().projection_sample(proj, m, uniforms, out)
        return Configuration.from_sites(self.n_sites, out)

    def sample_many(self, count: int, seed) -> list:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return [self.sample(rng) for _ in range(count)]


class WindowMarginals:
    """Marginal law of the process restricted to a window of sites.

    Caches det(I_W - K_W) and the window interaction operator so repeated
    probability queries cost one small determinant each.
    """

    def __init__(self, measure: DppMeasure, sites):
        self.measure = measure
        self.sites = tuple(sorted(int(s) for s in sites))
        if len(set(self.sites)) != len(self.sites):
            raise DuplicateSitesError(f"duplicate sites in window {sites}")
        kernel = measure.kernel
        idx = np.asarray(self.sites, dtype=np.intp)
        k_w = kernel.marginal_kernel[np.ix_(idx, idx)]
        sign, logdet = np.linalg.slogdet(np.eye(idx.size, dtype=k_w.dtype) - k_w)
        self.vacancy_probability = float(np.real(sign) * np.exp(logdet))
        self.interaction = restrict_a_bracket(kernel, self.sites)
        self._local = {s: i for i, s in enumerate(self.sites)}

    def probability(self, zeta) -> float:
        """mu_W(zeta) = det(I_W - K_W) det A_[W](zeta, zeta)."""
        if isinstance(zeta, Configuration):
            members = zeta.sites()
        else:
            members = sorted(int(s) for s in zeta)
        if any(s not in self._local for s in members):
            raise ConfigurationNotInWindowError(f"{members} not contained in window {self.sites}")
        if not members:
            return self.vacancy_probability
        loc = np.asarray([self._local[s] for s in members], dtype=np.intp)
        minor = np.linalg.det(self.interaction[np.ix_(loc, loc)])
        return float(self.vacancy_probability * np.real(minor))

    def probability_mask(self, mask: int) -> float:
        return self.probability([s for s in range(self.measure.n_sites) if mask >> s & 1])

    def normalization_residual(self) -> float:
        """|sum over all subconfigurations - 1|; exact, window <= 20 sites."""
        w = len(self.sites)
        if w > 20:
            raise WindowTooLargeError(f"normalization over 2^{w} subconfigurations")
        total = 0.0
        for mask in range(1 << w):
            members = [self.sites[i] for i in range(w) if mask >> i & 1]
            total += self.probability(members)
        return abs(total - 1.0)


@dataclass(frozen=True)
class DlrReport:
    residual: float
    stderr: float | None
    exact: bool
    samples: int


def _ordered_intensity_product(kernel: Kernel, members, base: Configuration) -> float:
    """Product of intensities inserting members (ascending) into base."""
    value = 1.0
    current = base
    for x in members:
        value *= alpha(kernel, x, current)
        current = current.with_site(x)
    return value


def dlr_residual(measure: DppMeasure, window, f, sample_budget: int | None = None,
                 seed: int = 0) -> DlrReport:
    """Two-sided check of the local specification over a window.

    The inner average replaces the window's content by the normalized
    intensity-weighted sum over all subconfigurations given the outside.
    Exact enumeration when the site count permits, otherwise a sampled
    estimate with its standard error.
    """
    kernel = measure.kernel
    n = kernel.n_sites
    win = sorted(int(s) for s in window)
    if len(win) > EXACT_ENUMERATION_LIMIT:
        raise WindowTooLargeError(f"window of {len(win)} sites exceeds {EXACT_ENUMERATION_LIMIT}")
    w = len(win)
    inner_cache: dict[int, float] = {}
    win_mask = 0
    for s in win:
        win_mask |= 1 << s

    def inner_average(outside_mask: int) -> float:
        if outside_mask in inner_cache:
            return inner_cache[outside_mask]
        base = Configuration.from_mask(n, outside_mask)
        z = 0.0
        acc = 0.0
        for sub in range(1 << w):
            members = [win[i] for i in range(w) if sub >> i & 1]
            weight = _ordered_intensity_product(kernel, members, base)
            z += weight
            mask = outside_mask
            for s in members:
                mask |= 1 << s
            acc += weight * f(Configuration.from_mask(n, mask))
        val = acc / z
        inner_cache[outside_mask] = val
        return val

    if n <= EXACT_ENUMERATION_LIMIT and sample_budget is None:
        probs = measure.full_distribution()
        lhs = 0.0
        rhs = 0.0
        for mask in range(1 << n):
            p = probs[mask]
            lhs += p * f(Configuration.from_mask(n, mask))
            rhs += p * inner_average(mask & ~win_mask)
        return DlrReport(residual=abs(lhs - rhs), stderr=None, exact=True, samples=0)

    budget = sample_budget if sample_budget is not None else 2000
    if budget < 2:
        raise ValidationError("sample_budget must be at least 2")
    rng = np.random.default_rng(seed)
    diffs = np.empty(budget)
    for i in range(budget):
        xi = measure.sample(rng)
        diffs[i] = f(xi) - inner_average(xi.mask & ~win_mask)
    residual = abs(float(diffs.mean()))
    stderr = float(diffs.std(ddof=1) / np.sqrt(budget))
    return DlrReport(residual=residual, stderr=stderr, exact=False, samples=budget)
