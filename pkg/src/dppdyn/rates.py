"""Flip and jump rates in detailed balance with the determinantal measure.

Birth and death rates b = alpha/(1+alpha), d = 1/(1+alpha) make the
single-site flip rate identically one. Jump rates carry a symmetric site
weight and a symmetric bounding factor g_t; t = 0 gives the bare target
intensity. The Liggett constants (uniform rate bound c, minimum flip rate
epsilon, interdependence matrix gamma and its sum M) certify existence of
the Feller process and, when M < epsilon, ergodicity at rate epsilon - M.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EnumerationTooLargeError,
    IdenticalSitesError,
    SiteEmptyError,
    SiteOccupiedError,
    ValidationError,
)
from .kernel import Kernel, SiteSpace
from .papangelou import Configuration, alpha, alpha_table


def g_factor(u, v, t: float):
    """Symmetric bounding factor ((1+u)(1+v))^-t; identically 1 at t=0."""
    if t == 0.0:
        return np.ones_like(np.asarray(u, dtype=float)) if np.ndim(u) else 1.0
    return ((1.0 + u) * (1.0 + v)) ** (-t)


@dataclass(frozen=True)
class RateSpec:
    """Jump-rate parameters: interpolation exponent t and site weights.

    The weight matrix is symmetric, nonnegative, zero on the diagonal, with
    every row summing into [d1, d2], d1 > 0. Glauber dynamics ignores it.
    """

    t: float = 0.0
    weight: np.ndarray | None = None
    weight_kind: str = "explicit"

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValidationError("t must lie in [0,1]")
        if self.weight is not None:
            w = np.asarray(self.weight, dtype=float)
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise ValidationError("weight matrix must be square")
            if np.abs(w - w.T).max() > 1e-12:
                raise ValidationError("weight matrix must be symmetric")
            if w.min() < 0:
                raise ValidationError("weights must be nonnegative")
            if np.abs(np.diagonal(w)).max() > 0:
                raise ValidationError("weight diagonal must be zero")
            if w.shape[0] > 1 and w.sum(axis=1).min() <= 0:
                raise ValidationError("every site needs positive total weight")
            w = w.copy()
            w.setflags(write=False)
            object.__setattr__(self, "weight", w)

    @property
    def d1(self) -> float:
        return float(self.weight.sum(axis=1).min())

    @property
    def d2(self) -> float:
        return float(self.weight.sum(axis=1).max())

    @classmethod
    def explicit(cls, weight, t: float = 0.0) -> "RateSpec":
        return cls(t=t, weight=np.asarray(weight, dtype=float), weight_kind="explicit")

    @classmethod
    def uniform(cls, n_sites: int, t: float = 0.0) -> "RateSpec":
        """d(x,y) = 1/(n-1) for x != y; row sums are exactly 1."""
        if n_sites < 2:
            raise ValidationError("uniform weights need at least 2 sites")
        w = np.full((n_sites, n_sites), 1.0 / (n_sites - 1))
        np.fill_diagonal(w, 0.0)
        return cls(t=t, weight=w, weight_kind="uniform")

    @classmethod
    def nearest_neighbor(cls, space: SiteSpace, t: float = 0.0) -> "RateSpec":
        """d(x,y) = 1/(2 dim) between torus neighbors."""
        if space.torus_sides is None:
            raise ValidationError("nearest-neighbor weights need a torus geometry")
        dist = space.distance_matrix()
        w = np.where(dist == 1, 1.0 / (2.0 * space.dim), 0.0)
        return cls(t=t, weight=w, weight_kind="nearest-neighbor")

    @classmethod
    def exponential(cls, space: SiteSpace, decay: float, t: float = 0.0) -> "RateSpec":
        """d(x,y) = exp(-decay * torus_distance(x,y)) off the diagonal."""
        if space.torus_sides is None:
            raise ValidationError("exponential weights need a torus geometry")
        if decay <= 0:
            raise ValidationError("decay must be positive")
        dist = space.distance_matrix().astype(float)
        w = np.exp(-decay * dist)
        np.fill_diagonal(w, 0.0)
        return cls(t=t, weight=w, weight_kind="exponential")


@dataclass(frozen=True)
class GlauberRates:
    birth: float
    death: float


def glauber_rates(kernel: Kernel, x: int, xi: Configuration) -> GlauberRates:
    """Birth rate at x given xi and death rate of x in (x xi).

    The pair sums to one exactly: death is computed as 1 - birth, which
    agrees with 1/(1+alpha) to one rounding.
    """
    a = alpha(kernel, x, xi)
    b = a / (1.0 + a)
    return GlauberRates(birth=b, death=1.0 - b)


def kawasaki_rate(kernel: Kernel, spec: RateSpec, x: int, y: int, xi: Configuration) -> float:
    """Rate of the jump x -> y in configuration xi (x occupied, y empty)."""
    if x == y:
        raise IdenticalSitesError(f"jump needs distinct sites, got {x} twice")
    if x not in xi:
        raise SiteEmptyError(f"jump source {x} is empty")
    if y in xi:
        raise SiteOccupiedError(f"jump target {y} is occupied")
    if spec.weight is None or spec.weight.shape[0] != kernel.n_sites:
        raise ValidationError("rate spec weights do not match the kernel")
    base = xi.without_site(x)
    a_src = alpha(kernel, x, base)
    a_tgt = alpha(kernel, y, base)
    return float(spec.weight[x, y] * a_tgt * g_factor(a_src, a_tgt, spec.t))


def _masks_avoiding(n: int, sites) -> np.ndarray:
    masks = np.arange(1 << n, dtype=np.int64)
    keep = np.ones(masks.size, dtype=bool)
    for s in sites:
        keep &= (masks >> s) & 1 == 0
    return masks[keep]


def detailed_balance_residual(
    kernel: Kernel,
    spec: RateSpec | None = None,
    mode: str = "glauber",
    exhaustive_limit: int = 12,
    glauber_fn=None,
    kawasaki_fn=None,
) -> float:
    """Exhaustive max violation of the reversibility identities.

    Glauber: |b(x;xi) - alpha(x;xi) d(x;x xi)| over all (x, xi).
    Kawasaki: |alpha(x;xi) c(x,y;x xi) - alpha(y;xi) c(y,x;y xi)| over all
    (x, y, xi). Custom rate functions may be injected to test the detector.
    """
    n = kernel.n_sites
    if n > exhaustive_limit:
        raise EnumerationTooLargeError(f"{n} sites exceed exhaustive limit {exhaustive_limit}")
    table = alpha_table(kernel)
    worst = 0.0
    if mode == "glauber":
        for x in range(n):
            for mask in _masks_avoiding(n, [x]):
                a = table[mask, x]
                if glauber_fn is None:
                    b = a / (1.0 + a)
                    d = 1.0 - b
                else:
                    xi = Configuration.from_mask(n, int(mask))
                    b, d = glauber_fn(kernel, x, xi)
                worst = max(worst, abs(b - a * d))
        return worst
    if mode != "kawasaki":
        raise ValidationError(f"unknown mode {mode!r}")
    if spec is None:
        raise ValidationError("kawasaki mode needs a RateSpec")
    w = spec.weight
    for x in range(n):
        for y in range(x + 1, n):
            for mask in _masks_avoiding(n, [x, y]):
                ax = table[mask, x]
                ay = table[mask, y]
                if kawasaki_fn is None:
                    g = g_factor(ax, ay, spec.t)
                    c_xy = w[x, y] * ay * g
                    c_yx = w[y, x] * ax * g
                else:
                    xi = Configuration.from_mask(n, int(mask))
                    c_xy = kawasaki_fn(kernel, spec, x, y, xi.with_site(x))
                    c_yx = kawasaki_fn(kernel, spec, y, x, xi.with_site(y))
                worst = max(worst, abs(ax * c_xy - ay * c_yx))
    return worst


@dataclass(frozen=True)
class LiggettReport:
    """Existence and ergodicity constants for one dynamics.

    Exact entries come from exhaustive enumeration (None when the site
    count forbids it); bound entries are the closed-form estimates that
    remain available at any size.
    """

    mode: str
    exhaustive: bool
    c_sup: float
    epsilon: float | None
    epsilon_bound: float
    m_exact: float | None
    m1_exact: float | None
    m1_bound: float
    a0: float
    gamma: np.ndarray | None
    ergodic: bool
    epsilon_by_sector: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "exhaustive": self.exhaustive,
            "c_sup": self.c_sup,
            "epsilon": self.epsilon,
            "epsilon_bound": self.epsilon_bound,
            "M_exact": self.m_exact,
            "M1_exact": self.m1_exact,
            "M1_bound": self.m1_bound,
            "a0": self.a0,
            "ergodic": self.ergodic,
        }


def _m1_bound_glauber(kernel: Kernel) -> float:
    lam = kernel.lambda_margin
    q = kernel.q_value
    if lam <= 0:
        return float("inf")
    return (q / lam) * (1.0 + q * (lam + q) / lam**2)


def liggett_constants(
    kernel: Kernel,
    spec: RateSpec | None = None,
    mode: str = "glauber",
    exhaustive_limit: int = 12,
) -> LiggettReport:
    """Compute c, epsilon, gamma, M exactly (small systems) plus bounds."""
    n = kernel.n_sites
    lam = kernel.lambda_margin
    norm = kernel.op_norm
    exhaustive = n <= exhaustive_limit
    if mode == "glauber":
        b_hi = norm / (1.0 + norm)
        d_hi = 1.0 / (1.0 + lam) if lam > 0 else 1.0
        c_bound = max(b_hi, d_hi)
        eps_bound = 1.0
        m1_bound = _m1_bound_glauber(kernel)
        a0 = 1.0
        if not exhaustive:
            return LiggettReport(
                mode, False, c_bound, None, eps_bound, None, None, m1_bound, a0, None,
                ergodic=a0 * m1_bound < eps_bound,
            )
        table = alpha_table(kernel)
        gamma = np.zeros((n, n))
        m1 = np.zeros((n, n))
        c_sup = 0.0
        eps = np.inf
        for x in range(n):
            masks = _masks_avoiding(n, [x])
            ax = table[masks, x]
            b = ax / (1.0 + ax)
            d = 1.0 - b
            c_sup = max(c_sup, float(np.maximum(b, d).max()))
            eps = min(eps, float((b + d).min()))
            for u in range(n):
                if u == x:
                    continue
                sub = _masks_avoiding(n, [x, u])
                a_plain = table[sub, x]
                a_with = table[sub | (1 << u), x]
                b_plain = a_plain / (1.0 + a_plain)
                b_with = a_with / (1.0 + a_with)
                d_plain = 1.0 - b_plain
                d_with = 1.0 - b_with
                gamma[x, u] = float((np.abs(b_plain - b_with) + np.abs(d_with - d_plain)).max())
                m1[x, u] = float((a_plain - a_with).max())
        m_exact = float(gamma.sum(axis=1).max())
        m1_exact = float(m1.sum(axis=1).max())
        return LiggettReport(
            mode, True, c_sup, float(eps), eps_bound, m_exact, m1_exact, m1_bound, a0,
            gamma, ergodic=m_exact < eps,
        )

    if mode != "kawasaki":
        raise ValidationError(f"unknown mode {mode!r}")
    if spec is None:
        raise ValidationError("kawasaki mode needs a RateSpec")
    w = spec.weight
    t = spec.t
    eps_bound = spec.d1 * lam * (1.0 + norm) ** (-2.0 * t) if lam > 0 else 0.0
    m1_bound = 2.0 * spec.d2 * _m1_bound_glauber(kernel)
    a0 = max(1.0, 2.0 * t * spec.d2 + 1.0)
    c_bound = spec.d2 * norm
    if not exhaustive:
        return LiggettReport(
            mode, False, c_bound, None, eps_bound, None, None, m1_bound, a0, None,
            ergodic=a0 * m1_bound < eps_bound,
        )
    table = alpha_table(kernel)

    def jump(masks, x, y):
        # c(x, y; x masks): alphas conditioned on the base configuration.
        ax = table[masks, x]
        ay = table[masks, y]
        return w[x, y] * ay * g_factor(ax, ay, t)

    c_pair = np.zeros((n, n))
    for x in range(n):
        for y in range(x + 1, n):
            masks = _masks_avoiding(n, [x, y])
            c_pair[x, y] = c_pair[y, x] = float(
                np.maximum(jump(masks, x, y), jump(masks, y, x)).max()
            )
    c_sup = float(c_pair.sum(axis=1).max())

    # Minimum occupancy-flip rate of a site y: jumps into y plus jumps out
    # of y after adding it, minimized over configurations not containing y.
    eps = np.inf
    eps_by_sector: dict[int, float] = {}
    for y in range(n):
        for mask in _masks_avoiding(n, [y]):
            total = 0.0
            occupied = [x for x in range(n) if mask >> x & 1]
            for x in occupied:
                base = int(mask) & ~(1 << x)
                ax = table[base, x]
                ay = table[base, y]
                total += w[x, y] * ay * g_factor(ax, ay, t)
            for x in range(n):
                if x == y or mask >> x & 1:
                    continue
                ay = table[mask, y]
                ax = table[mask, x]
                total += w[y, x] * ax * g_factor(ay, ax, t)
            eps = min(eps, total)
            sector = len(occupied)
            eps_by_sector[sector] = min(eps_by_sector.get(sector, np.inf), total)

    # The y-sums below skip y == u: the interference matrix compares the
    # same jump under a flip of a third site, so the pair's own sites are
    # excluded (otherwise a zero-interaction kernel would get gamma > 0).
    gamma = np.zeros((n, n))
    m1 = np.zeros((n, n))
    for x in range(n):
        for u in range(n):
            if u == x:
                continue
            acc = 0.0
            m1_acc = 0.0
            for y in range(n):
                if y == x or y == u:
                    continue
                masks = _masks_avoiding(n, [x, y, u])
                with_u = masks | (1 << u)
                d_out = np.abs(jump(masks, x, y) - jump(with_u, x, y))
                d_in = np.abs(jump(masks, y, x) - jump(with_u, y, x))
                acc += float(np.maximum(d_out, d_in).max())
                m1_acc += w[x, y] * float(
                    ((table[masks, x] - table[with_u, x]) + (table[masks, y] - table[with_u, y])).max()
                )
            gamma[x, u] = acc
            m1[x, u] = m1_acc
    m_exact = float(gamma.sum(axis=1).max())
    m1_exact = float(m1.sum(axis=1).max())
    return LiggettReport(
        mode, True, c_sup, float(eps), eps_bound, m_exact, m1_exact, m1_bound, a0,
        gamma, ergodic=m_exact < float(eps),
        epsilon_by_sector={k: float(v) for k, v in sorted(eps_by_sector.items())},
    )
