"""Named verification checks with residuals and tolerances.

Assembles the module-level oracles into a flat list of CheckResult records
for the check/verify CLI subcommands. Checks that need exhaustive
enumeration skip themselves with a reason when the system is too large.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exactcheck, papangelou, rates
from .dpp import DppMeasure, dlr_residual
from .errors import BoundViolatedError, DppDynError
from .kernel import Kernel, restrict_a_bracket
from .papangelou import Configuration, PapangelouEngine, alpha_table
from .rates import RateSpec

DEFAULT_TOLERANCES = {
    "kernel_roundtrip": 1e-10,
    "restriction_identity": 1e-10,
    "duality": 1e-8,
    "alpha_paths": 1e-9,
    "difference_paths": 1e-9,
    "monotonicity": 1e-9,
    "alpha_bounds": 0.0,
    "engine_replay": 1e-8,
    "normalization": 1e-10,
    "marginal_consistency": 1e-10,
    "intensity_ratio": 1e-10,
    "negative_correlation": 1e-12,
    "dlr": 1e-10,
    "flip_rate_sum": 0.0,
    "detailed_balance_glauber": 1e-12,
    "detailed_balance_kawasaki": 1e-12,
    "bound_coupling": 1e-12,
    "invariance_glauber": 1e-11,
    "invariance_kawasaki": 1e-11,
    "reversibility_glauber": 1e-11,
    "reversibility_kawasaki": 1e-11,
    "spectral_gap_glauber": 1e-9,
    "spectral_gap_kawasaki": 1e-9,
    "contraction": 1e-9,
    "inverse_bound": 1e-9,
    "gamma_series": 1e-12,
    "gamma_subset_domination": 1e-12,
    "complex_embedding": 1e-12,
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # pass | fail | skip
    residual: float | None
    tolerance: float | None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "check_name": self.name,
            "status": self.status,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


def _result(name, residual, tolerance, detail="") -> CheckResult:
    status = "pass" if residual <= tolerance else "fail"
    return CheckResult(name, status, float(residual), float(tolerance), detail)


def _skip(name, reason) -> CheckResult:
    return CheckResult(name, "skip", None, None, reason)


def _tol(tolerances, name) -> float:
    return float(tolerances.get(name, DEFAULT_TOLERANCES[name]))


def _sampled_masks(n, count, rng, avoid_full=False):
    upper = (1 << n) - (1 if avoid_full else 0)
    return [int(m) for m in rng.integers(0, upper, size=count, dtype=np.int64)]


def kernel_suite(kernel: Kernel, tolerances=None) -> list:
    tolerances = tolerances or {}
    out = []
    k = kernel.marginal_kernel
    n = kernel.n_sites
    recon = np.linalg.solve(np.eye(n, dtype=k.dtype) - k, k)
    resid = np.abs(recon - kernel.matrix).max() / max(kernel.op_norm, 1.0)
    out.append(_result("kernel_roundtrip", resid, _tol(tolerances, "kernel_roundtrip"),
                       "A versus K(I-K)^-1, relative"))
    full = restrict_a_bracket(kernel, range(n))
    resid = np.abs(full - kernel.matrix).max() / max(kernel.op_norm, 1.0)
    out.append(_result("restriction_identity", resid, _tol(tolerances, "restriction_identity"),
                       "full-window interaction operator equals A"))
    return out


def papangelou_suite(kernel: Kernel, limit: int = 10, seed: int = 0, tolerances=None) -> list:
    tolerances = tolerances or {}
    out = []
    n = kernel.n_sites
    rng = np.random.default_rng(seed)
    exhaustive = n <= limit

    # Duality and path agreement over all or sampled (x, xi).
    if exhaustive:
        masks = range(1 << n)
    else:
        masks = _sampled_masks(n, 60, rng)
    worst_dual = 0.0
    worst_paths = 0.0
    for mask in masks:
        xi = Configuration.from_mask(n, int(mask))
        for x in xi.free_sites():
            a = papangelou.alpha(kernel, x, xi)
            worst_dual = max(worst_dual, abs(a * papangelou.beta_variational(kernel, x, xi) - 1.0))
            det_path = papangelou.alpha_det_ratio(kernel, x, xi)
            var_path = papangelou.alpha_variational(kernel, x, xi)
            worst_paths = max(worst_paths, abs(a - det_path) / a, abs(a - var_path) / a)
    out.append(_result("duality", worst_dual, _tol(tolerances, "duality"),
                       "alpha times dual variational value minus 1"))
    out.append(_result("alpha_paths", worst_paths, _tol(tolerances, "alpha_paths"),
                       "Schur vs determinant-ratio vs variational, relative"))

    # Difference identity through its three routes.
    if n <= 8:
        diff_masks = range(1 << n)
    else:
        diff_masks = _sampled_masks(n, 40, rng)
    worst_diff = 0.0
    for mask in diff_masks:
        xi = Configuration.from_mask(n, int(mask))
        free = xi.free_sites()
        for i, x in enumerate(free):
            for u in free[i + 1:]:
                main = papangelou.alpha_difference(kernel, x, u, xi)
                direct = papangelou.alpha_difference_direct(kernel, x, u, xi)
                pair = papangelou.alpha_difference_pair_schur(kernel, x, u, xi)
                scale = max(main, 1e-12)
                worst_diff = max(worst_diff, abs(main - direct) / scale, abs(main - pair) / scale)
    out.append(_result("difference_paths", worst_diff, _tol(tolerances, "difference_paths"),
                       "rank-one formula vs direct vs pair-Schur, relative"))

    # Monotone repulsion from the exhaustive table.
    if exhaustive:
        table = alpha_table(kernel)
        worst = 0.0
        for mask in range(1 << n):
            for u in range(n):
                if mask >> u & 1:
                    continue
                grown = mask | (1 << u)
                for x in range(n):
                    if x == u or mask >> x & 1:
                        continue
                    worst = max(worst, table[grown, x] - table[mask, x])
        out.append(_result("monotonicity", worst, _tol(tolerances, "monotonicity"),
                           "adding a particle never raises another site's intensity"))
    else:
        out.append(_skip("monotonicity", f"needs <= {limit} sites, have {n}"))

    try:
        report = papangelou.alpha_bounds_check(kernel, exhaustive_limit=limit, seed=seed)
        out.append(CheckResult("alpha_bounds", "pass", 0.0, _tol(tolerances, "alpha_bounds"),
                               f"min {report.min_alpha:.6g}, max {report.max_alpha:.6g}, "
                               f"checked {report.checked}"))
    except BoundViolatedError as exc:
        out.append(CheckResult("alpha_bounds", "fail", None, 0.0, str(exc)))

    # Engine versus from-scratch along a random add/remove walk.
    steps = max(200, 10 * n)
    engine = PapangelouEngine(kernel)
    occupied: set = set()
    worst_engine = 0.0
    for _ in range(steps):
        if occupied and (rng.random() < 0.5 or len(occupied) == n):
            site = int(rng.choice(sorted(occupied)))
            engine.remove(site)
            occupied.discard(site)
        else:
            site = int(rng.choice([i for i in range(n) if i not in occupied]))
            engine.add(site)
            occupied.add(site)
        free = [i for i in range(n) if i not in occupied]
        if free:
            probe = int(rng.choice(free))
            direct = papangelou.alpha(kernel, probe, Configuration.from_sites(n, occupied))
            worst_engine = max(worst_engine, abs(engine.alpha(probe) - direct))
    worst_engine = max(worst_engine, engine.factor_drift())
    out.append(_result("engine_replay", worst_engine, _tol(tolerances, "engine_replay"),
                       f"{steps}-step random walk, intensity and factor drift"))
    return out


def dpp_suite(kernel: Kernel, limit: int = 12, seed: int = 0, tolerances=None) -> list:
    tolerances = tolerances or {}
    out = []
    n = kernel.n_sites
    measure = DppMeasure(kernel)

    window = list(range(min(n, limit)))
    resid = measure.window(window).normalization_residual()
    out.append(_result("normalization", resid, _tol(tolerances, "normalization"),
                       f"marginals over a {len(window)}-site window sum to 1"))

    if n <= limit:
        win = measure.window(range(n))
        worst = 0.0
        for x in range(n):
            total = sum(
                win.probability_mask(mask)
                for mask in range(1 << n)
                if mask >> x & 1
            )
            worst = max(worst, abs(total - measure.correlation([x])))
        out.append(_result("marginal_consistency", worst, _tol(tolerances, "marginal_consistency"),
                           "inclusion mass equals the diagonal of K"))
    else:
        out.append(_skip("marginal_consistency", f"needs <= {limit} sites, have {n}"))

    worst = 0.0
    for x in range(min(n, 8)):
        for y in range(x + 1, min(n, 8)):
            excess = measure.correlation([x, y]) - measure.correlation([x]) * measure.correlation([y])
            worst = max(worst, excess)
    out.append(_result("negative_correlation", worst, _tol(tolerances, "negative_correlation"),
                       "pair correlations never exceed the product"))

    if n <= min(10, limit):
        probs = measure.full_distribution()
        table = alpha_table(kernel)
        worst = 0.0
        for mask in range(1 << n):
            for x in range(n):
                if mask >> x & 1:
                    continue
                worst = max(worst, abs(probs[mask | (1 << x)] / probs[mask] - table[mask, x]))
        out.append(_result("intensity_ratio", worst, _tol(tolerances, "intensity_ratio"),
                           "probability ratios reproduce the intensities"))

        window = list(range(min(3, n)))
        report = dlr_residual(measure, window, lambda c: float(len([s for s in window if s in c])))
        out.append(_result("dlr", report.residual, _tol(tolerances, "dlr"),
                           "local specification, exact enumeration"))
    else:
        out.append(_skip("intensity_ratio", f"needs <= 10 sites, have {n}"))
        out.append(_skip("dlr", f"needs <= 10 sites, have {n}"))
    return out


def rates_suite(kernel: Kernel, spec: RateSpec, limit: int = 12, seed: int = 0,
                tolerances=None) -> list:
    tolerances = tolerances or {}
    out = []
    n = kernel.n_sites
    norm = kernel.op_norm

    if n <= limit:
        resid = rates.detailed_balance_residual(kernel, mode="glauber", exhaustive_limit=limit)
        out.append(_result("detailed_balance_glauber", resid,
                           _tol(tolerances, "detailed_balance_glauber") * norm,
                           "birth rate equals intensity times death rate"))
        resid = rates.detailed_balance_residual(kernel, spec, mode="kawasaki",
                                                exhaustive_limit=limit)
        out.append(_result("detailed_balance_kawasaki", resid,
                           _tol(tolerances, "detailed_balance_kawasaki") * norm,
                           "weighted jump fluxes balance"))
        lig_g = rates.liggett_constants(kernel, mode="glauber", exhaustive_limit=limit)
        out.append(_result("flip_rate_sum", abs(lig_g.epsilon - 1.0),
                           _tol(tolerances, "flip_rate_sum"),
                           "minimum single-site flip rate is exactly 1"))
        lig_k = rates.liggett_constants(kernel, spec, mode="kawasaki", exhaustive_limit=limit)
        worst = 0.0
        for lig in (lig_g, lig_k):
            worst = max(worst, lig.m_exact - lig.a0 * lig.m1_exact)
            if np.isfinite(lig.m1_bound):
                worst = max(worst, lig.m1_exact - lig.m1_bound)
        out.append(_result("bound_coupling", worst, _tol(tolerances, "bound_coupling"),
                           "exact constants below their analytic bounds"))
    else:
        for name in ("detailed_balance_glauber", "detailed_balance_kawasaki",
                     "flip_rate_sum", "bound_coupling"):
            out.append(_skip(name, f"needs <= {limit} sites, have {n}"))
    return out


def exactcheck_suite(kernel: Kernel, spec: RateSpec, limit: int = 12, seed: int = 0,
                     tolerances=None) -> list:
    tolerances = tolerances or {}
    out = []
    n = kernel.n_sites
    rng = np.random.default_rng(seed)

    if n <= limit:
        for mode in ("glauber", "kawasaki"):
            rep = exactcheck.invariance_residual(kernel, spec, mode)
            out.append(_result(f"invariance_{mode}", rep.stationarity_residual,
                               _tol(tolerances, f"invariance_{mode}"),
                               "stationarity of the exact distribution"))
            out.append(_result(f"reversibility_{mode}", rep.reversibility_residual,
                               _tol(tolerances, f"reversibility_{mode}"),
                               "entrywise flux symmetry"))
    else:
        for mode in ("glauber", "kawasaki"):
            out.append(_skip(f"invariance_{mode}", f"needs <= {limit} sites, have {n}"))
            out.append(_skip(f"reversibility_{mode}", f"needs <= {limit} sites, have {n}"))

    if n <= 10:
        lig_g = rates.liggett_constants(kernel, mode="glauber")
        gen_g = exactcheck.build_generator(kernel, mode="glauber")
        gap = exactcheck.spectral_gap(gen_g)
        slack = (lig_g.epsilon - lig_g.m_exact) - gap if lig_g.ergodic else 0.0
        out.append(_result("spectral_gap_glauber", slack,
                           _tol(tolerances, "spectral_gap_glauber"),
                           f"gap {gap:.6g} versus rate bound "
                           f"{lig_g.epsilon - lig_g.m_exact:.6g}"))
        lig_k = rates.liggett_constants(kernel, spec, mode="kawasaki")
        gen_k = exactcheck.build_generator(kernel, spec, mode="kawasaki")
        worst = -np.inf
        detail = []
        for sector in range(1, n):
            gap = exactcheck.spectral_gap(gen_k, sector=sector)
            bound = lig_k.epsilon - lig_k.m_exact
            if bound > 0:
                worst = max(worst, bound - gap)
            detail.append(f"sector {sector}: gap {gap:.4g}")
        if np.isfinite(worst):
            out.append(_result("spectral_gap_kawasaki", worst,
                               _tol(tolerances, "spectral_gap_kawasaki"), "; ".join(detail)))
        else:
            out.append(_skip("spectral_gap_kawasaki",
                             "rate bound not positive; " + "; ".join(detail)))

        fs = rng.standard_normal((4, 1 << n))
        rep = exactcheck.contraction_check(gen_g, fs, [0.5, 1.0, 2.0, 4.0], liggett=lig_g)
        out.append(_result("contraction", max(rep.worst_norm_violation, rep.worst_vector_violation),
                           _tol(tolerances, "contraction"),
                           "seminorm decay and componentwise oscillation bound"))
    else:
        out.append(_skip("spectral_gap_glauber", f"needs <= 10 sites, have {n}"))
        out.append(_skip("spectral_gap_kawasaki", f"needs <= 10 sites, have {n}"))
        out.append(_skip("contraction", f"needs <= 10 sites, have {n}"))

    try:
        rep41 = exactcheck.inverse_bound_bruteforce(kernel, exhaustive_limit=limit, seed=seed)
        out.append(_result("inverse_bound", rep41.max_ratio - 1.0,
                           _tol(tolerances, "inverse_bound"),
                           f"max ratio {rep41.max_ratio:.9f} over {rep41.checked} subsets"))
        data = rep41.data
        series, tail = exactcheck.gamma_series(data, 60)
        resid = max(np.abs(series - data.gamma).max() - tail, 0.0)
        out.append(_result("gamma_series", resid, _tol(tolerances, "gamma_series"),
                           "resolvent equals the truncated series within the tail"))
        worst = 0.0
        for _ in range(min(10, 1 << n)):
            mask = int(rng.integers(1, 1 << n))
            sites = [i for i in range(n) if mask >> i & 1]
            sub = exactcheck.gamma_for_subset(kernel, sites)
            idx = np.asarray(sites, dtype=np.intp)
            worst = max(worst, float((sub - data.gamma[np.ix_(idx, idx)]).max()))
        out.append(_result("gamma_subset_domination", worst,
                           _tol(tolerances, "gamma_subset_domination"),
                           "subset walk sums stay below the full-space sums"))
    except DppDynError as exc:
        out.append(_skip("inverse_bound", str(exc)))
        out.append(_skip("gamma_series", str(exc)))
        out.append(_skip("gamma_subset_domination", str(exc)))

    if kernel.is_complex:
        emb = exactcheck.complex_embedding(kernel, seed=seed)
        resid = max(emb.max_reconstruction_error, -emb.min_bound_slack)
        out.append(_result("complex_embedding", resid, _tol(tolerances, "complex_embedding"),
                           f"doubled dimension {emb.embedded.n_sites}, margin {emb.lambda_margin:.6g}"))
    else:
        out.append(_skip("complex_embedding", "kernel is real"))
    return out


SUITES = {
    "kernel": lambda kernel, spec, limit, seed, tolerances: kernel_suite(kernel, tolerances),
    "papangelou": lambda kernel, spec, limit, seed, tolerances: papangelou_suite(
        kernel, min(limit, 10), seed, tolerances
    ),
    "dpp": lambda kernel, spec, limit, seed, tolerances: dpp_suite(kernel, limit, seed, tolerances),
    "rates": lambda kernel, spec, limit, seed, tolerances: rates_suite(
        kernel, spec, limit, seed, tolerances
    ),
    "exactcheck": lambda kernel, spec, limit, seed, tolerances: exactcheck_suite(
        kernel, spec, limit, seed, tolerances
    ),
}


def verification_suite(kernel: Kernel, spec: RateSpec, suites=("all",), limit: int = 12,
                       seed: int = 0, tolerances=None) -> list:
    """Run the requested suites and return their CheckResults in order."""
    chosen = list(SUITES) if "all" in suites else list(suites)
    unknown = [s for s in chosen if s not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites {unknown}; options are {sorted(SUITES)} or 'all'")
    results = []
    for name in chosen:
        results.extend(SUITES[name](kernel, spec, limit, seed, tolerances or {}))
    return results
