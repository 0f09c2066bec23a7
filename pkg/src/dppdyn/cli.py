"""Configuration-driven command line: check, sample, simulate, verify, bounds.

Configs are TOML with strict validation (unknown keys are rejected with
their path). All stdout is deterministic for a fixed config and seed:
JSON objects are emitted with sorted keys and no timestamps.

Environment overrides: DPPDYN_OUTPUT_DIR replaces [output].dir and
DPPDYN_THREADS sets the replica thread pool size.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .dpp import DppMeasure
from .errors import DppDynError, ParseError, ValidationError
from .kernel import Kernel, KernelSpec, SiteSpace, build_kernel, load_kernel_matrix
from .rates import RateSpec, liggett_constants
from .simulate import SimConfig, run_replicas
from .suite import verification_suite


def _reject_unknown(section: dict, allowed, path: str):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ValidationError(f"{path}.{unknown[0]}: unknown key")


def _parse_entry(value, path):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError as exc:
            raise ValidationError(f"{path}: cannot parse entry {value!r}") from exc
    raise ValidationError(f"{path}: matrix entries must be numbers or strings")


def _parse_matrix(rows, path):
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ValidationError(f"{path}: expected a list of rows")
    data = np.array([[_parse_entry(v, path) for v in row] for row in rows])
    if np.abs(data.imag).max() == 0:
        data = data.real
    return data


@dataclass
class ExperimentConfig:
    """Validated experiment description; builds domain objects on demand."""

    space: SiteSpace
    kernel_spec: KernelSpec
    rates_weight: str
    rates_t: float
    rates_decay: float
    rates_matrix: np.ndarray | None
    sim: SimConfig
    verify_suites: tuple = ("all",)
    verify_limit: int = 12
    tolerances: dict = field(default_factory=dict)
    output_dir: str | None = None
    event_log: bool = False
    _kernel: Kernel | None = None

    def kernel(self) -> Kernel:
        if self._kernel is None:
            self._kernel = build_kernel(self.kernel_spec, self.space)
        return self._kernel

    def rate_spec(self) -> RateSpec:
        t = self.rates_t
        if self.rates_weight == "explicit":
            return RateSpec.explicit(self.rates_matrix, t=t)
        if self.rates_weight == "uniform":
            return RateSpec.uniform(self.space.n_sites, t=t)
        if self.rates_weight == "nearest-neighbor":
            return RateSpec.nearest_neighbor(self.space, t=t)
        if self.rates_weight == "exponential":
            return RateSpec.exponential(self.space, self.rates_decay, t=t)
        raise ValidationError(f"rates.weight: unknown kind {self.rates_weight!r}")


def parse_config(path) -> ExperimentConfig:
    """Load and validate a TOML experiment config."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ParseError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc

    _reject_unknown(raw, {"kernel", "rates", "run", "verify", "output"}, str(path))

    ker = raw.get("kernel")
    if not isinstance(ker, dict):
        raise ValidationError("kernel: section is required")
    _reject_unknown(
        ker,
        {"variant", "n_sites", "a", "matrix", "matrix_file", "sides", "coupling", "q_value"},
        "kernel",
    )
    variant = ker.get("variant")
    if variant not in ("scalar", "explicit", "torus"):
        raise ValidationError(f"kernel.variant: expected scalar|explicit|torus, got {variant!r}")
    q_value = ker.get("q_value")

    if variant == "scalar":
        n = ker.get("n_sites")
        if not isinstance(n, int) or n < 1:
            raise ValidationError("kernel.n_sites: positive integer required for scalar variant")
        # Default ring geometry so nearest-neighbor weights are defined.
        sides = ker.get("sides", [n])
        space = SiteSpace.torus(*sides)
        if space.n_sites != n:
            raise ValidationError("kernel.sides: sides must enclose n_sites sites")
        spec = KernelSpec.scalar(float(ker.get("a", 1.0)), q_value=q_value)
    elif variant == "explicit":
        if "matrix" in ker and "matrix_file" in ker:
            raise ValidationError("kernel: give matrix or matrix_file, not both")
        if "matrix" in ker:
            matrix = _parse_matrix(ker["matrix"], "kernel.matrix")
        elif "matrix_file" in ker:
            matrix = load_kernel_matrix(path.parent / ker["matrix_file"])
        else:
            raise ValidationError("kernel: explicit variant needs matrix or matrix_file")
        n = matrix.shape[0]
        if "n_sites" in ker and ker["n_sites"] != n:
            raise ValidationError(f"kernel.n_sites: {ker['n_sites']} does not match matrix size {n}")
        space = SiteSpace.torus(*ker["sides"]) if "sides" in ker else SiteSpace(n)
        spec = KernelSpec.explicit(matrix, q_value=q_value)
    else:
        sides = ker.get("sides")
        if not sides:
            raise ValidationError("kernel.sides: required for torus variant")
        space = SiteSpace.torus(*sides)
        coupling_raw = ker.get("coupling", {})
        if not isinstance(coupling_raw, dict):
            raise ValidationError("kernel.coupling: table of distance -> coefficient")
        try:
            coupling = {int(k): float(v) for k, v in coupling_raw.items()}
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"kernel.coupling: {exc}") from exc
        spec = KernelSpec.torus_convolution(float(ker.get("a", 1.0)), coupling, q_value=q_value)

    rat = raw.get("rates", {})
    _reject_unknown(rat, {"t", "weight", "decay", "matrix"}, "rates")
    t = float(rat.get("t", 0.0))
    if not 0.0 <= t <= 1.0:
        raise ValidationError("rates.t: t must lie in [0,1]")
    default_weight = "nearest-neighbor" if space.torus_sides is not None else "uniform"
    weight = rat.get("weight", default_weight)
    if weight not in ("nearest-neighbor", "uniform", "exponential", "explicit"):
        raise ValidationError(f"rates.weight: unknown kind {weight!r}")
    rates_matrix = _parse_matrix(rat["matrix"], "rates.matrix").real if "matrix" in rat else None
    if weight == "explicit" and rates_matrix is None:
        raise ValidationError("rates.matrix: required for explicit weights")

    run_sec = raw.get("run", {})
    _reject_unknown(
        run_sec,
        {"mode", "horizon", "burn_in", "thin", "seed", "replicas", "initial", "initial_sites"},
        "run",
    )
    try:
        sim = SimConfig(
            mode=run_sec.get("mode", "glauber"),
            horizon=float(run_sec.get("horizon", 1000.0)),
            burn_in=float(run_sec.get("burn_in", 0.0)),
            thin=float(run_sec.get("thin", 1.0)),
            seed=int(run_sec.get("seed", 0)),
            initial=run_sec.get("initial", "empty"),
            initial_sites=tuple(run_sec.get("initial_sites", ())),
            replicas=int(run_sec.get("replicas", 1)),
        )
    except ValidationError as exc:
        raise ValidationError(f"run: {exc}") from exc

    ver = raw.get("verify", {})
    _reject_unknown(ver, {"suites", "exhaustive_limit", "tolerances"}, "verify")
    suites = tuple(ver.get("suites", ["all"]))
    limit = int(ver.get("exhaustive_limit", 12))
    tolerances = {str(k): float(v) for k, v in ver.get("tolerances", {}).items()}

    out = raw.get("output", {})
    _reject_unknown(out, {"dir", "event_log"}, "output")
    output_dir = out.get("dir")
    event_log = bool(out.get("event_log", False))

    return ExperimentConfig(
        space=space,
        kernel_spec=spec,
        rates_weight=weight,
        rates_t=t,
        rates_decay=float(rat.get("decay", 1.0)),
        rates_matrix=rates_matrix,
        sim=sim,
        verify_suites=suites,
        verify_limit=limit,
        tolerances=tolerances,
        output_dir=output_dir,
        event_log=event_log,
    )


def _emit(text: str, out):
    out.write(text)
    if not text.endswith("\n"):
        out.write("\n")


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _cmd_bounds(cfg: ExperimentConfig, args, out) -> int:
    kernel = cfg.kernel()
    spec = cfg.rate_spec()
    mode = args.mode or cfg.sim.mode
    report = liggett_constants(kernel, spec, mode=mode, exhaustive_limit=cfg.verify_limit)
    payload = {
        "c_sup": report.c_sup,
        "epsilon": report.epsilon if report.epsilon is not None else report.epsilon_bound,
        "M_exact": report.m_exact,
        "M1_bound": report.m1_bound,
        "ergodic": report.ergodic,
        "mode": report.mode,
        "epsilon_bound": report.epsilon_bound,
        "M1_exact": report.m1_exact,
        "a0": report.a0,
        "exhaustive": report.exhaustive,
    }
    _emit(_json(payload), out)
    return 0


def _cmd_sample(cfg: ExperimentConfig, args, out) -> int:
    measure = DppMeasure(cfg.kernel())
    seed = cfg.sim.seed if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    for _ in range(args.count):
        _emit(measure.sample(rng).bitstring(), out)
    return 0


def _parse_observables(raw, n_sites):
    if not raw:
        return [(x,) for x in range(min(n_sites, 4))]
    tuples = []
    for item in raw:
        try:
            sites = tuple(int(tok) for tok in item.split(","))
        except ValueError:
            raise ValidationError(f"--observables: cannot parse {item!r}") from None
        if any(not 0 <= s < n_sites for s in sites):
            raise ValidationError(f"--observables: site out of range in {item!r}")
        tuples.append(sites)
    return tuples


def _cmd_simulate(cfg: ExperimentConfig, args, out) -> int:
    kernel = cfg.kernel()
    spec = cfg.rate_spec()
    sim = cfg.sim
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.burn_in is not None:
        overrides["burn_in"] = args.burn_in
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replicas is not None:
        overrides["replicas"] = args.replicas
    if overrides:
        from dataclasses import replace

        sim = replace(sim, **overrides)
    observables = _parse_observables(args.observables, kernel.n_sites)
    threads = int(os.environ.get("DPPDYN_THREADS", "1"))
    result = run_replicas(kernel, spec, sim, site_tuples=observables, threads=threads)
    measure = DppMeasure(kernel) if kernel.n_sites <= 16 else None
    for est in result.estimates:
        record = {
            "sites": list(est.sites),
            "estimate": est.estimate,
            "stderr": est.stderr,
            "target": measure.correlation(est.sites) if measure else None,
        }
        _emit(_json(record), out)
    outdir = os.environ.get("DPPDYN_OUTPUT_DIR") or cfg.output_dir
    if cfg.event_log and outdir:
        directory = Path(outdir)
        directory.mkdir(parents=True, exist_ok=True)
        for i, traj in enumerate(result.trajectories):
            with open(directory / f"events_r{i}.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["time", "kind", "site", "site2"])
                for ev in traj.events:
                    writer.writerow([repr(ev.time), ev.kind, ev.site,
                                     "" if ev.target is None else ev.target])
    return 0


def _cmd_verify(cfg: ExperimentConfig, args, out) -> int:
    suites = (args.suite,) if args.suite else cfg.verify_suites
    results = verification_suite(
        cfg.kernel(), cfg.rate_spec(), suites=suites,
        limit=cfg.verify_limit, seed=cfg.sim.seed, tolerances=cfg.tolerances,
    )
    for res in results:
        _emit(_json(res.as_dict()), out)
    failed = sum(1 for r in results if r.status == "fail")
    _emit(_json({"checks": len(results), "failed": failed}), out)
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dppdyn",
        description="Determinantal point process dynamics: build, simulate, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", required=True, help="TOML experiment config")

    p = sub.add_parser("check", help="run one verification suite")
    add_config(p)
    p.add_argument("suite", nargs="?", default=None,
                   help="kernel|papangelou|dpp|rates|exactcheck (default: config suites)")

    p = sub.add_parser("sample", help="draw exact configurations, one bitstring per line")
    add_config(p)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("simulate", help="run the event-driven dynamics and report observables")
    add_config(p)
    p.add_argument("--mode", choices=["glauber", "kawasaki"], default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--burn-in", dest="burn_in", type=float, default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--observables", nargs="*", default=None,
                   help="site tuples as comma lists, e.g. 0 1 0,1")

    p = sub.add_parser("verify", help="run the full oracle suite and report JSON results")
    add_config(p)
    p.add_argument("--suite", default=None, help="restrict to one suite")

    p = sub.add_parser("bounds", help="print existence and ergodicity constants as JSON")
    add_config(p)
    p.add_argument("--mode", choices=["glauber", "kawasaki"], default=None)
    return parser


_COMMANDS = {
    "check": _cmd_verify,
    "sample": _cmd_sample,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "bounds": _cmd_bounds,
}


def main(argv=None, stdout=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = stdout if stdout is not None else sys.stdout
    try:
        cfg = parse_config(args.config)
        return _COMMANDS[args.command](cfg, args, out)
    except DppDynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
