"""Event-driven simulation of the birth-death and exchange dynamics.

Exact-rate Gillespie scheduling: at each state the full rate vector is
rebuilt from the incremental intensity engine, the waiting time is
exponential in the total rate, and the event is chosen proportionally,
sweeping moves in a fixed site order for determinism. Jump dynamics
conserves the particle number by construction.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dpp import DppMeasure
from .errors import (
    InsufficientDataError,
    RateOverflowError,
    SiteEmptyError,
    SiteOccupiedError,
    ValidationError,
)
from .kernel import Kernel
from .papangelou import Configuration, PapangelouEngine
from .rates import RateSpec, g_factor


@dataclass(frozen=True)
class Event:
    time: float
    kind: str  # birth | death | jump
    site: int
    target: int | None = None


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped event log of one run, replayable from the initial state."""

    initial: Configuration
    events: tuple
    horizon: float
    mode: str

    def segments(self):
        """Yield (t_start, t_end, mask) pieces of the piecewise-constant path.

        Replaying validates legality: births on empty sites, deaths on
        occupied sites, jumps from occupied to empty.
        """
        n = self.initial.n_sites
        mask = self.initial.mask
        t_prev = 0.0
        for ev in self.events:
            if not t_prev <= ev.time <= self.horizon:
                raise ValidationError(f"event time {ev.time} outside [{t_prev}, {self.horizon}]")
            yield t_prev, ev.time, mask
            bit = 1 << ev.site
            if ev.kind == "birth":
                if mask & bit:
                    raise SiteOccupiedError(f"birth at occupied site {ev.site}")
                mask |= bit
            elif ev.kind == "death":
                if not mask & bit:
                    raise SiteEmptyError(f"death at empty site {ev.site}")
                mask &= ~bit
            elif ev.kind == "jump":
                tbit = 1 << ev.target
                if not mask & bit:
                    raise SiteEmptyError(f"jump from empty site {ev.site}")
                if mask & tbit:
                    raise SiteOccupiedError(f"jump to occupied site {ev.target}")
                mask = (mask & ~bit) | tbit
            else:
                raise ValidationError(f"unknown event kind {ev.kind!r}")
            t_prev = ev.time
        yield t_prev, self.horizon, mask

    def final_configuration(self) -> Configuration:
        *_, last = self.segments()
        return Configuration.from_mask(self.initial.n_sites, last[2])

    def particle_counts(self):
        return [bin(mask).count("1") for _, _, mask in self.segments()]


@dataclass(frozen=True)
class SimConfig:
    mode: str = "glauber"
    horizon: float = 1000.0
    burn_in: float = 0.0
    thin: float = 1.0
    seed: int = 0
    initial: str = "empty"  # empty | full | dpp | explicit
    initial_sites: tuple = ()
    replicas: int = 1

    def __post_init__(self):
        if self.mode not in ("glauber", "kawasaki"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if not self.horizon > self.burn_in >= 0:
            raise ValidationError("require horizon > burn_in >= 0")
        if self.thin <= 0:
            raise ValidationError("thinning interval must be positive")
        if self.initial not in ("empty", "full", "dpp", "explicit"):
            raise ValidationError(f"unknown initial state {self.initial!r}")
        if self.replicas < 1:
            raise ValidationError("replicas must be >= 1")


def _initial_configuration(kernel: Kernel, cfg: SimConfig, rng) -> Configuration:
    n = kernel.n_sites
    if cfg.initial == "empty":
        return Configuration.empty(n)
    if cfg.initial == "full":
        return Configuration.full(n)
    if cfg.initial == "explicit":
        return Configuration.from_sites(n, cfg.initial_sites)
    return DppMeasure(kernel).sample(rng)


def run(kernel: Kernel, spec: RateSpec | None, cfg: SimConfig, rng=None) -> Trajectory:
    """Simulate one trajectory of the chosen dynamics up to the horizon."""
    if cfg.mode == "kawasaki":
        if spec is None or spec.weight is None or spec.weight.shape[0] != kernel.n_sites:
            raise ValidationError("kawasaki simulation needs matching RateSpec weights")
    if kernel.lambda_margin <= 0:
        warnings.warn(
            "kernel is not diagonally dominant; existence constants are unverified",
            stacklevel=2,
        )
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    initial = _initial_configuration(kernel, cfg, rng)
    engine = PapangelouEngine(kernel, initial)
    events = []
    t = 0.0
    while True:
        moves, rate_vec = _move_table(kernel, spec, cfg.mode, engine)
        total = float(rate_vec.sum())
        if not np.isfinite(total):
            raise RateOverflowError(f"non-finite total rate at t={t}")
        if total <= 0.0:
            break  # absorbing (exchange dynamics at empty or full state)
        t += rng.exponential(1.0 / total)
        if t >= cfg.horizon:
            break
        pick = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(rate_vec), pick, side="right"))
        idx = min(idx, len(moves) - 1)
        kind, site, target = moves[idx]
        if kind == "birth":
            engine.add(site)
        elif kind == "death":
            engine.remove(site)
        else:
            engine.remove(site)
            engine.add(target)
        events.append(Event(time=t, kind=kind, site=site, target=target))
    return Trajectory(initial=initial, events=tuple(events), horizon=cfg.horizon, mode=cfg.mode)


def _move_table(kernel, spec, mode, engine):
    """Enumerate legal moves in deterministic order with their rates."""
    if mode == "glauber":
        free, a_free = engine.alpha_all_free()
        occ, a_out = engine.alpha_all_removed()
        moves = []
        rates = []
        for s, a in zip(free, a_free):
            moves.append(("birth", int(s), None))
            rates.append(a / (1.0 + a))
        order = np.argsort(occ)
        for i in order:
            moves.append(("death", int(occ[i]), None))
            rates.append(1.0 / (1.0 + a_out[i]))
        return moves, np.asarray(rates)
    profile = engine.pair_profile()
    moves = []
    rates = []
    if profile.occupied.size and profile.free.size:
        w = spec.weight
        order = np.argsort(profile.occupied)
        for i in order:
            x = int(profile.occupied[i])
            src = profile.alpha_without[i]
            tgt = profile.alpha_target[i]
            row = w[x, profile.free] * tgt * g_factor(src, tgt, spec.t)
            for j, y in enumerate(profile.free):
                moves.append(("jump", x, int(y)))
                rates.append(row[j])
    return moves, np.asarray(rates)


@dataclass(frozen=True)
class CorrelationEstimate:
    sites: tuple
    estimate: float
    stderr: float
    batches: int


def estimate_correlations(trajectories, site_tuples, burn_in: float = 0.0,
                          n_batches: int = 32) -> list:
    """Time-weighted occupancy-product averages with batch-means errors.

    Each trajectory's post-burn-in span is cut into n_batches equal
    windows; the pooled batch means give the estimate and its standard
    error.
    """
    if not trajectories:
        raise InsufficientDataError("no trajectories")
    tuples = [tuple(int(s) for s in ts) for ts in site_tuples]
    masks = [sum(1 << s for s in ts) for ts in tuples]
    batch_sums: list[list[np.ndarray]] = []
    for traj in trajectories:
        if traj.horizon <= burn_in:
            raise InsufficientDataError("burn-in consumes the whole trajectory")
        width = (traj.horizon - burn_in) / n_batches
        acc = np.zeros((len(tuples), n_batches))
        for t0, t1, state in traj.segments():
            lo = max(t0, burn_in)
            if lo >= t1:
                continue
            present = [i for i, m in enumerate(masks) if state & m == m]
            if not present:
                continue
            b0 = int((lo - burn_in) / width)
            b1 = int(np.ceil((t1 - burn_in) / width))
            for b in range(b0, min(b1, n_batches)):
                w0 = burn_in + b * width
                w1 = w0 + width
                overlap = min(t1, w1) - max(lo, w0)
                if overlap > 0:
                    for i in present:
                        acc[i, b] += overlap
        batch_sums.append(acc / width)
    pooled = np.concatenate(batch_sums, axis=1)
    total_batches = pooled.shape[1]
    if total_batches < 2:
        raise InsufficientDataError("need at least 2 batches for a standard error")
    out = []
    for i, ts in enumerate(tuples):
        vals = pooled[i]
        out.append(
            CorrelationEstimate(
                sites=ts,
                estimate=float(vals.mean()),
                stderr=float(vals.std(ddof=1) / np.sqrt(total_batches)),
                batches=total_batches,
            )
        )
    return out


_MASK64 = (1 << 64) - 1


def _splitmix64(i: int) -> int:
    z = (i + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def replica_seed(master: int, index: int) -> int:
    """Derived seed for replica `index`: replica 0 keeps the master seed,
    replica i uses master XOR splitmix64(i), so one replica reduces exactly
    to a plain run."""
    if index == 0:
        return master & _MASK64
    return (master ^ _splitmix64(index)) & _MASK64


@dataclass(frozen=True)
class ReplicaResult:
    trajectories: tuple
    estimates: list = field(default_factory=list)
    seeds: tuple = ()


def run_replicas(kernel: Kernel, spec: RateSpec | None, cfg: SimConfig,
                 n_replicas: int | None = None, site_tuples=(), threads: int = 1) -> ReplicaResult:
    """Independent replicas with derived seeds, pooled batch means.

    Results are reproducible byte for byte given the master seed and the
    replica count; threading only changes wall time because replicas are
    joined in index order.
    """
    count = cfg.replicas if n_replicas is None else n_replicas
    if count < 1:
        raise ValidationError("need at least one replica")
    seeds = tuple(replica_seed(cfg.seed, i) for i in range(count))
    configs = [replace(cfg, seed=s) for s in seeds]
    if threads > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajectories = tuple(pool.map(lambda c: run(kernel, spec, c), configs))
    else:
        trajectories = tuple(run(kernel, spec, c) for c in configs)
    estimates = []
    if site_tuples:
        estimates = estimate_correlations(trajectories, site_tuples, burn_in=cfg.burn_in)
    return ReplicaResult(trajectories=trajectories, estimates=estimates, seeds=seeds)
