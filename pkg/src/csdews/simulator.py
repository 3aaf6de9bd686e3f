"""Synthetic series with known tipping behaviour, and detector benchmarks.

All randomness comes from ``numpy.random.Generator(PCG64(seed))`` and its
``standard_normal`` draws (ziggurat), so a ``(config, seed)`` pair always
reproduces the same series.

Generators
----------
stationary_ar1
    ``x[t] = phi0 * x[t-1] + sigma * e[t]`` after 100 discarded burn-in steps.
ramped_ar1
    The AR coefficient climbs linearly from ``phi0`` to ``phi1`` up to the
    tip index; from the tip on, the series sits at the absorbing level
    ``jump`` with small residual noise (``post_tip_noise * sigma``).
fold_bifurcation
    Euler-Maruyama integration of ``dx = (a x - x**3 + c) dt + sigma dW``
    with ``a`` ramping from ``a0`` to ``a1``, so the lower well merges with
    the saddle and disappears.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

BURN_IN = 100
DIVERGENCE_LIMIT = 1e6

Kind = Literal["stationary_ar1", "ramped_ar1", "fold_bifurcation"]
KINDS = ("stationary_ar1", "ramped_ar1", "fold_bifurcation")


class SimulationError(RuntimeError):
    pass


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    kind: Kind = "ramped_ar1"
    n: int = 300
    seed: int = 0
    phi0: float = 0.3
    phi1: float = 0.97
    sigma: float = 0.1
    tip_prop: float = 0.9
    jump: float = 1.0
    post_tip_noise: float = 0.1
    # fold bifurcation only
    dt: float = 0.01
    substeps: int = 10
    a0: float = 1.5
    a1: float = 0.3
    c: float = 0.25
    x0: float | None = None
    tail: int = 10

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise SimConfigError(f"unknown kind {self.kind!r}")
        if self.n < 3:
            raise SimConfigError(f"n must be >= 3, got {self.n}")
        if not self.sigma >= 0:
            raise SimConfigError("sigma must be non-negative")
        if not -1.0 < self.phi0 < 1.0:
            raise SimConfigError(f"phi0 must lie in (-1, 1), got {self.phi0}")
        if self.kind == "ramped_ar1":
            if not self.phi0 <= self.phi1 < 1.0:
                raise SimConfigError(f"phi1 must lie in [phi0, 1), got {self.phi1}")
        if self.kind != "stationary_ar1" and not 0.0 < self.tip_prop < 1.0:
            raise SimConfigError(f"tip_prop must lie in (0, 1), got {self.tip_prop}")
        if self.kind == "fold_bifurcation":
            if not self.dt > 0 or self.substeps < 1:
                raise SimConfigError("dt must be positive and substeps >= 1")


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def tip_index(n: int, tip_prop: float) -> int:
    """Ground-truth tip position, kept strictly inside ``[1, n - 2]``."""
    return min(max(int(round(tip_prop * n)), 1), n - 2)


def _ar1_path(phi: np.ndarray, noise: np.ndarray, x_start: float = 0.0) -> np.ndarray:
    x = np.empty(noise.size)
    prev = x_start
    for t in range(noise.size):
        prev = phi[t] * prev + noise[t]
        x[t] = prev
    return x


def gen_stationary_ar1(config: SimConfig) -> np.ndarray:
    config.validate()
    rng = rng_for(config.seed)
    eps = config.sigma * rng.standard_normal(BURN_IN + config.n)
    phi = np.full(eps.size, config.phi0)
    return _ar1_path(phi, eps)[BURN_IN:]


def gen_ramped_ar1(config: SimConfig) -> tuple[np.ndarray, int]:
    """Return ``(series, tip)``; the first post-tip value is ``series[tip]``."""
    config.validate()
    rng = rng_for(config.seed)
    n = config.n
    tip = tip_index(n, config.tip_prop)
    eps = config.sigma * rng.standard_normal(BURN_IN + tip)
    phi = np.concatenate(
        (np.full(BURN_IN, config.phi0), np.linspace(config.phi0, config.phi1, tip))
    )
    pre = _ar1_path(phi, eps)[BURN_IN:]
    level = config.jump
    post = level + config.post_tip_noise * config.sigma * rng.standard_normal(n - tip)
    return np.concatenate((pre, post)), tip


def fold_roots(a: float, c: float) -> np.ndarray:
    """Real roots of ``a x - x**3 + c``, ascending."""
    r = np.roots([-1.0, 0.0, a, c])
    real = np.sort(r[np.abs(r.imag) < 1e-9].real)
    return real


def fold_threshold(a: float, c: float) -> float:
    """Position of the barrier separating the lower well from the rest.

    With three equilibria this is the middle (unstable) root. Past the fold
    only one root is left; the barrier is then the ghost of the saddle-node,
    the local minimum of the drift at ``-sqrt(a/3)`` (or 0 for ``a <= 0``).
    """
    roots = fold_roots(a, c)
    if roots.size == 3:
        return float(roots[1])
    return -math.sqrt(a / 3.0) if a > 0 else 0.0


def integrate_fold(
    x0: float,
    a_steps: np.ndarray,
    c: float,
    sigma: float,
    dt: float,
    dw: np.ndarray,
) -> np.ndarray:
    """Euler-Maruyama path for per-step control values and Wiener increments.

    ``dw`` holds increments already scaled by ``sqrt(dt)``. Returns the
    state after each step.
    """
    x = np.empty(dw.size)
    cur = float(x0)
    for k in range(dw.size):
        a = a_steps[k]
        cur = cur + (a * cur - cur * cur * cur + c) * dt + sigma * dw[k]
        if not abs(cur) <= DIVERGENCE_LIMIT:
            raise SimulationError(f"fold integration diverged at step {k} (x={cur!r})")
        x[k] = cur
    return x


def gen_fold_bifurcation(config: SimConfig) -> tuple[np.ndarray, int]:
    """Return ``(series, tip)`` with the series truncated ``tail`` points after the tip.

    Observations are taken every ``substeps`` integration steps. The tip is
    the first observation lying above the barrier between the lower well
    and the saddle at that observation's control value.
    """
    config.validate()
    rng = rng_for(config.seed)
    n, m = config.n, config.substeps
    steps = n * m
    a_steps = np.linspace(config.a0, config.a1, steps)
    if config.x0 is None:
        roots = fold_roots(config.a0, config.c)
        x0 = float(roots[0])
    else:
        x0 = config.x0
    dw = math.sqrt(config.dt) * rng.standard_normal(steps)
    path = integrate_fold(x0, a_steps, config.c, config.sigma, config.dt, dw)
    obs = path[m - 1 :: m]
    a_obs = a_steps[m - 1 :: m]
    tip = None
    for i in range(n):
        if obs[i] > fold_threshold(a_obs[i], config.c):
            tip = i
            break
    if tip is None:
        raise SimulationError("no transition within the simulated horizon; lower a1 or extend n")
    if tip < 1:
        raise SimulationError("transition at the first observation; the start is not in the lower well")
    if tip >= n - 1:
        raise SimulationError("transition at the last observation; extend n")
    end = min(tip + max(config.tail, 1) + 1, n)
    return obs[:end], tip


def generate(config: SimConfig) -> tuple[np.ndarray, int | None]:
    if config.kind == "stationary_ar1":
        return gen_stationary_ar1(config), None
    if config.kind == "ramped_ar1":
        return gen_ramped_ar1(config)
    if config.kind == "fold_bifurcation":
        return gen_fold_bifurcation(config)
    raise SimConfigError(f"unknown kind {config.kind!r}")


# --- benchmark --------------------------------------------------------------


@dataclass
class BenchResult:
    n_runs: int
    hit_rate: float
    false_positive_rate: float
    mean_lead_prop: float | None
    per_metric_hit_rates: dict[str, float]
    per_metric_false_positive_rates: dict[str, float] = field(default_factory=dict)
    second_half_fraction: float | None = None
    n_skipped: int = 0
    tipping_kind: str = "ramped_ar1"
    seeds: dict = field(default_factory=dict)


def ensemble_seeds(master_seed: int, n_runs: int) -> tuple[list[int], list[int]]:
    """Disjoint seed lists for the tipping and the null ensemble."""
    ss = np.random.SeedSequence(master_seed)
    tip_ss, null_ss = ss.spawn(2)
    tip = [int(s.generate_state(1, np.uint64)[0]) for s in tip_ss.spawn(n_runs)]
    null = [int(s.generate_state(1, np.uint64)[0]) for s in null_ss.spawn(n_runs)]
    return tip, null


def run_benchmark(
    window_config=None,
    detection_config=None,
    tipping: SimConfig | None = None,
    null: SimConfig | None = None,
    n_runs: int = 100,
    seed: int = 0,
) -> BenchResult:
    """Detector hit rate on tipping runs versus detection rate on null runs.

    A hit is a tipping run with its first detection strictly before the
    ground-truth tip; any detection on a null run is a false positive.
    """
    from .detection import DetectionConfig, build_report
    from .indicators import METRICS, SeriesTooShortError, WindowConfig, expanding_indicators

    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    wcfg = window_config or WindowConfig()
    dcfg = detection_config or DetectionConfig()
    tipping = tipping or SimConfig(kind="ramped_ar1")
    null = null or SimConfig(kind="stationary_ar1", phi0=tipping.phi0, n=tipping.n, sigma=tipping.sigma)
    tip_seeds, null_seeds = ensemble_seeds(seed, n_runs)

    hits = 0
    leads = []
    metric_hits = dict.fromkeys(METRICS, 0)
    first_half = second_half = 0
    skipped = 0
    for s in tip_seeds:
        try:
            x, tip = generate(replace(tipping, seed=s))
            ind = expanding_indicators(x, wcfg)
        except (SimulationError, SeriesTooShortError):
            skipped += 1
            continue
        rep = build_report("sim", ind, dcfg)
        first_half += rep.half_counts[0]
        second_half += rep.half_counts[1]
        pre = [b for b in rep.warnings if b.start_idx < tip]
        if pre:
            hits += 1
            first = min(b.start_idx for b in pre)
            leads.append(tip / (x.size - 1) - first / (x.size - 1))
            for m in {b.metric for b in pre}:
                metric_hits[m] += 1
    valid = n_runs - skipped

    false_pos = 0
    metric_fp = dict.fromkeys(METRICS, 0)
    for s in null_seeds:
        x, _ = generate(replace(null, seed=s))
        rep = build_report("null", expanding_indicators(x, wcfg), dcfg)
        false_pos += rep.detected
        for m in {b.metric for b in rep.warnings}:
            metric_fp[m] += 1

    warned = first_half + second_half
    return BenchResult(
        n_runs=n_runs,
        hit_rate=hits / valid if valid else 0.0,
        false_positive_rate=false_pos / n_runs,
        mean_lead_prop=float(np.mean(leads)) if leads else None,
        per_metric_hit_rates={m: (metric_hits[m] / valid if valid else 0.0) for m in METRICS},
        per_metric_false_positive_rates={m: metric_fp[m] / n_runs for m in METRICS},
        second_half_fraction=second_half / warned if warned else None,
        n_skipped=skipped,
        tipping_kind=tipping.kind,
        seeds={"master": seed, "tipping": tip_seeds, "null": null_seeds},
    )
