"""
Monte Carlo oracle for satsec.
Samples every link from its physical construction and counts intercepts
directly, without any of the closed-form machinery.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Sequence, Union

import numpy as np
from scipy import stats

from channel import ShadowedRicianParams, TurbulenceParams
from secrecy import SecrecyScenario, secrecy_capacity_components
from specfun import DomainError

# Module logger
log = logging.getLogger("satsec.montecarlo")

# Below this many trials the standard error is not trusted
MIN_SAMPLES = 1000

# Trials per substream; fixed so results do not depend on the worker count
BLOCK_SIZE = 50_000

EVENT_NAMES = ("E1", "E2", "E3", "E4", "E5", "E6")


@dataclass(frozen=True)
class RngSpec:
    """Seed and generator of a reproducible, splittable random stream."""
    seed: int = 0

    # Counter-based generator with a 2^256 period
    algorithm: str = "philox"

    # Spawn-key prefix; sweeps give every point its own stream
    stream: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.algorithm != "philox":
            raise DomainError(f"unsupported generator {self.algorithm!r}")

    def generator(self, *stream) -> np.random.Generator:
        """Independent generator for the substream identified by ``stream``."""
        key = tuple(int(s) for s in self.stream + stream)
        seq = np.random.SeedSequence(int(self.seed), spawn_key=key)
        return np.random.Generator(np.random.Philox(seq))


def _as_spec(rng: Union[RngSpec, int, None]) -> RngSpec:
    if isinstance(rng, RngSpec):
        return rng
    return RngSpec(0 if rng is None else int(rng))


@dataclass
class McEstimate:
    """Proportion estimate with its binomial standard error."""
    value: float
    std_error: float
    n_samples: int
    elapsed: float = 0.0

    @classmethod
    def from_count(cls, hits: int, n: int, elapsed: float = 0.0) -> "McEstimate":
        p = hits / n
        return cls(p, math.sqrt(p * (1.0 - p) / n), n, elapsed)


def sample_gg_pe(p: TurbulenceParams, rng: np.random.Generator, size=None):
    """
    Draw SNRs of a Gamma-Gamma channel with pointing errors.

    Irradiance is the product of two unit-mean Gamma variates and a
    pointing loss U^(1/xi^2); the electrical SNR is
    mu * ((xi^2 + 1) / xi^2)^r * I^r.
    """
    large = rng.gamma(p.alpha, 1.0 / p.alpha, size)
    small = rng.gamma(p.beta, 1.0 / p.beta, size)
    pointing = rng.random(size) ** (1.0 / p.xi2)
    r = p.detection_order
    return p.mu * ((p.xi2 + 1.0) / p.xi2) ** r * (large * small * pointing) ** r


def sample_shadowed_rician(p: ShadowedRicianParams, rng: np.random.Generator, size=None):
    """Draw gamma_bar * |h|^2 with h = scatter + Nakagami-shadowed line of sight."""
    scatter = rng.normal(0.0, math.sqrt(p.b), size) + 1j * rng.normal(0.0, math.sqrt(p.b), size)
    los_power = rng.gamma(p.m_s, p.omega / p.m_s, size)
    phase = rng.uniform(0.0, 2.0 * math.pi, size)
    h = np.sqrt(los_power) * np.exp(1j * phase) + scatter
    return p.gamma_bar * np.abs(h) ** 2


@dataclass
class _Trials:
    """SNRs of one block of end-to-end trials."""
    gamma1: np.ndarray
    gamma1e: np.ndarray
    gamma_l: np.ndarray
    gamma_e: np.ndarray


def _draw_trials(scenario: SecrecyScenario, rng: np.random.Generator, size: int) -> _Trials:
    branches = sample_gg_pe(scenario.fso_legit, rng, (size, scenario.num_apertures))
    gamma1e = sample_gg_pe(scenario.fso_eve, rng, size)
    x_l = sample_shadowed_rician(scenario.rf_legit, rng, size)
    x_e = sample_shadowed_rician(scenario.rf_eve, rng, size)
    legit, eve = scenario.legit_sinr(), scenario.eve_sinr()
    return _Trials(
        gamma1=branches.max(axis=1),
        gamma1e=gamma1e,
        gamma_l=legit.gain * x_l / (legit.interference * x_l + 1.0),
        gamma_e=eve.gain * x_e / (eve.interference * x_e + 1.0),
    )


def _blocks(n: int) -> list:
    sizes = [BLOCK_SIZE] * (n // BLOCK_SIZE)
    if n % BLOCK_SIZE:
        sizes.append(n % BLOCK_SIZE)
    return sizes


def _run_blocks(count_block: Callable, n: int, spec: RngSpec, jobs: int) -> list:
    """Run count_block(block_index, generator, size) over every block, in block order."""
    sizes = _blocks(n)
    tasks = [(b, spec.generator(b), size) for b, size in enumerate(sizes)]
    if jobs <= 1 or len(tasks) == 1:
        return [count_block(*task) for task in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda task: count_block(*task), tasks))


def _check_samples(n: int):
    if n < 1:
        raise DomainError(f"need at least one trial, got {n}")
    if n < MIN_SAMPLES:
        log.warning(f"Only {n} Monte Carlo trials; the standard error is unreliable")


def estimate_ip(scenario: SecrecyScenario, n: int, rng: Union[RngSpec, int, None] = None,
                jobs: int = 1) -> McEstimate:
    """
    Estimate the intercept probability by direct simulation.

    A trial is intercepted when the combined FSO SNR is below gamma_th or
    the overall secrecy capacity is zero. Results depend only on the seed
    and n, never on ``jobs``.
    """
    _check_samples(n)
    spec = _as_spec(rng)
    th = scenario.gamma_th
    start = time.perf_counter()

    def count_block(_, generator, size):
        trials = _draw_trials(scenario, generator, size)
        *_, cs = secrecy_capacity_components(trials.gamma1, trials.gamma1e,
                                             trials.gamma_l, trials.gamma_e)
        return int(np.count_nonzero((trials.gamma1 < th) | (cs <= 0.0)))

    hits = sum(_run_blocks(count_block, n, spec, jobs))
    estimate = McEstimate.from_count(hits, n, time.perf_counter() - start)
    log.debug(f"MC intercept estimate {estimate.value:.6g} +/- {estimate.std_error:.2g} over {n} trials")
    return estimate


@dataclass
class EventPartition:
    """
    Secure trials split by the ordering of gamma1e, gamma_e and gamma_th.

    A trial is secure when gamma1 exceeds gamma_th, gamma1e and gamma_e
    and gamma_l exceeds gamma_e; the six orderings of the remaining three
    quantities partition that event.
    """
    # Trial counts per event plus "secure"
    counts: Dict[str, int] = field(default_factory=dict)
    n_samples: int = 0

    @property
    def events(self) -> Dict[str, McEstimate]:
        return {name: McEstimate.from_count(self.counts[name], self.n_samples) for name in EVENT_NAMES}

    @property
    def secure(self) -> McEstimate:
        return McEstimate.from_count(self.counts["secure"], self.n_samples)

    def total(self) -> McEstimate:
        return McEstimate.from_count(sum(self.counts[name] for name in EVENT_NAMES), self.n_samples)

    def below_threshold(self) -> McEstimate:
        """E3 + E4 + E6: secure trials whose RF eavesdropper SINR is below gamma_th."""
        return McEstimate.from_count(sum(self.counts[k] for k in ("E3", "E4", "E6")), self.n_samples)


def estimate_event_partition(scenario: SecrecyScenario, n: int,
                             rng: Union[RngSpec, int, None] = None,
                             jobs: int = 1) -> EventPartition:
    _check_samples(n)
    spec = _as_spec(rng)
    th = scenario.gamma_th

    def count_block(_, generator, size):
        t = _draw_trials(scenario, generator, size)
        secure = (t.gamma1 > th) & (t.gamma1 > t.gamma1e) & (t.gamma1 > t.gamma_e) & (t.gamma_l > t.gamma_e)
        g1e, ge = t.gamma1e, t.gamma_e
        masks = {
            "E1": (g1e > ge) & (ge > th),
            "E2": (ge > g1e) & (g1e > th),
            "E3": (th > ge) & (ge > g1e),
            "E4": (th > g1e) & (g1e > ge),
            "E5": (ge > th) & (th > g1e),
            "E6": (g1e > th) & (th > ge),
        }
        counts = {name: int(np.count_nonzero(secure & mask)) for name, mask in masks.items()}
        counts["secure"] = int(np.count_nonzero(secure))
        return counts

    totals = {name: 0 for name in EVENT_NAMES + ("secure",)}
    for counts in _run_blocks(count_block, n, spec, jobs):
        for name, value in counts.items():
            totals[name] += value
    return EventPartition(counts=totals, n_samples=n)


def empirical_cdf(sampler: Callable, n: int, grid: Sequence[float],
                  rng: Union[RngSpec, int, None] = None) -> list:
    """
    Empirical CDF of n fresh draws at each grid point.

    ``sampler(generator, size)`` returns an array of draws.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise DomainError("grid must be sorted ascending")
    draws = np.sort(np.asarray(sampler(_as_spec(rng).generator(0), n), dtype=float))
    counts = np.searchsorted(draws, grid, side="right")
    return [(float(z), c / n) for z, c in zip(grid, counts)]


def ks_distance(draws: np.ndarray, cdf: Callable) -> float:
    """Kolmogorov-Smirnov distance between draws and a scalar CDF."""
    return float(stats.kstest(np.asarray(draws, dtype=float), np.vectorize(cdf)).statistic)
