"""
Sweep presets for satsec.
Named parameter sweeps that reproduce each published figure at desk scale,
plus the runner that evaluates them and the CSV writer.
"""

import csv
import io
import logging
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from config_handler import (
    ENGINES,
    ConfigError,
    ScenarioConfig,
    SweepConfig,
    db_to_linear,
    series_control,
)
from montecarlo import RngSpec, estimate_ip
from secrecy import (
    SecrecyScenario,
    classify_case,
    intercept_probability,
    intercept_probability_asymptotic,
    intercept_probability_reference,
    with_legit_snr,
)
from specfun import SatsecError, SeriesControl

log = logging.getLogger("satsec.sweep")

# Short engine names accepted on the command line
ENGINE_ALIASES = {
    "cf": "closed_form",
    "quad": "quadrature_reference",
    "mc": "monte_carlo",
    "asym": "asymptotic",
}

CSV_COLUMNS = (
    "swept_param", "variant", "value", "value_db", "engine", "ip", "std_error",
    "case_fired", "series_terms_max", "truncated", "runtime_ms", "error",
)

# Operating point of the node-placement comparison
CASE1_OFFSETS = {"offset_legit": 5e-4, "offset_eve": 6.66e-4}
CASE2_OFFSETS = {"offset_legit": 3e-3, "offset_eve": 6.66e-4}


def resolve_engines(names) -> tuple:
    """Map CLI shorthands to engine names, keeping order and dropping repeats."""
    resolved = []
    for name in names:
        name = name.strip()
        engine = ENGINE_ALIASES.get(name, name)
        if engine not in ENGINES:
            raise ConfigError("engines", f"unknown engine {name!r}")
        if engine not in resolved:
            resolved.append(engine)
    if not resolved:
        raise ConfigError("engines", "at least one engine is required")
    return tuple(resolved)


def is_db_key(key: str) -> bool:
    return key.endswith("_db") or key.endswith("_dbi")


@dataclass(frozen=True)
class Variant:
    """One curve of a sweep: fixed overrides applied on top of the base scenario."""
    label: str = ""
    overrides: dict = field(default_factory=dict)

    # When set, the legitimate RF SNR tracks epsilon * mu1
    epsilon: Optional[float] = None


@dataclass(frozen=True)
class SweepSpec:
    """A parameter sweep and the engines to run at each point."""
    name: str
    swept_parameter: str
    values: tuple
    engines: tuple = ("closed_form",)
    mc_samples: int = 200_000
    description: str = ""

    # Keys that move together with the swept one
    linked: tuple = ()

    # Applied to every variant
    base_overrides: dict = field(default_factory=dict)
    variants: tuple = (Variant(),)

    def __post_init__(self):
        if not self.values:
            raise ConfigError("values", f"sweep {self.name!r} has no values")
        if not self.engines:
            raise ConfigError("engines", f"sweep {self.name!r} has no engines")
        object.__setattr__(self, "engines", resolve_engines(self.engines))
        if self.mc_samples < 1:
            raise ConfigError("mc_samples", f"must be positive, got {self.mc_samples}")

    def with_run_options(self, engines=None, mc_samples: Optional[int] = None) -> "SweepSpec":
        changes = {}
        if engines:
            changes["engines"] = resolve_engines(engines)
        if mc_samples is not None:
            changes["mc_samples"] = mc_samples
        return replace(self, **changes) if changes else self

    def overrides_summary(self) -> str:
        parts = [f"{k}={v}" for k, v in self.base_overrides.items()]
        labels = [v.label for v in self.variants if v.label]
        if labels:
            parts.append(f"variants: {', '.join(labels)}")
        return "; ".join(parts) or "none"

    def points(self):
        """(variant index, value index, variant, value) in output order."""
        for vi, variant in enumerate(self.variants):
            for xi, value in enumerate(self.values):
                yield vi, xi, variant, value


def _offsets_variants() -> tuple:
    return tuple(
        Variant(f"{mode}_{case}", {"precoding": mode, **offsets})
        for case, offsets in (("case1", CASE1_OFFSETS), ("case2", CASE2_OFFSETS))
        for mode in ("zf", "nzf")
    )


PRESETS = {
    "fig3_K_sweep": SweepSpec(
        name="fig3_K_sweep",
        description="IP versus the number of satellite apertures K",
        swept_parameter="num_apertures",
        values=(1, 3, 5, 7, 8),
    ),
    "fig4_gain_sweep": SweepSpec(
        name="fig4_gain_sweep",
        description="IP versus the legitimate receive antenna gain",
        swept_parameter="rx_gain_legit_dbi",
        values=(30.0, 35.0, 40.0, 45.0, 50.0),
    ),
    "fig5_omega_s": SweepSpec(
        name="fig5_omega_s",
        description="Non-ZF IP versus the legitimate LOS power for several multipath powers",
        swept_parameter="omega_s_legit",
        values=(1.0, 2.0, 3.0, 4.0, 5.0),
        engines=("closed_form", "monte_carlo"),
        base_overrides={"precoding": "nzf", "b_eve": 1.0, "psat_legit_db": 40.0, "psat_eve_db": 40.0},
        variants=tuple(Variant(f"b_legit={b}", {"b_legit": b}) for b in (0.7, 1.4, 2.8)),
    ),
    "fig6_power_split": SweepSpec(
        name="fig6_power_split",
        description="ZF IP versus the satellite's share of the optical power",
        swept_parameter="omega_legit",
        values=(0.1, 0.3, 0.5, 0.7, 0.9),
        base_overrides={"psat_legit_db": 40.0, "psat_eve_db": 40.0},
        variants=tuple(
            Variant(f"ps_sigma_legit_db={p}", {"ps_sigma_legit_db": p, "ps_sigma_eve_db": p - 20.0})
            for p in (50.0, 60.0, 70.0)
        ),
    ),
    "fig7_8_zf_vs_nzf_cases": SweepSpec(
        name="fig7_8_zf_vs_nzf_cases",
        description="ZF against non-ZF IP versus P_SAT for both node placements",
        swept_parameter="psat_legit_db",
        values=(10.0, 20.0, 30.0, 40.0, 50.0),
        linked=("psat_eve_db",),
        engines=("closed_form", "monte_carlo"),
        base_overrides={"ps_sigma_legit_db": 30.0, "ps_sigma_eve_db": 30.0},
        variants=_offsets_variants(),
    ),
    "fig9_asymptotic": SweepSpec(
        name="fig9_asymptotic",
        description="Exact and asymptotic ZF IP versus mu1 along gamma_bar_l = epsilon * mu1",
        swept_parameter="ps_sigma_legit_db",
        values=(40.0, 50.0, 60.0, 70.0, 80.0),
        engines=("closed_form", "asymptotic"),
        base_overrides={"ps_sigma_eve_db": 30.0, "psat_eve_db": 30.0},
        variants=tuple(Variant(f"epsilon={e}", epsilon=e) for e in (0.5, 1.0, 2.0)),
    ),
    "fig10_offset_sweep": SweepSpec(
        name="fig10_offset_sweep",
        description="IP versus the eavesdropper's offset from its beam boresight",
        swept_parameter="offset_eve",
        values=(2e-4, 6.66e-4, 1e-3, 2e-3, 3e-3),
        engines=("closed_form", "monte_carlo"),
        base_overrides={"offset_legit": 5e-4, "ps_sigma_legit_db": 30.0, "ps_sigma_eve_db": 30.0},
        variants=(Variant("zf", {"precoding": "zf"}), Variant("nzf", {"precoding": "nzf"})),
    ),
    "fig11_beamwidth_sweep": SweepSpec(
        name="fig11_beamwidth_sweep",
        description="IP versus the 3 dB beam angle",
        swept_parameter="half_power_angle_deg",
        values=(0.2, 0.3, 0.4, 0.5, 0.6),
        engines=("closed_form", "monte_carlo"),
        base_overrides={"offset_legit": 5e-4, "ps_sigma_legit_db": 30.0, "ps_sigma_eve_db": 30.0},
        variants=(Variant("zf", {"precoding": "zf"}), Variant("nzf", {"precoding": "nzf"})),
    ),
}


def list_presets() -> list:
    """(name, description, overrides) for every preset."""
    return [(name, spec.description, spec.overrides_summary()) for name, spec in PRESETS.items()]


def sweep_from_config(sweep: SweepConfig, preset: Optional[str] = None) -> SweepSpec:
    """
    Resolve the [sweep] section, or an explicit preset name, to a SweepSpec.

    A preset keeps its own engines unless the section lists others.
    """
    name = preset or sweep.preset
    explicit_engines = sweep.engines != SweepConfig().engines
    if name:
        if name not in PRESETS:
            raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
        spec = PRESETS[name]
        return spec.with_run_options(
            engines=sweep.engines if explicit_engines else None,
            mc_samples=sweep.mc_samples,
        )
    if not sweep.swept_parameter:
        raise ConfigError("swept_parameter", "custom sweeps need swept_parameter and values")
    return SweepSpec(
        name="custom",
        swept_parameter=sweep.swept_parameter,
        values=tuple(sweep.values),
        engines=tuple(sweep.engines),
        mc_samples=sweep.mc_samples,
    )


@dataclass
class SweepRow:
    """One (value, engine) result."""
    swept_param: str
    variant: str
    value: float
    value_db: Optional[float]
    engine: str
    ip: float = math.nan
    std_error: Optional[float] = None
    case_fired: str = ""
    series_terms_max: Optional[int] = None
    truncated: Optional[bool] = None
    runtime_ms: float = 0.0
    error: str = ""

    # Engine extras that have no CSV column (coding gain, diversity order, ...)
    extras: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return bool(self.error)


def point_config(base: ScenarioConfig, spec: SweepSpec, variant: Variant, value) -> ScenarioConfig:
    changes = dict(spec.base_overrides)
    changes.update(variant.overrides)
    changes[spec.swept_parameter] = value
    for key in spec.linked:
        changes[key] = value
    return base.with_changes(**changes)


def point_scenario(cfg: ScenarioConfig, variant: Variant) -> SecrecyScenario:
    scenario = cfg.build()
    if variant.epsilon is not None:
        scenario = with_legit_snr(scenario, scenario.fso_legit.mu, variant.epsilon)
    return scenario


def _run_engine(engine: str, scenario: SecrecyScenario, row: SweepRow, spec: SweepSpec,
                rng: RngSpec, ctrl: SeriesControl):
    if engine == "closed_form":
        result = intercept_probability(scenario, ctrl)
        row.ip, row.case_fired = result.ip, result.case_fired.value
        row.series_terms_max = result.diagnostics.series_terms_max
        row.truncated = result.diagnostics.any_truncated
    elif engine == "quadrature_reference":
        result = intercept_probability_reference(scenario, ctrl)
        row.ip, row.case_fired = result.ip, result.case_fired.value
    elif engine == "monte_carlo":
        estimate = estimate_ip(scenario, spec.mc_samples, rng)
        row.ip, row.std_error = estimate.value, estimate.std_error
        row.case_fired = classify_case(scenario).value
    elif engine == "asymptotic":
        result = intercept_probability_asymptotic(scenario, ctrl)
        row.ip = result.ip_at(scenario.fso_legit.mu)
        row.case_fired = classify_case(scenario).value
        row.extras.update(coding_gain=result.coding_gain, snr_coding_gain=result.snr_coding_gain,
                          diversity_order=result.diversity_order)
        log.info(f"{row.variant or spec.name} at {row.value!r}: G_c={result.coding_gain:.6g} "
                 f"G_d={result.diversity_order:.6g}")
    else:
        raise ConfigError("engines", f"unknown engine {engine!r}")


def _evaluate_point(base: ScenarioConfig, spec: SweepSpec, seed: int, ctrl: SeriesControl,
                    point) -> list:
    vi, xi, variant, value = point
    db = is_db_key(spec.swept_parameter)
    rows = [
        SweepRow(
            swept_param=spec.swept_parameter,
            variant=variant.label,
            value=db_to_linear(value) if db else value,
            value_db=value if db else None,
            engine=engine,
        )
        for engine in spec.engines
    ]
    try:
        scenario = point_scenario(point_config(base, spec, variant, value), variant)
    except SatsecError as e:
        log.error(f"{spec.name} [{variant.label}] {spec.swept_parameter}={value!r}: {e}")
        for row in rows:
            row.error = str(e)
        return rows

    rng = RngSpec(seed, stream=(vi, xi))
    for row in rows:
        start = time.perf_counter()
        try:
            _run_engine(row.engine, scenario, row, spec, rng, ctrl)
        except SatsecError as e:
            row.ip, row.error = math.nan, str(e)
            log.error(f"{spec.name} [{variant.label}] {spec.swept_parameter}={value!r} {row.engine}: {e}")
        except Exception as e:
            row.ip, row.error = math.nan, f"{type(e).__name__}: {e}"
            log.exception(f"{spec.name} [{variant.label}] {spec.swept_parameter}={value!r} {row.engine} crashed")
        row.runtime_ms = (time.perf_counter() - start) * 1e3
    return rows


def run_sweep(spec: SweepSpec, base: Optional[ScenarioConfig] = None, seed: int = 0,
              jobs: int = 1, ctrl: Optional[SeriesControl] = None) -> list[SweepRow]:
    """
    Evaluate every (variant, value, engine) combination.

    Rows come back in input order whatever ``jobs`` is. Engine failures
    are recorded on their row and never stop the sweep.
    """
    base = base or ScenarioConfig()
    ctrl = ctrl or series_control()
    points = list(spec.points())
    log.info(f"Running {spec.name}: {len(points)} points x {len(spec.engines)} engines, jobs={jobs}")

    def evaluate(point):
        return _evaluate_point(base, spec, seed, ctrl, point)

    if jobs <= 1:
        chunks = [evaluate(p) for p in points]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(evaluate, points))
    rows = [row for chunk in chunks for row in chunk]
    failed = sum(row.failed for row in rows)
    if failed:
        log.warning(f"{spec.name}: {failed} of {len(rows)} rows failed")
    return rows


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(rows: list[SweepRow], timings: bool = False) -> str:
    """
    CSV text of a sweep table.

    runtime_ms is left empty unless ``timings`` is set, so identical runs
    produce identical bytes.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        record = {name: getattr(row, name) for name in CSV_COLUMNS}
        if not timings:
            record["runtime_ms"] = None
        writer.writerow([_cell(record[name]) for name in CSV_COLUMNS])
    return buffer.getvalue()


def emit_csv(rows: list[SweepRow], path: Union[Path, str], timings: bool = False) -> None:
    """Write the table to ``path`` ("-" for stdout) with an atomic replace."""
    if not rows:
        raise ValueError("cannot emit an empty sweep table")
    text = render_csv(rows, timings)
    if str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return

    path = Path(path)
    fd, temp_path = tempfile.mkstemp(suffix='.csv', prefix='satsec_', dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        Path(temp_path).replace(path)
    except Exception:
        try:
            os.unlink(temp_path)
        except OSError:
            pass
        raise
    log.info(f"Wrote {len(rows)} rows to {path}")
