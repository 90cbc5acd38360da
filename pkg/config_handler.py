"""
Configuration handling for satsec.

Scenario parameters live in a flat key-value file, either INI with
[scenario] and [sweep] sections or JSON with the same two objects. Every
key has a default taken from the reference operating point, so an empty
file is a valid configuration. SNR and gain keys are in dB; the linear
values only appear once build() assembles a SecrecyScenario.
"""

import configparser
import io
import json
import logging
import math
import os
import tempfile
import typing
from dataclasses import dataclass, field, fields, asdict, replace
from pathlib import Path
from typing import Any, Optional

from channel import (
    FsoUplinkProfile,
    NodeClass,
    RfGeometry,
    ShadowedRicianParams,
    TurbulenceParams,
    build_v_matrix,
    derive_turbulence,
    make_precoding_context,
)
from secrecy import PrecodingMode, SecrecyScenario
from specfun import DEFAULT_CONTROL, SatsecError, SeriesControl

# Module logger
log = logging.getLogger("satsec.config")

MAX_TERMS_ENV = "SATSEC_MAX_TERMS"

SCENARIO_SECTION = "scenario"
SWEEP_SECTION = "sweep"

ENGINES = ("closed_form", "quadrature_reference", "monte_carlo", "asymptotic")


class ConfigError(SatsecError, ValueError):
    """Invalid configuration; always names the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


@dataclass
class ScenarioConfig:
    """User-facing scenario parameters."""
    # --- FSO uplink ---
    # Optical wavelength (m)
    wavelength: float = 1550e-9

    # Transmit beam waist W0 (m)
    beam_waist: float = 0.08

    # RMS wind speed (m/s)
    wind_speed: float = 21.0

    # Ground station and satellite altitudes (m)
    ogs_altitude: float = 25.0
    satellite_altitude: float = 6000e3

    # Uplink zenith angle (rad)
    zenith_angle: float = 0.0

    # Ground-level Cn^2 A (m^-2/3)
    ground_refractive_index: float = 1.7e-14

    # Receive aperture radii of the satellite and the eavesdropper (m)
    aperture_radius_legit: float = 0.5
    aperture_radius_eve: float = 1.0

    # Number of satellite apertures K
    num_apertures: int = 3

    # Share of the optical power reaching each receiver
    omega_legit: float = 0.7
    omega_eve: float = 0.3

    # P_S / sigma^2 at the satellite and at the eavesdropper (dB)
    ps_sigma_legit_db: float = 80.0
    ps_sigma_eve_db: float = 60.0

    # 1 = coherent detection, 2 = IM/DD
    detection_order: int = 1

    # Explicit turbulence overrides; None derives them from the profile
    alpha: Optional[float] = None
    beta: Optional[float] = None
    xi2: Optional[float] = None
    alpha_eve: Optional[float] = None
    beta_eve: Optional[float] = None
    xi2_eve: Optional[float] = None

    # --- RF downlink ---
    num_beams: int = 5

    # Carrier frequency (Hz)
    frequency: float = 20e9

    # Receiver noise temperature (K)
    noise_temperature: float = 193.15

    # Bandwidth (Hz)
    bandwidth: float = 50e6

    # Antenna gains (dBi)
    tx_gain_dbi: float = 60.0
    rx_gain_legit_dbi: float = 40.0
    rx_gain_eve_dbi: float = 25.0

    # 3 dB beam angle (degrees)
    half_power_angle_deg: float = 0.4

    # Satellite-to-ground distance and cell diameter (m)
    slant_range: float = 6000e3
    cell_diameter: float = 100e3

    # Node offset from its beam boresight (rad)
    offset_legit: float = 3e-3
    offset_eve: float = 6.66e-4

    # P_SAT / sigma^2 toward the legitimate node and the eavesdropper (dB)
    psat_legit_db: float = 40.0
    psat_eve_db: float = 40.0

    # Shadowed-Rician fading per node class
    b_legit: float = 1.4
    b_eve: float = 1.4
    m_s_legit: int = 2
    m_s_eve: int = 2
    omega_s_legit: float = 3.0
    omega_s_eve: float = 3.0

    # "zf" or "nzf"
    precoding: str = "zf"

    # Beam index of the analysed node pair
    node_index: int = 0

    # Decoding threshold (dB)
    gamma_th_db: float = 20.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if abs(self.omega_legit + self.omega_eve - 1.0) > 1e-12:
            raise ConfigError(
                "omega_eve", f"omega_legit + omega_eve must equal 1, got {self.omega_legit} + {self.omega_eve}"
            )
        if not 0.0 < self.omega_legit < 1.0:
            raise ConfigError("omega_legit", f"must lie in (0, 1), got {self.omega_legit}")
        if self.precoding not in {m.value for m in PrecodingMode}:
            raise ConfigError("precoding", f"expected 'zf' or 'nzf', got {self.precoding!r}")
        if self.num_apertures < 1:
            raise ConfigError("num_apertures", f"need at least one aperture, got {self.num_apertures}")
        if self.num_beams < 1:
            raise ConfigError("num_beams", f"need at least one beam, got {self.num_beams}")
        if not 0 <= self.node_index < self.num_beams:
            raise ConfigError("node_index", f"{self.node_index} outside 0..{self.num_beams - 1}")
        if self.detection_order not in (1, 2):
            raise ConfigError("detection_order", f"must be 1 or 2, got {self.detection_order}")

    def with_changes(self, **changes) -> "ScenarioConfig":
        """Copy with some keys replaced; a lone power-split share gets its complement."""
        for key in changes:
            if key not in _scenario_fields():
                raise ConfigError(key, "unknown scenario key")
        changes = {key: _coerce(key, value, _scenario_fields()[key]) for key, value in changes.items()}
        _fill_omega_complement(changes)
        return replace(self, **changes)

    @property
    def mode(self) -> PrecodingMode:
        return PrecodingMode(self.precoding)

    @property
    def gamma_th(self) -> float:
        return db_to_linear(self.gamma_th_db)

    def fso_profile(self, node_class: NodeClass) -> FsoUplinkProfile:
        legit = node_class is NodeClass.LEGITIMATE
        return FsoUplinkProfile(
            wavelength=self.wavelength,
            ogs_altitude=self.ogs_altitude,
            satellite_altitude=self.satellite_altitude,
            zenith_angle=self.zenith_angle,
            wind_speed=self.wind_speed,
            ground_refractive_index=self.ground_refractive_index,
            beam_waist=self.beam_waist,
            aperture_radius=self.aperture_radius_legit if legit else self.aperture_radius_eve,
            omega_legit=self.omega_legit,
            omega_eve=self.omega_eve,
            detection_order=self.detection_order,
            num_apertures=self.num_apertures,
        )

    def rf_geometry(self) -> RfGeometry:
        n = self.num_beams
        return RfGeometry(
            num_beams=n,
            frequency=self.frequency,
            noise_temperature=self.noise_temperature,
            bandwidth=self.bandwidth,
            tx_gain=db_to_linear(self.tx_gain_dbi),
            rx_gain_legit=db_to_linear(self.rx_gain_legit_dbi),
            rx_gain_eve=db_to_linear(self.rx_gain_eve_dbi),
            slant_range=self.slant_range,
            cell_diameter=self.cell_diameter,
            half_power_angle=math.radians(self.half_power_angle_deg),
            offsets_legit=(self.offset_legit,) * n,
            offsets_eve=(self.offset_eve,) * n,
        )

    def _turbulence(self, node_class: NodeClass):
        legit = node_class is NodeClass.LEGITIMATE
        share, snr_db = (
            (self.omega_legit, self.ps_sigma_legit_db) if legit else (self.omega_eve, self.ps_sigma_eve_db)
        )
        overrides = (self.alpha, self.beta, self.xi2) if legit else (self.alpha_eve, self.beta_eve, self.xi2_eve)
        mu = share * db_to_linear(snr_db)
        names = ("alpha", "beta", "xi2")
        explicit = {name: value for name, value in zip(names, overrides) if value is not None}
        if len(explicit) == 3:
            return TurbulenceParams(mu=mu, detection_order=self.detection_order, **explicit)
        params = derive_turbulence(self.fso_profile(node_class), mu)
        return replace(params, **explicit) if explicit else params

    def build(self) -> SecrecyScenario:
        """Assemble the fully resolved scenario, all quantities linear."""
        geom = self.rf_geometry()
        v_legit = build_v_matrix(geom, NodeClass.LEGITIMATE)
        v_eve = build_v_matrix(geom, NodeClass.EAVESDROPPER)
        p_sat = db_to_linear(self.psat_legit_db)
        ctx = make_precoding_context(v_legit, v_eve, p_sat, self.num_beams)

        if self.mode is PrecodingMode.ZF:
            snr_legit = ctx.power_norm
            snr_eve = ctx.power_norm * db_to_linear(self.psat_eve_db - self.psat_legit_db)
        else:
            snr_legit = p_sat / self.num_beams
            snr_eve = db_to_linear(self.psat_eve_db) / self.num_beams

        scenario = SecrecyScenario(
            fso_legit=self._turbulence(NodeClass.LEGITIMATE),
            fso_eve=self._turbulence(NodeClass.EAVESDROPPER),
            rf_legit=ShadowedRicianParams(self.b_legit, self.m_s_legit, self.omega_s_legit, snr_legit),
            rf_eve=ShadowedRicianParams(self.b_eve, self.m_s_eve, self.omega_s_eve, snr_eve),
            precoding=ctx,
            mode=self.mode,
            gamma_th=self.gamma_th,
            num_apertures=self.num_apertures,
            node_index=self.node_index,
        )
        log.debug(
            f"Built {self.precoding} scenario: mu1={scenario.fso_legit.mu:.4g} "
            f"mu1e={scenario.fso_eve.mu:.4g} gbar_l={snr_legit:.4g} gbar_e={snr_eve:.4g}"
        )
        return scenario


@dataclass
class SweepConfig:
    """The [sweep] section: what to vary and which engines to run."""
    # Named preset; None means a custom sweep over swept_parameter
    preset: Optional[str] = None

    swept_parameter: Optional[str] = None
    values: list[float] = field(default_factory=list)

    engines: list[str] = field(default_factory=lambda: ["closed_form"])

    # Monte Carlo trials per sweep point
    mc_samples: int = 200_000

    # Master seed of every random stream
    seed: int = 0

    # Concurrent sweep points
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        unknown = [e for e in self.engines if e not in ENGINES]
        if unknown:
            raise ConfigError("engines", f"unknown engine(s) {', '.join(unknown)}; expected {', '.join(ENGINES)}")
        if not self.engines:
            raise ConfigError("engines", "at least one engine is required")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples", f"must be positive, got {self.mc_samples}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed", f"must be an unsigned 64-bit integer, got {self.seed}")
        if self.jobs < 1:
            raise ConfigError("jobs", f"must be positive, got {self.jobs}")
        if self.swept_parameter is not None and self.swept_parameter not in _scenario_fields():
            raise ConfigError("swept_parameter", f"{self.swept_parameter!r} is not a scenario key")


def _type_hints(cls) -> dict:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in fields(cls)}


def _scenario_fields() -> dict:
    return _type_hints(ScenarioConfig)


def _sweep_fields() -> dict:
    return _type_hints(SweepConfig)


def _split_list(raw: Any) -> list:
    if isinstance(raw, str):
        return [item.strip() for item in raw.split(",") if item.strip()]
    if isinstance(raw, (list, tuple)):
        return list(raw)
    return [raw]


def _coerce(key: str, raw: Any, hint: Any) -> Any:
    """Convert a raw INI string or JSON value to the field's declared type."""
    origin = typing.get_origin(hint)
    if origin is typing.Union:
        if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none", "null")):
            return None
        inner = [arg for arg in typing.get_args(hint) if arg is not type(None)][0]
        return _coerce(key, raw, inner)
    if origin is list:
        (inner,) = typing.get_args(hint)
        return [_coerce(key, item, inner) for item in _split_list(raw)]
    if raw is None or isinstance(raw, bool):
        raise ConfigError(key, f"expected {getattr(hint, '__name__', hint)}, got {raw!r}")
    try:
        if hint is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
        if hint is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if hint is str:
            return str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected {hint.__name__}, got {raw!r}") from None
    raise ConfigError(key, f"unsupported field type {hint!r}")


def _fill_omega_complement(values: dict) -> None:
    if "omega_legit" in values and "omega_eve" not in values:
        values["omega_eve"] = 1.0 - values["omega_legit"]
    elif "omega_eve" in values and "omega_legit" not in values:
        values["omega_legit"] = 1.0 - values["omega_eve"]


def _parse_section(raw: dict, hints: dict, section: str) -> dict:
    values = {}
    for key, value in raw.items():
        if key not in hints:
            raise ConfigError(key, f"unknown key in [{section}]")
        values[key] = _coerce(key, value, hints[key])
    return values


def _read_raw(path: Path) -> tuple:
    suffix = path.suffix.lower()
    if suffix == ".json":
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(str(path), f"invalid JSON: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(str(path), "top level must be a JSON object")
        extra = set(data) - {SCENARIO_SECTION, SWEEP_SECTION}
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown top-level section")
        scenario, sweep = data.get(SCENARIO_SECTION) or {}, data.get(SWEEP_SECTION) or {}
        if not isinstance(scenario, dict) or not isinstance(sweep, dict):
            raise ConfigError(str(path), "sections must be JSON objects")
        return scenario, sweep

    if suffix in (".ini", ".cfg"):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(path.read_text(encoding='utf-8'), source=str(path))
        except configparser.Error as e:
            raise ConfigError(str(path), f"invalid INI: {e}") from None
        extra = set(parser.sections()) - {SCENARIO_SECTION, SWEEP_SECTION}
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown section")
        scenario = dict(parser[SCENARIO_SECTION]) if parser.has_section(SCENARIO_SECTION) else {}
        sweep = dict(parser[SWEEP_SECTION]) if parser.has_section(SWEEP_SECTION) else {}
        return scenario, sweep

    raise ConfigError(str(path), f"unsupported config format {suffix!r}; use .ini, .cfg or .json")


def load_config(path: Optional[Path] = None) -> tuple[ScenarioConfig, SweepConfig]:
    """
    Load a scenario and sweep configuration.

    Keys absent from the file keep their defaults; ``path=None`` returns
    the defaults outright.
    """
    if path is None:
        return ScenarioConfig(), SweepConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(str(path), "config file not found")

    raw_scenario, raw_sweep = _read_raw(path)
    scenario_values = _parse_section(raw_scenario, _scenario_fields(), SCENARIO_SECTION)
    _fill_omega_complement(scenario_values)
    sweep_values = _parse_section(raw_sweep, _sweep_fields(), SWEEP_SECTION)

    scenario = ScenarioConfig(**scenario_values)
    sweep = SweepConfig(**sweep_values)
    log.info(f"Loaded config from {path} ({len(scenario_values)} scenario keys, {len(sweep_values)} sweep keys)")
    return scenario, sweep


def check_engines(scenario: ScenarioConfig, engines: list[str]) -> None:
    """
    Reject NZF closed-form runs outside the regime the closed form covers.

    The check only applies when no Monte Carlo engine is there to carry
    the sweep.
    """
    if scenario.mode is not PrecodingMode.NZF or "monte_carlo" in engines:
        return
    if "closed_form" not in engines and "asymptotic" not in engines:
        return
    resolved = scenario.build()
    level = resolved.eve_sinr().saturation
    if not level < resolved.gamma_th:
        raise ConfigError(
            "precoding",
            f"NZF closed form needs the eavesdropper SINR saturation ({linear_to_db(level):.2f} dB) "
            f"below gamma_th ({scenario.gamma_th_db} dB); enable the monte_carlo engine",
        )


def series_control() -> SeriesControl:
    """Series truncation policy, honouring the SATSEC_MAX_TERMS override."""
    raw = os.environ.get(MAX_TERMS_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_CONTROL
    try:
        max_terms = int(raw)
    except ValueError:
        raise ConfigError(MAX_TERMS_ENV, f"expected an integer, got {raw!r}") from None
    if max_terms < 1:
        raise ConfigError(MAX_TERMS_ENV, f"must be at least 1, got {max_terms}")
    log.debug(f"{MAX_TERMS_ENV}={max_terms}")
    return replace(DEFAULT_CONTROL, max_terms=max_terms)


def _render(scenario: ScenarioConfig, sweep: SweepConfig, suffix: str) -> str:
    if suffix == ".json":
        return json.dumps({SCENARIO_SECTION: asdict(scenario), SWEEP_SECTION: asdict(sweep)}, indent=2) + "\n"

    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section, data in ((SCENARIO_SECTION, asdict(scenario)), (SWEEP_SECTION, asdict(sweep))):
        parser.add_section(section)
        for key, value in data.items():
            if value is None:
                continue
            if isinstance(value, list):
                value = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            parser.set(section, key, str(value))
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


def save_config(scenario: ScenarioConfig, sweep: SweepConfig, path: Path) -> Path:
    """
    Write a configuration using an atomic replace.

    The format follows the suffix: .json, otherwise INI.
    """
    path = Path(path)
    text = _render(scenario, sweep, path.suffix.lower())
    path.parent.mkdir(parents=True, exist_ok=True)

    fd, temp_path = tempfile.mkstemp(suffix=path.suffix or '.ini', prefix='satsec_', dir=path.parent)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8') as f:
            f.write(text)
        Path(temp_path).replace(path)
    except Exception:
        try:
            os.unlink(temp_path)
        except OSError:
            pass
        raise
    log.info(f"Saved config to {path}")
    return path
