"""
Channel models for satsec.
FSO uplink: Hufnagel-Valley turbulence, Gamma-Gamma fading with pointing
errors and selection combining over K apertures.
RF downlink: multibeam radiation pattern, path-loss matrices, zero-forcing
precoding and shadowed-Rician fading.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import constants, integrate, special

from specfun import (
    DEFAULT_CONTROL,
    ConvergenceTracker,
    DomainError,
    MeijerGParams,
    SatsecError,
    SeriesControl,
    SeriesResult,
    UnsupportedParameterError,
    adaptive_precision,
    bessel_j,
    gauss_2f1,
    kummer_1f1,
    lower_incomplete_gamma,
    meijer_g_value,
    separate_poles,
)

# Module logger
log = logging.getLogger("satsec.channel")

# Radiation pattern: theta = 2.07123 sin(phi) / phi_3dB
BEAM_PATTERN_SCALE = 2.07123

# Hufnagel-Valley profile coefficients
HV_WIND_COEFF = 0.00594
HV_WIND_REFERENCE = 27.0
HV_BACKGROUND = 2.7e-16

# Cn2 is negligible above this altitude (m)
TURBULENCE_CEILING = 200e3

# Largest tolerated condition number of the legitimate V matrix
MAX_CONDITION = 1e12

# Distance outside [0, 1] a probability may land through rounding before it is an error
PROBABILITY_SLACK = 1e-9

# Largest delta x for which the shadowed-Rician PDF is taken through 1F1 directly
KUMMER_EXPONENT_LIMIT = 700.0


class ChannelModelError(SatsecError):
    """Physical channel model cannot be evaluated."""


class DegenerateTurbulenceError(ChannelModelError):
    """Turbulence strength vanishes and the Gamma-Gamma law degenerates."""


class ConditioningError(ChannelModelError):
    """Legitimate V matrix is too close to singular for zero-forcing."""


class NodeClass(Enum):
    """Ground node roles on the RF downlink."""
    LEGITIMATE = "legitimate"
    EAVESDROPPER = "eavesdropper"


# ---------------------------------------------------------------------------
# FSO uplink
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FsoUplinkProfile:
    """Geometry and atmosphere of the optical feeder uplink."""
    # Optical wavelength (m)
    wavelength: float = 1550e-9

    # Optical ground station altitude h0 (m)
    ogs_altitude: float = 25.0

    # Satellite altitude d (m)
    satellite_altitude: float = 6000e3

    # Zenith angle of the uplink (rad)
    zenith_angle: float = 0.0

    # RMS wind speed V_w (m/s)
    wind_speed: float = 21.0

    # Ground-level refractive index structure parameter A (m^-2/3)
    ground_refractive_index: float = 1.7e-14

    # Background term of the HV profile (m^-2/3)
    background_refractive_index: float = HV_BACKGROUND

    # Transmit beam waist W0 (m)
    beam_waist: float = 0.08

    # Receive aperture radius R (m)
    aperture_radius: float = 0.5

    # Power split between the legitimate and eavesdropping receivers
    omega_legit: float = 0.7
    omega_eve: float = 0.3

    # 1 = coherent (heterodyne) detection, 2 = intensity modulation / direct detection
    detection_order: int = 1

    # Number of receive apertures at the satellite
    num_apertures: int = 3

    def __post_init__(self):
        if abs(self.omega_legit + self.omega_eve - 1.0) > 1e-12:
            raise ChannelModelError(
                f"power split must sum to 1, got {self.omega_legit} + {self.omega_eve}"
            )
        if not (0.0 < self.omega_legit < 1.0):
            raise ChannelModelError(f"omega_legit must lie in (0, 1), got {self.omega_legit}")
        if not (self.satellite_altitude > self.ogs_altitude >= 0.0):
            raise ChannelModelError("satellite altitude must exceed the ground station altitude")
        if self.detection_order not in (1, 2):
            raise ChannelModelError(f"detection order must be 1 or 2, got {self.detection_order}")
        if self.num_apertures < 1:
            raise ChannelModelError(f"need at least one aperture, got {self.num_apertures}")
        for name in ("wavelength", "beam_waist", "aperture_radius"):
            if not getattr(self, name) > 0:
                raise ChannelModelError(f"{name} must be positive")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def secant(self) -> float:
        return 1.0 / math.cos(self.zenith_angle)

    @property
    def path_length(self) -> float:
        """Slant distance from the ground station to the satellite."""
        return (self.satellite_altitude - self.ogs_altitude) * self.secant

    def cn2(self, h):
        """Hufnagel-Valley refractive index structure parameter at altitude h."""
        h = np.asarray(h, dtype=float)
        return (
            HV_WIND_COEFF * (self.wind_speed / HV_WIND_REFERENCE) ** 2
            * (1e-5 * h) ** 10 * np.exp(-h / 1000.0)
            + self.background_refractive_index * np.exp(-h / 1500.0)
            + self.ground_refractive_index * np.exp(-h / 100.0)
        )

    def _altitude_integral(self, weight) -> float:
        h0 = self.ogs_altitude
        top = min(self.satellite_altitude, h0 + TURBULENCE_CEILING)
        breaks = [b for b in (h0 + 300.0, h0 + 3000.0, h0 + 20000.0) if b < top]
        value, error = integrate.quad(
            lambda h: float(self.cn2(h)) * weight(h), h0, top,
            points=breaks or None, limit=400, epsabs=0.0, epsrel=1e-10,
        )
        if not math.isfinite(value) or error > 1e-4 * max(abs(value), 1e-300):
            raise ChannelModelError(f"turbulence integral did not converge (value={value}, error={error})")
        return value

    def rytov_variance(self) -> float:
        """Uplink Rytov variance integrated over the HV profile."""
        h0 = self.ogs_altitude
        integral = self._altitude_integral(lambda h: (h - h0) ** (5.0 / 6.0))
        return 2.25 * self.wavenumber ** (7.0 / 6.0) * self.secant ** (11.0 / 6.0) * integral

    def fried_parameter(self) -> float:
        integral = self._altitude_integral(lambda h: 1.0)
        if integral <= 0:
            return math.inf
        return (0.423 * self.wavenumber ** 2 * self.secant * integral) ** (-3.0 / 5.0)

    def beam_width(self) -> float:
        """Diffraction-limited Gaussian beam radius at the satellite."""
        rayleigh = math.pi * self.beam_waist ** 2 / self.wavelength
        return self.beam_waist * math.sqrt(1.0 + (self.path_length / rayleigh) ** 2)

    def equivalent_beam_width_squared(self) -> float:
        """W_eq^2 of the pointing-error model for this aperture."""
        w_z = self.beam_width()
        v = math.sqrt(math.pi / 2.0) * self.aperture_radius / w_z
        return w_z ** 2 * math.sqrt(math.pi) * math.erf(v) / (2.0 * v * math.exp(-v ** 2))

    def beam_wander_variance(self) -> float:
        """Jitter displacement variance sigma_s^2 at the satellite (m^2)."""
        r0 = self.fried_parameter()
        return (
            0.54 * self.path_length ** 2 * (self.wavelength / (2.0 * self.beam_waist)) ** 2
            * (2.0 * self.beam_waist / r0) ** (5.0 / 3.0)
        )

    def pointing_xi2(self) -> float:
        """Pointing error strength xi^2 = (W_eq / (2 sigma_s))^2."""
        jitter = self.beam_wander_variance()
        if jitter <= 0:
            raise DegenerateTurbulenceError("beam wander vanishes; pointing error strength is unbounded")
        return self.equivalent_beam_width_squared() / (4.0 * jitter)


@dataclass(frozen=True)
class TurbulenceParams:
    """Gamma-Gamma fading with pointing errors for one optical branch."""
    alpha: float
    beta: float
    xi2: float

    # Average electrical SNR scale mu_r (linear)
    mu: float

    detection_order: int = 1

    def __post_init__(self):
        for name in ("alpha", "beta", "xi2", "mu"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ChannelModelError(f"{name} must be positive and finite, got {value}")
        if self.detection_order not in (1, 2):
            raise ChannelModelError(f"detection order must be 1 or 2, got {self.detection_order}")

    @property
    def shape_upsilon(self) -> float:
        return self.xi2 * self.alpha * self.beta / (self.xi2 + 1.0)

    @property
    def upsilon(self) -> float:
        """Scale of the CDF argument for coherent detection, Upsilon / mu."""
        return self.shape_upsilon / self.mu

    @property
    def log_p_const(self) -> float:
        return math.log(self.xi2) - special.gammaln(self.alpha) - special.gammaln(self.beta)

    @property
    def p_const(self) -> float:
        return math.exp(self.log_p_const)

    def with_mu(self, mu: float) -> "TurbulenceParams":
        return replace(self, mu=mu)

    def log_moment(self, s: float) -> float:
        """log E[gamma^s]; requires s > -min(alpha, beta, xi2 / r)."""
        r = self.detection_order
        t = r * s
        return (
            s * math.log(self.mu) + t * math.log((self.xi2 + 1.0) / self.xi2)
            + special.gammaln(self.alpha + t) - special.gammaln(self.alpha) - t * math.log(self.alpha)
            + special.gammaln(self.beta + t) - special.gammaln(self.beta) - t * math.log(self.beta)
            + math.log(self.xi2 / (self.xi2 + t))
        )

    def mean_snr(self) -> float:
        """E[gamma]; equals mu for coherent detection."""
        return math.exp(self.log_moment(1.0))


def derive_turbulence(profile: FsoUplinkProfile, avg_snr: float) -> TurbulenceParams:
    """
    Turbulence and pointing parameters of an uplink profile.

    alpha and beta follow from the Rytov variance through the large- and
    small-scale scintillation formulas. xi^2 compares the equivalent beam
    width with the beam-wander jitter.
    """
    sigma2 = profile.rytov_variance()
    if sigma2 <= 0:
        raise DegenerateTurbulenceError(
            "Rytov variance is zero (no turbulence); alpha and beta diverge"
        )
    s125 = sigma2 ** (6.0 / 5.0)
    alpha = 1.0 / math.expm1(0.49 * sigma2 / (1.0 + 1.11 * s125) ** (7.0 / 6.0))
    beta = 1.0 / math.expm1(0.51 * sigma2 / (1.0 + 0.69 * s125) ** (5.0 / 6.0))
    xi2 = profile.pointing_xi2()
    log.debug(f"Rytov variance {sigma2:.4g}: alpha={alpha:.4g} beta={beta:.4g} xi2={xi2:.4g}")
    return TurbulenceParams(alpha, beta, xi2, avg_snr, profile.detection_order)


def _pdf_params(p: TurbulenceParams) -> MeijerGParams:
    return MeijerGParams(3, 0, 1, 3, (), (p.xi2 + 1.0,), (p.xi2, p.alpha, p.beta), ())


def _cdf_params(p: TurbulenceParams) -> MeijerGParams:
    r = p.detection_order
    kappa1 = [(p.xi2 + i) / r for i in range(1, r + 1)]
    kappa2 = []
    for i in range(r):
        kappa2 += [(p.xi2 + i) / r, (p.alpha + i) / r, (p.beta + i) / r]
    return MeijerGParams(3 * r, 1, r + 1, 3 * r + 1, (1.0,), kappa1, kappa2, (0.0,))


def _checked(name: str, z: float, result: SeriesResult, slack: float, upper: Optional[float]) -> float:
    # Rounding may leave a value just outside its range; anything further out is an error
    value = result.value
    slack = max(slack, 10.0 * result.tail_estimate)
    if not math.isfinite(value) or value < -slack or (upper is not None and value > upper + slack):
        raise ChannelModelError(f"{name} at z={z:g} evaluated to {value!r}, outside its range")
    value = max(value, 0.0)
    return value if upper is None else min(value, upper)


def gg_pdf(z: float, p: TurbulenceParams, ctrl: Optional[SeriesControl] = None) -> float:
    """PDF of the Gamma-Gamma SNR with pointing errors."""
    if z <= 0 or math.isinf(z):
        return 0.0
    r = p.detection_order
    x = p.shape_upsilon * (z / p.mu) ** (1.0 / r)
    log_scale = p.log_p_const - math.log(r * z)
    result = meijer_g_value(_pdf_params(p), x, ctrl or DEFAULT_CONTROL, log_scale)
    return _checked("Gamma-Gamma PDF", z, result, PROBABILITY_SLACK / z, None)


def gg_cdf(z: float, p: TurbulenceParams, ctrl: Optional[SeriesControl] = None) -> float:
    """CDF of the Gamma-Gamma SNR with pointing errors (r = 1 or 2)."""
    if z <= 0:
        return 0.0
    if math.isinf(z):
        return 1.0
    r = p.detection_order
    x = p.shape_upsilon ** r * z / (r ** (2 * r) * p.mu)
    log_scale = (1 - r) * math.log(2.0 * math.pi) + p.log_p_const - (2.0 - p.alpha - p.beta) * math.log(r)
    result = meijer_g_value(_cdf_params(p), x, ctrl or DEFAULT_CONTROL, log_scale)
    return _checked("Gamma-Gamma CDF", z, result, PROBABILITY_SLACK, 1.0)


class SelectionCombiningSeries:
    """
    Power series of the K-branch selection-combining CDF.

    F(z) = P^K * sum over h1 + h2 + h3 = K and l >= 0 of
    F[h, l] * (Upsilon z)^(l + h1 xi^2 + h2 alpha + h3 beta).

    Each branch CDF has one residue from the xi^2 pole and two families
    a^(2), a^(3) from the alpha and beta poles; the K-th power is expanded
    with the J.C.P. Miller recursion for powers of a series.
    """

    def __init__(self, p: TurbulenceParams, num_branches: int):
        if p.detection_order != 1:
            raise UnsupportedParameterError("selection-combining series requires coherent detection (r = 1)")
        if num_branches < 1:
            raise DomainError(f"need at least one branch, got {num_branches}")
        self.xi2, self.alpha, self.beta = separate_poles((p.xi2, p.alpha, p.beta))
        self.num_branches = num_branches
        self.upsilon = self.xi2 * self.alpha * self.beta / ((self.xi2 + 1.0) * p.mu)
        self.log_p_const = math.log(self.xi2) - special.gammaln(self.alpha) - special.gammaln(self.beta)
        k = num_branches
        self.compositions = [
            (h1, h2, k - h1 - h2) for h1 in range(k + 1) for h2 in range(k + 1 - h1)
        ]
        self._tables = {}

    def base_exponent(self, composition) -> float:
        h1, h2, h3 = composition
        return h1 * self.xi2 + h2 * self.alpha + h3 * self.beta

    def _family(self, ctx, first: float, second: float, count: int) -> list:
        xi2 = ctx.mpf(self.xi2)
        first = ctx.mpf(first)
        second = ctx.mpf(second)
        out = []
        for l in range(count):
            term = ctx.gamma(second - first - l) / (ctx.factorial(l) * (xi2 - first - l) * (first + l))
            out.append(-term if l % 2 else term)
        return out

    @staticmethod
    def _powers(a: list, h: int) -> list:
        # Miller recursion for the coefficients of (sum a_l x^l)^h
        c = [a[0] ** h]
        for m in range(1, len(a)):
            acc = 0
            for j in range(1, m + 1):
                acc += (j * h - m + j) * a[j] * c[m - j]
            c.append(acc / (m * a[0]))
        return c

    def coefficients(self, ctx, count: int) -> list:
        """
        Coefficient table at the context's precision.

        Returns a list indexed by l; entry l is a list of (rho, coefficient)
        pairs over the compositions, P^K included.
        """
        key = (ctx.dps, count)
        cached = self._tables.get(key)
        if cached is not None:
            return cached
        k = self.num_branches
        a2 = self._family(ctx, self.alpha, self.beta, count)
        a3 = self._family(ctx, self.beta, self.alpha, count)
        a0_1 = ctx.gamma(ctx.mpf(self.alpha) - self.xi2) * ctx.gamma(ctx.mpf(self.beta) - self.xi2) / self.xi2
        pk = ctx.exp(k * ctx.mpf(self.log_p_const))
        powers2 = {h: self._powers(a2, h) for h in range(k + 1)}
        powers3 = {h: self._powers(a3, h) for h in range(k + 1)}
        table = []
        for l in range(count):
            row = []
            for comp in self.compositions:
                h1, h2, h3 = comp
                multinomial = math.factorial(k) // (
                    math.factorial(h1) * math.factorial(h2) * math.factorial(h3)
                )
                conv = ctx.fsum(powers2[h2][q] * powers3[h3][l - q] for q in range(l + 1))
                row.append((self.base_exponent(comp) + l, pk * multinomial * a0_1 ** h1 * conv))
            table.append(row)
        self._tables[key] = table
        return table

    def _table(self, ctx, needed: int, ctrl: SeriesControl) -> list:
        count = min(32, ctrl.max_terms)
        while count < needed and count < ctrl.max_terms:
            count = min(2 * count, ctrl.max_terms)
        return self.coefficients(ctx, count)

    def sum_blocks(self, ctx, kernel, ctrl: SeriesControl) -> tuple:
        """
        Sum coefficient * kernel(rho) block by block in l.

        Returns (total, largest term magnitude, blocks used, truncated).
        """
        table = self._table(ctx, 1, ctrl)
        tracker = ConvergenceTracker(ctrl)
        total = ctx.mpf(0)
        magnitude = ctx.mpf(0)
        l = 0
        while True:
            if l >= len(table):
                if len(table) >= ctrl.max_terms:
                    return total, magnitude, l, True
                table = self._table(ctx, l + 1, ctrl)
            block = ctx.mpf(0)
            for rho, coef in table[l]:
                term = coef * kernel(rho)
                magnitude = max(magnitude, abs(term))
                block += term
            total += block
            l += 1
            if tracker.update(abs(block), abs(total)):
                return total, magnitude, l, False
            if tracker.exhausted:
                return total, magnitude, l, True

    def power_terms(self, ctx, z_max: float, ctrl: SeriesControl) -> tuple:
        """
        Expansion F(z) = sum c * z^rho truncated for 0 < z <= z_max.

        Returns ([(rho, c), ...], truncated) with Upsilon^rho folded into c.
        """
        ups = ctx.mpf(self.upsilon)
        x = ups * z_max
        _, _, used, truncated = self.sum_blocks(ctx, lambda rho: x ** rho, ctrl)
        table = self._table(ctx, used, ctrl)
        terms = [(rho, coef * ups ** rho) for row in table[:used] for rho, coef in row if coef != 0]
        return terms, truncated

    def cdf(self, z: float, ctrl: Optional[SeriesControl] = None) -> SeriesResult:
        ctrl = ctrl or DEFAULT_CONTROL
        if z <= 0:
            return SeriesResult(0.0, 0)
        state = {}

        def evaluate(ctx):
            x = ctx.mpf(self.upsilon) * z
            total, magnitude, used, truncated = self.sum_blocks(ctx, lambda rho: x ** rho, ctrl)
            state.update(used=used, truncated=truncated)
            return total, magnitude

        value, digits = adaptive_precision(evaluate, ctrl.rel_tol)
        if state["truncated"]:
            log.warning(f"Selection-combining series truncated at z={z:g} after {state['used']} blocks")
        return SeriesResult(value, state["used"], 0.0, state["truncated"], digits)


def sc_cdf(z: float, p: TurbulenceParams, num_branches: int,
           ctrl: Optional[SeriesControl] = None) -> float:
    """CDF of the selection-combined SNR from the multinomial residue series."""
    if p.detection_order != 1:
        raise UnsupportedParameterError("sc_cdf series is derived for coherent detection (r = 1)")
    if z <= 0:
        return 0.0
    result = SelectionCombiningSeries(p, num_branches).cdf(z, ctrl)
    return _checked("selection-combining CDF", z, result, PROBABILITY_SLACK, 1.0)


def sc_cdf_product(z: float, p: TurbulenceParams, num_branches: int,
                   ctrl: Optional[SeriesControl] = None) -> float:
    """CDF of the selection-combined SNR as the K-th power of one branch."""
    return gg_cdf(z, p, ctrl) ** num_branches


def sc_pdf_product(z: float, p: TurbulenceParams, num_branches: int,
                   ctrl: Optional[SeriesControl] = None) -> float:
    if z <= 0:
        return 0.0
    k = num_branches
    return k * gg_cdf(z, p, ctrl) ** (k - 1) * gg_pdf(z, p, ctrl)


# ---------------------------------------------------------------------------
# RF downlink geometry and precoding
# ---------------------------------------------------------------------------

def beam_gain(angle: float, half_power_angle: float) -> float:
    """Normalized beam radiation gain at an angle off boresight."""
    if half_power_angle <= 0:
        raise DomainError(f"half-power angle must be positive, got {half_power_angle}")
    theta = BEAM_PATTERN_SCALE * math.sin(angle) / half_power_angle
    if abs(theta) < 1e-8:
        return 1.0
    return (bessel_j(1, theta) / (2.0 * theta) + 36.0 * bessel_j(3, theta) / theta ** 3) ** 2


@dataclass(frozen=True)
class RfGeometry:
    """Multibeam layout shared by every ground node."""
    num_beams: int = 5

    # Carrier frequency (Hz)
    frequency: float = 20e9

    # Receiver noise temperature (K)
    noise_temperature: float = 193.15

    # Bandwidth (Hz)
    bandwidth: float = 50e6

    # Linear gains
    tx_gain: float = 1e6
    rx_gain_legit: float = 1e4
    rx_gain_eve: float = 10 ** 2.5

    # Satellite-to-node distance (m)
    slant_range: float = 6000e3

    # Cell diameter (m)
    cell_diameter: float = 100e3

    # 3 dB beam angle (rad)
    half_power_angle: float = math.radians(0.4)

    # Per-node offset from its own beam boresight (rad), one per beam
    offsets_legit: tuple = (3e-3,) * 5
    offsets_eve: tuple = (6.66e-4,) * 5

    def __post_init__(self):
        object.__setattr__(self, "offsets_legit", tuple(float(v) for v in self.offsets_legit))
        object.__setattr__(self, "offsets_eve", tuple(float(v) for v in self.offsets_eve))
        for name in ("frequency", "noise_temperature", "bandwidth", "tx_gain", "rx_gain_legit",
                     "rx_gain_eve", "slant_range", "cell_diameter", "half_power_angle"):
            if not getattr(self, name) > 0:
                raise ChannelModelError(f"{name} must be positive")
        if self.num_beams < 1:
            raise ChannelModelError("need at least one beam")
        for offsets in (self.offsets_legit, self.offsets_eve):
            if len(offsets) != self.num_beams:
                raise ChannelModelError(
                    f"expected {self.num_beams} node offsets, got {len(offsets)}"
                )

    @property
    def beam_angle(self) -> float:
        """Angle subtended by one cell, D / r."""
        return self.cell_diameter / self.slant_range

    def rx_gain(self, node_class: NodeClass) -> float:
        return self.rx_gain_legit if node_class is NodeClass.LEGITIMATE else self.rx_gain_eve

    def offsets(self, node_class: NodeClass) -> tuple:
        return self.offsets_legit if node_class is NodeClass.LEGITIMATE else self.offsets_eve


def node_angle(geom: RfGeometry, node_class: NodeClass, i: int, j: int) -> float:
    """Angle between node i and the boresight of beam j."""
    offset = geom.offsets(node_class)[j]
    if j >= i:
        return geom.beam_angle * (i - j) + offset
    return geom.beam_angle * (i - j) - offset


def build_v_matrix(geom: RfGeometry, node_class: NodeClass) -> np.ndarray:
    """Path-loss and radiation-pattern coefficients V[i, j]."""
    n = geom.num_beams
    scale = constants.c / (
        4.0 * math.pi * geom.frequency * geom.slant_range
        * math.sqrt(constants.k * geom.noise_temperature * geom.bandwidth)
    )
    gains = geom.tx_gain * geom.rx_gain(node_class)
    v = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            a = beam_gain(node_angle(geom, node_class, i, j), geom.half_power_angle)
            v[i, j] = scale * math.sqrt(gains * a)
    off = v - np.diag(np.diag(v))
    if n > 1 and np.any(np.diag(v) <= off.max(axis=1)):
        log.warning(f"{node_class.value} V matrix is not diagonally dominant")
    return v


@dataclass(frozen=True, eq=False)
class PrecodingContext:
    """Precoding matrices and the interference scalars derived from them."""
    v_legit: np.ndarray
    v_eve: np.ndarray
    a_inv: np.ndarray

    # ZF power normalisation phi
    power_norm: float

    # ZF eavesdropper useful and interference scalars, per beam
    psi: np.ndarray
    theta: np.ndarray

    # Non-ZF useful and interference scalars, per beam
    psi_legit: np.ndarray
    theta_legit: np.ndarray
    psi_eve: np.ndarray
    theta_eve: np.ndarray

    p_sat: float = 1.0

    @staticmethod
    def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)

    @property
    def num_beams(self) -> int:
        return self.v_legit.shape[0]

    @property
    def saturation_zf(self) -> np.ndarray:
        return self._ratio(self.psi, self.theta)

    @property
    def saturation_legit(self) -> np.ndarray:
        return self._ratio(self.psi_legit, self.theta_legit)

    @property
    def saturation_eve(self) -> np.ndarray:
        return self._ratio(self.psi_eve, self.theta_eve)


def _self_and_cross(m: np.ndarray) -> tuple:
    diag = np.diag(m)
    return diag ** 2, (m.sum(axis=1) - diag) ** 2


def make_precoding_context(v_legit: np.ndarray, v_eve: np.ndarray, p_sat: float,
                           num_beams: Optional[int] = None) -> PrecodingContext:
    """Zero-forcing inverse, power normalisation and per-beam interference scalars."""
    v_legit = np.asarray(v_legit, dtype=float)
    v_eve = np.asarray(v_eve, dtype=float)
    n = num_beams or v_legit.shape[0]
    if v_legit.shape != (n, n) or v_eve.shape != (n, n):
        raise ChannelModelError(f"V matrices must be {n}x{n}")
    if not p_sat > 0:
        raise ChannelModelError(f"P_SAT must be positive, got {p_sat}")
    cond = np.linalg.cond(v_legit)
    if not cond < MAX_CONDITION:
        raise ConditioningError(f"legitimate V matrix is near-singular (condition number {cond:.3g})")
    a_inv = np.linalg.inv(v_legit)
    gram_inv = np.linalg.inv(v_legit @ v_legit.conj().T)
    power_norm = p_sat / (n * float(np.trace(gram_inv).real))
    psi, theta = _self_and_cross(v_eve @ a_inv)
    psi_l, theta_l = _self_and_cross(v_legit)
    psi_e, theta_e = _self_and_cross(v_eve)
    return PrecodingContext(
        v_legit=v_legit, v_eve=v_eve, a_inv=a_inv, power_norm=power_norm,
        psi=psi, theta=theta, psi_legit=psi_l, theta_legit=theta_l,
        psi_eve=psi_e, theta_eve=theta_e, p_sat=p_sat,
    )


# ---------------------------------------------------------------------------
# Shadowed-Rician fading
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShadowedRicianParams:
    """Shadowed-Rician fading of an RF link."""
    # Half the average multipath power
    b: float

    # Nakagami-m severity of the LOS component
    m_s: int

    # Average LOS power
    omega: float

    # Average SNR scale (linear)
    gamma_bar: float = 1.0

    def __post_init__(self):
        if float(self.m_s) != int(self.m_s) or int(self.m_s) < 1:
            raise UnsupportedParameterError(f"m_s must be a positive integer, got {self.m_s}")
        object.__setattr__(self, "m_s", int(self.m_s))
        if not self.b > 0:
            raise ChannelModelError(f"b must be positive, got {self.b}")
        if not self.omega >= 0:
            raise ChannelModelError(f"omega must be non-negative, got {self.omega}")
        if not self.gamma_bar > 0:
            raise ChannelModelError(f"average SNR must be positive, got {self.gamma_bar}")

    @property
    def lam(self) -> float:
        two_bm = 2.0 * self.b * self.m_s
        return (two_bm / (two_bm + self.omega)) ** self.m_s / (2.0 * self.b)

    @property
    def rho(self) -> float:
        return 1.0 / (2.0 * self.b)

    @property
    def delta(self) -> float:
        return self.omega / (2.0 * self.b * (2.0 * self.b * self.m_s + self.omega))

    @property
    def v(self) -> float:
        return self.rho - self.delta

    @property
    def rate(self) -> float:
        """Exponential rate v / gamma_bar of the Erlang mixture."""
        return self.v / self.gamma_bar

    @property
    def weights(self) -> np.ndarray:
        """
        Mixture weights c_n, n = 0..m_s-1.

        The finite form 1F1(m; 1; x) = e^x sum C(m-1, n) x^n / n! turns the
        PDF into sum_n c_n Erlang(n + 1, rate).
        """
        n = np.arange(self.m_s)
        return self.lam * special.comb(self.m_s - 1, n) * self.delta ** n / self.v ** (n + 1)

    def moment(self, k: int) -> float:
        """E[X^k] = gamma_bar^k lam k! rho^-(k+1) 2F1(k + 1, m_s; 1; delta / rho)."""
        if int(k) != k or k < 0:
            raise DomainError(f"moment order must be a non-negative integer, got {k}")
        k = int(k)
        hyper = gauss_2f1(k + 1.0, float(self.m_s), 1.0, self.delta / self.rho)
        return self.gamma_bar ** k * self.lam * math.factorial(k) * self.rho ** (-(k + 1)) * hyper

    def mean(self) -> float:
        return self.moment(1)

    def with_gamma_bar(self, gamma_bar: float) -> "ShadowedRicianParams":
        return replace(self, gamma_bar=gamma_bar)


def sr_pdf(z, p: ShadowedRicianParams):
    """
    PDF of the shadowed-Rician SNR.

    Scalars use lam e^(-rho x) 1F1(m_s; 1; delta x) / gamma_bar directly;
    arrays, and arguments where e^(delta x) would overflow, go through the
    equivalent Erlang mixture.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 0 and 0.0 <= z and p.delta * z / p.gamma_bar < KUMMER_EXPONENT_LIMIT:
        x = float(z) / p.gamma_bar
        return p.lam / p.gamma_bar * math.exp(-p.rho * x) * kummer_1f1(p.m_s, 1, p.delta * x)
    y = p.rate
    zc = np.clip(z, 0.0, None)
    total = np.zeros_like(zc)
    for n, c in enumerate(p.weights):
        total = total + c * y * np.exp(special.xlogy(n, y * zc) - y * zc - special.gammaln(n + 1))
    out = np.where(z >= 0, total, 0.0)
    return float(out) if out.ndim == 0 else out


def sr_cdf(z, p: ShadowedRicianParams):
    """CDF of the shadowed-Rician SNR as a finite sum of lower incomplete gammas."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        if z <= 0:
            return 0.0
        total = sum(c * lower_incomplete_gamma(n + 1.0, p.rate * float(z)) / math.factorial(n)
                    for n, c in enumerate(p.weights))
        return min(total, 1.0)
    zc = np.clip(z, 0.0, None)
    total = np.zeros_like(zc)
    for n, c in enumerate(p.weights):
        total = total + c * special.gammainc(n + 1, p.rate * zc)
    out = np.clip(total, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def sr_ccdf(z, p: ShadowedRicianParams):
    """Complementary CDF, summed directly to keep precision in the tail."""
    z = np.asarray(z, dtype=float)
    zc = np.clip(z, 0.0, None)
    total = np.zeros_like(zc)
    for n, c in enumerate(p.weights):
        total = total + c * special.gammaincc(n + 1, p.rate * zc)
    out = np.clip(total, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class RatioSinr:
    """
    SINR of the form gain * X / (interference * X + 1), X shadowed-Rician.

    Covers the ZF legitimate link (gain 1, no interference), the ZF
    eavesdropper (psi, theta) and both non-ZF links (Psi, Theta).
    """
    gain: float
    interference: float
    fading: ShadowedRicianParams

    @property
    def saturation(self) -> float:
        if self.interference <= 0:
            return math.inf
        return self.gain / self.interference

    def fading_argument(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return z / (self.gain - self.interference * z)

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        below = (z < self.saturation) & (z > 0)
        arg = np.where(below, self.fading_argument(np.where(below, z, 0.0)), 0.0)
        out = np.where(below, sr_cdf(arg, self.fading), np.where(z <= 0, 0.0, 1.0))
        return float(out) if out.ndim == 0 else out

    def ccdf(self, z):
        z = np.asarray(z, dtype=float)
        below = (z < self.saturation) & (z > 0)
        arg = np.where(below, self.fading_argument(np.where(below, z, 0.0)), 0.0)
        out = np.where(below, sr_ccdf(arg, self.fading), np.where(z <= 0, 1.0, 0.0))
        return float(out) if out.ndim == 0 else out

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        below = (z < self.saturation) & (z >= 0)
        zb = np.where(below, z, 0.0)
        jacobian = self.gain / (self.gain - self.interference * zb) ** 2
        out = np.where(below, jacobian * sr_pdf(self.fading_argument(zb), self.fading), 0.0)
        return float(out) if out.ndim == 0 else out


def sinr_cdf_zf(z, ctx: PrecodingContext, p_eve: ShadowedRicianParams, i: int):
    """CDF of the eavesdropper SINR under zero-forcing precoding."""
    return RatioSinr(float(ctx.psi[i]), float(ctx.theta[i]), p_eve).cdf(z)


def sinr_pdf_zf(z, ctx: PrecodingContext, p_eve: ShadowedRicianParams, i: int):
    return RatioSinr(float(ctx.psi[i]), float(ctx.theta[i]), p_eve).pdf(z)


def _nzf_sinr(ctx: PrecodingContext, p_node: ShadowedRicianParams, i: int,
              node_class: NodeClass) -> RatioSinr:
    if node_class is NodeClass.LEGITIMATE:
        return RatioSinr(float(ctx.psi_legit[i]), float(ctx.theta_legit[i]), p_node)
    return RatioSinr(float(ctx.psi_eve[i]), float(ctx.theta_eve[i]), p_node)


def sinr_cdf_nzf(z, ctx: PrecodingContext, p_node: ShadowedRicianParams, i: int,
                 node_class: NodeClass = NodeClass.EAVESDROPPER):
    """CDF of a node's SINR without precoding."""
    return _nzf_sinr(ctx, p_node, i, node_class).cdf(z)


def sinr_pdf_nzf(z, ctx: PrecodingContext, p_node: ShadowedRicianParams, i: int,
                 node_class: NodeClass = NodeClass.EAVESDROPPER):
    return _nzf_sinr(ctx, p_node, i, node_class).pdf(z)
