"""
Intercept probability of the hybrid FSO/RF decode-and-forward chain.

The satellite selection-combines K optical apertures and re-transmits over
a multibeam RF downlink. An eavesdropper taps a share of the optical power
and listens on the RF side. Decoding fails when the combined SNR is below
gamma_th, and the link is intercepted when decoding fails or the secrecy
capacity is zero.

Three evaluators share SecrecyScenario:

* intercept_probability: series closed form (coherent detection)
* intercept_probability_reference: adaptive quadrature of the defining integral
* intercept_probability_asymptotic: diversity order and coding gain at high SNR
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from scipy import integrate

from channel import (
    PrecodingContext,
    RatioSinr,
    SelectionCombiningSeries,
    ShadowedRicianParams,
    TurbulenceParams,
    gg_cdf,
    gg_pdf,
    sc_cdf_product,
    sc_pdf_product,
    sr_pdf,
)
from specfun import (
    DEFAULT_CONTROL,
    DomainError,
    MeijerGParams,
    SatsecError,
    SeriesControl,
    UnsupportedParameterError,
    adaptive_precision,
    exp_integral_ei,
    ln_gamma,
    meijer_g_value,
    mp_context,
    pochhammer,
    upper_incomplete_gamma,
)

# Module logger
log = logging.getLogger("satsec.secrecy")

# |L - gamma_th| below this fraction of gamma_th resolves to case 1
CASE_TIE = 1e-12

# Log-space integration range of FSO laws, relative to the mean SNR
HEAD_FACTOR = 1e-60
TAIL_FACTOR = 100.0

# Relative tolerance and subinterval budget of every adaptive quadrature
QUAD_RTOL = 1e-9
QUAD_LIMIT = 100

# Meijer-term H2 sums cancelling beyond this are redone in extended precision
MEIJER_CANCELLATION = 1e6

# Pre-clamp IP may leave [0, 1] by this much before a warning
IP_SLACK = 1e-6

# Diversity orders this close to 1 mix both asymptotic terms
DIVERSITY_TIE = 1e-3

# Argument switches of the scaled negative-order incomplete gamma
EI_SWITCH = 2.0
ASYMPTOTIC_SWITCH = 150.0


class UnsupportedRegimeError(SatsecError):
    """Closed form is not valid for this scenario; the MC engine still is."""


class PrecodingMode(Enum):
    """RF downlink precoding."""
    ZF = "zf"
    NZF = "nzf"


class CaseFired(Enum):
    """Branch of the closed form that produced a result."""
    ZF_CASE1 = "ZF_case1"  # L < gamma_th
    ZF_CASE2 = "ZF_case2"  # gamma_th <= L < 2 gamma_th
    ZF_CASE3 = "ZF_case3"  # L >= 2 gamma_th
    NZF = "NZF"


@dataclass(frozen=True, eq=False)
class SecrecyScenario:
    """Per-hop parameters of one legitimate/eavesdropper node pair."""
    fso_legit: TurbulenceParams
    fso_eve: TurbulenceParams

    # RF fading with the mode's average SNR already applied
    rf_legit: ShadowedRicianParams
    rf_eve: ShadowedRicianParams

    precoding: PrecodingContext
    mode: PrecodingMode = PrecodingMode.ZF

    # Decoding threshold (linear)
    gamma_th: float = 100.0

    num_apertures: int = 3
    node_index: int = 0

    def __post_init__(self):
        if not (self.gamma_th > 0):
            raise DomainError(f"gamma_th must be positive, got {self.gamma_th}")
        if self.num_apertures < 1:
            raise DomainError(f"need at least one aperture, got {self.num_apertures}")
        if not 0 <= self.node_index < self.precoding.num_beams:
            raise DomainError(
                f"node index {self.node_index} outside 0..{self.precoding.num_beams - 1}"
            )

    def legit_sinr(self) -> RatioSinr:
        if self.mode is PrecodingMode.ZF:
            return RatioSinr(1.0, 0.0, self.rf_legit)
        i = self.node_index
        return RatioSinr(float(self.precoding.psi_legit[i]), float(self.precoding.theta_legit[i]),
                         self.rf_legit)

    def eve_sinr(self) -> RatioSinr:
        i = self.node_index
        if self.mode is PrecodingMode.ZF:
            return RatioSinr(float(self.precoding.psi[i]), float(self.precoding.theta[i]), self.rf_eve)
        return RatioSinr(float(self.precoding.psi_eve[i]), float(self.precoding.theta_eve[i]),
                         self.rf_eve)

    def saturation(self) -> float:
        """Largest eavesdropper SINR at which the legitimate RF link can still win."""
        return min(self.legit_sinr().saturation, self.eve_sinr().saturation)

    def with_changes(self, **changes) -> "SecrecyScenario":
        return replace(self, **changes)


def with_legit_snr(scenario: SecrecyScenario, mu1: float,
                   epsilon: Optional[float] = None) -> SecrecyScenario:
    """
    Move the scenario along the proportional-SNR line gamma_bar_l = epsilon * mu1.

    epsilon defaults to the scenario's current ratio.
    """
    if epsilon is None:
        epsilon = scenario.rf_legit.gamma_bar / scenario.fso_legit.mu
    return replace(
        scenario,
        fso_legit=scenario.fso_legit.with_mu(mu1),
        rf_legit=scenario.rf_legit.with_gamma_bar(epsilon * mu1),
    )


@dataclass
class Diagnostics:
    """Series bookkeeping collected while evaluating one scenario."""
    series_terms: Dict[str, int] = field(default_factory=dict)
    truncated: Dict[str, bool] = field(default_factory=dict)
    fallbacks: List[str] = field(default_factory=list)
    digits: Dict[str, int] = field(default_factory=dict)

    def record(self, name: str, terms: int, truncated: bool = False, digits: int = 16):
        self.series_terms[name] = terms
        self.truncated[name] = truncated
        self.digits[name] = digits

    def fallback(self, name: str, reason: str):
        log.warning(f"{name}: falling back to quadrature ({reason})")
        self.fallbacks.append(name)

    @property
    def series_terms_max(self) -> int:
        return max(self.series_terms.values(), default=0)

    @property
    def any_truncated(self) -> bool:
        return any(self.truncated.values())


@dataclass
class IpResult:
    """Intercept probability with the branch that produced it."""
    ip: float
    case_fired: CaseFired
    raw_ip: float
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    components: Dict[str, float] = field(default_factory=dict)


@dataclass
class AsymptoticResult:
    """High-SNR behaviour IP ~ coding_gain * mu1^(-diversity_order)."""
    coding_gain: float
    diversity_order: float
    anchor: float
    x_d: float
    epsilon: float
    fso_gain: float
    rf_gain: float

    def ip_at(self, mu1: float) -> float:
        return self.coding_gain * mu1 ** (-self.diversity_order)

    @property
    def snr_coding_gain(self) -> float:
        """Coding gain referenced to the legitimate RF average SNR gamma_bar_l = epsilon * mu1."""
        return self.coding_gain * self.epsilon ** self.diversity_order

    def ip_at_snr(self, gamma_bar: float) -> float:
        return self.snr_coding_gain * gamma_bar ** (-self.diversity_order)


def classify_case(scenario: SecrecyScenario) -> CaseFired:
    if scenario.mode is PrecodingMode.NZF:
        return CaseFired.NZF
    level = scenario.eve_sinr().saturation
    th = scenario.gamma_th
    if level < th or abs(level - th) <= CASE_TIE * th:
        return CaseFired.ZF_CASE1
    if level < 2.0 * th:
        return CaseFired.ZF_CASE2
    return CaseFired.ZF_CASE3


def secrecy_capacity_components(gamma1, gamma1e, gamma_l, gamma_e) -> tuple:
    """
    Secrecy capacities of the first hop, the RF hop and the cross pair.

    Returns (C1, C2, C12, Cs) in bit/s/Hz, each clipped at zero, with Cs
    the minimum of the three. Accepts scalars or numpy arrays.
    """
    g1, g1e, gl, ge = (np.asarray(v, dtype=float) for v in (gamma1, gamma1e, gamma_l, gamma_e))
    c1 = np.maximum(np.log2((1.0 + g1) / (1.0 + g1e)), 0.0)
    c2 = np.maximum(np.log2((1.0 + gl) / (1.0 + ge)), 0.0)
    c12 = np.maximum(np.log2((1.0 + g1) / (1.0 + ge)), 0.0)
    cs = np.minimum(np.minimum(c1, c2), c12)
    if cs.ndim == 0:
        return float(c1), float(c2), float(c12), float(cs)
    return c1, c2, c12, cs


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def _quad(fn, lo: float, hi: float) -> float:
    value, _ = integrate.quad(fn, lo, hi, limit=QUAD_LIMIT, epsabs=0.0, epsrel=QUAD_RTOL)
    return value


def _log_quad(fn, lo: float, hi: float) -> float:
    """Integrate fn over [lo, hi] in the variable u = ln x."""
    if not hi > lo:
        return 0.0
    u_lo, u_hi = math.log(lo), math.log(hi)
    pieces = max(1, int(math.ceil((u_hi - u_lo) / 4.0)))
    edges = np.linspace(u_lo, u_hi, pieces + 1)

    def integrand(u):
        x = math.exp(u)
        return fn(x) * x

    return sum(_quad(integrand, a, b) for a, b in zip(edges[:-1], edges[1:]))


def _fading_quad(fn, rate: float, top: float) -> float:
    """Integrate over a unit-mean-scale fading variable on [0, top]."""
    cut = min(top, 60.0 / rate)
    edges = [0.0] + [e / rate for e in (1e-8, 1e-6, 1e-4, 1e-2, 1.0, 10.0) if e / rate < cut] + [cut]
    return sum(_quad(fn, a, b) for a, b in zip(edges[:-1], edges[1:]))


def _fso_span(p: TurbulenceParams) -> tuple:
    mean = p.mean_snr()
    return mean * HEAD_FACTOR, mean * TAIL_FACTOR


def _fso_density(x: float, scenario: SecrecyScenario, ctrl: SeriesControl) -> float:
    """f_gamma1(x) * F_gamma1e(x)."""
    return (sc_pdf_product(x, scenario.fso_legit, scenario.num_apertures, ctrl)
            * gg_cdf(x, scenario.fso_eve, ctrl))


def j_integral_quadrature(y: float, legit: RatioSinr, eve: RatioSinr) -> float:
    """J(y) = int_0^y f_eve(x) (1 - F_legit(x)) dx by adaptive quadrature."""
    y = min(y, legit.saturation, eve.saturation)
    if not y > 0:
        return 0.0
    fading = eve.fading
    scale = fading.gamma_bar
    top = math.inf if y >= eve.saturation else float(eve.fading_argument(y)) / scale

    def integrand(t):
        x = scale * t
        z = eve.gain * x / (eve.interference * x + 1.0)
        return scale * sr_pdf(x, fading) * legit.ccdf(z)

    return _fading_quad(integrand, fading.v, top)


def k_integral_quadrature(phi: float, scenario: SecrecyScenario,
                          ctrl: Optional[SeriesControl] = None) -> float:
    """K(phi) = int_phi^inf f_gamma1 F_gamma1e by adaptive quadrature in log-space."""
    ctrl = ctrl or DEFAULT_CONTROL
    lo, hi = _fso_span(scenario.fso_legit)
    lo = max(phi, lo)
    return _log_quad(lambda x: _fso_density(x, scenario, ctrl), lo, hi)


def _h1_quadrature(scenario: SecrecyScenario, ctrl: SeriesControl) -> float:
    """H1 = Pr(gamma1 < gamma1e) = int F_gamma1 f_gamma1e."""
    lo, hi = _fso_span(scenario.fso_eve)
    k = scenario.num_apertures
    return _log_quad(
        lambda x: sc_cdf_product(x, scenario.fso_legit, k, ctrl) * gg_pdf(x, scenario.fso_eve, ctrl),
        lo, hi,
    )


def _o_quadrature(scenario: SecrecyScenario, ctrl: SeriesControl) -> float:
    legit, eve = scenario.legit_sinr(), scenario.eve_sinr()
    th = scenario.gamma_th
    _, hi = _fso_span(scenario.fso_legit)
    top = min(scenario.saturation(), hi)
    if top <= th:
        return 0.0
    j_sat = j_integral_quadrature(math.inf, legit, eve)
    return -_log_quad(
        lambda x: _fso_density(x, scenario, ctrl) * (j_sat - j_integral_quadrature(x, legit, eve)),
        th, top,
    )


def intercept_probability_reference(scenario: SecrecyScenario,
                                    ctrl: Optional[SeriesControl] = None) -> IpResult:
    """
    IP = 1 - int_{gamma_th}^inf f_gamma1 F_gamma1e J(x) dx by quadrature.

    Valid for every mode, regime and detection order.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    legit, eve = scenario.legit_sinr(), scenario.eve_sinr()
    th = scenario.gamma_th
    sat = scenario.saturation()
    _, hi = _fso_span(scenario.fso_legit)

    j_sat = j_integral_quadrature(math.inf, legit, eve)
    upper = max(th, sat)
    k_upper = k_integral_quadrature(upper, scenario, ctrl) if upper < hi else 0.0
    middle = 0.0
    if sat > th:
        middle = _log_quad(
            lambda x: _fso_density(x, scenario, ctrl) * j_integral_quadrature(x, legit, eve),
            th, min(sat, hi),
        )
    raw = 1.0 - (j_sat * k_upper + middle)
    diag = Diagnostics()
    diag.fallbacks.append("reference")
    return IpResult(
        ip=min(max(raw, 0.0), 1.0),
        case_fired=classify_case(scenario),
        raw_ip=raw,
        diagnostics=diag,
        components={"J": j_sat, "K": k_upper, "middle": middle},
    )


# ---------------------------------------------------------------------------
# Extended-precision building blocks
# ---------------------------------------------------------------------------

class _Cancellation:
    """Worst term-to-sum ratio per summation stage; their product bounds error growth."""

    def __init__(self):
        self.stages = {}

    def note(self, stage: str, magnitude, total):
        if total == 0:
            return
        ratio = magnitude / abs(total)
        if ratio > self.stages.get(stage, 1):
            self.stages[stage] = ratio

    def factor(self):
        out = 1
        for ratio in self.stages.values():
            out *= ratio
        return out


def _erlang_mixture(ctx, fading: ShadowedRicianParams) -> tuple:
    """Mixture weights and rate of the shadowed-Rician law at the context's precision."""
    b, m, omega = ctx.mpf(fading.b), fading.m_s, ctx.mpf(fading.omega)
    lam = (2 * b * m / (2 * b * m + omega)) ** m / (2 * b)
    delta = omega / (2 * b * (2 * b * m + omega))
    v = 1 / (2 * b) - delta
    weights = [lam * ctx.binomial(m - 1, n) * delta ** n / v ** (n + 1) for n in range(m)]
    return weights, v / fading.gamma_bar


def _exp_terms(ctx, a, x0, ctrl: SeriesControl) -> tuple:
    """Coefficients a^i / i! of exp(a / w), truncated for every w with a / w <= x0."""
    terms = []
    coef = ctx.mpf(1)
    bound = ctx.mpf(1)
    limit = ctx.mpf(ctrl.rel_tol) * ctx.mpf("1e-3")
    for i in range(ctrl.max_terms):
        terms.append(coef)
        if i + 1 > 2 * x0 and bound <= limit:
            return terms, False
        coef = coef * a / (i + 1)
        bound = bound * x0 / (i + 1)
    return terms, True


@dataclass
class _PowerExpansion:
    """Integrand written as sum_s weights[s] * w^(s-1) * exp(-rate * w)."""
    weights: dict
    magnitudes: dict
    rate: object
    terms: int
    truncated: bool


def _mixture_terms(ctx, legit: RatioSinr, eve: RatioSinr):
    """(m, n, k, Erlang-product coefficient) over both shadowed-Rician mixtures."""
    c_e, y_e = _erlang_mixture(ctx, eve.fading)
    c_l, y_l = _erlang_mixture(ctx, legit.fading)
    out = []
    for m, cm in enumerate(c_e):
        for n, cn in enumerate(c_l):
            for k in range(n + 1):
                coef = cm * cn * y_e ** (m + 1) * y_l ** k / (ctx.factorial(m) * ctx.factorial(k))
                out.append((m, k, coef))
    return out, y_e, y_l


def _expansion(ctx, legit: RatioSinr, eve: RatioSinr, ctrl: SeriesControl) -> _PowerExpansion:
    """
    Power expansion of f_eve * (1 - F_legit) after the change of variable.

    When the eavesdropper saturates first (T < 0) the variable is
    w = p_l + |T| X, otherwise (T > 0) it is w = 1 / (p_l - T X), X being
    the eavesdropper's shadowed-Rician fading.
    """
    p_l, q_l = ctx.mpf(legit.gain), ctx.mpf(legit.interference)
    p_e, q_e = ctx.mpf(eve.gain), ctx.mpf(eve.interference)
    t = q_l * p_e - p_l * q_e
    mixture, y_e, y_l = _mixture_terms(ctx, legit, eve)
    weights, magnitudes = {}, {}
    if t < 0:
        t = -t
        rate = y_e / t
        a = y_l * p_e * p_l / t
        front = ctx.exp(rate * p_l - y_l * p_e / t)
        exp_terms, truncated = _exp_terms(ctx, a, a / p_l, ctrl)
        for m, k, coef in mixture:
            base = coef * t ** (-m - 1) * (p_e / t) ** k * front
            for j in range(m + k + 1):
                cj = base * ctx.binomial(m + k, j) * (-p_l) ** (m + k - j)
                for i, ei in enumerate(exp_terms):
                    s = j - k - i + 1
                    term = cj * ei
                    weights[s] = weights.get(s, 0) + term
                    magnitudes[s] = magnitudes.get(s, 0) + abs(term)
    else:
        rate = y_l * p_e * p_l / t
        a = y_e / t
        front = ctx.exp((y_l * p_e - y_e * p_l) / t)
        exp_terms, truncated = _exp_terms(ctx, a, a * p_l, ctrl)
        for m, k, coef in mixture:
            base = coef * (p_e / t) ** k * t ** (-m - 1) * front
            for j in range(m + k + 1):
                cj = base * ctx.binomial(m + k, j) * p_l ** j * (-1) ** (m + k - j)
                for i, ei in enumerate(exp_terms):
                    s = j - m - 1 - i
                    term = cj * ei
                    weights[s] = weights.get(s, 0) + term
                    magnitudes[s] = magnitudes.get(s, 0) + abs(term)
    return _PowerExpansion(weights, magnitudes, rate, len(exp_terms), truncated)


class _GammaWindow:
    """Memoised int_lo^hi w^(s-1) exp(-b w) dw for integer s."""

    def __init__(self, ctx, b, lo, hi):
        self.ctx = ctx
        self.b = b
        self.lo = b * lo
        self.hi = ctx.inf if hi == ctx.inf else b * hi
        self.cache = {}

    def __call__(self, s: int):
        value = self.cache.get(s)
        if value is None:
            value = self.b ** (-s) * self.ctx.gammainc(s, self.lo, self.hi)
            self.cache[s] = value
        return value


def _moment(ctx, expansion: _PowerExpansion, window: _GammaWindow, extra: int,
            cancel: _Cancellation):
    """int f_eve (1 - F_legit) w^(-extra) over the window."""
    total = ctx.mpf(0)
    magnitude = ctx.mpf(0)
    for s, weight in expansion.weights.items():
        g = window(s - extra)
        total += weight * g
        magnitude += expansion.magnitudes[s] * g
    cancel.note("moment", magnitude, total)
    return total


# ---------------------------------------------------------------------------
# J: eavesdropper density against the legitimate survival function
# ---------------------------------------------------------------------------

def _j_series(y: float, legit: RatioSinr, eve: RatioSinr, ctrl: SeriesControl) -> tuple:
    """Closed form of J(y); returns (value, exp-series terms, truncated, digits)."""
    y = min(y, legit.saturation, eve.saturation)
    if not y > 0:
        return 0.0, 0, False, 16
    slope = legit.interference * eve.gain - legit.gain * eve.interference
    scale = legit.interference * eve.gain + legit.gain * eve.interference
    eve_top = y >= eve.saturation
    legit_top = y >= legit.saturation
    state = {"terms": 0, "truncated": False}

    def evaluate(ctx):
        cancel = _Cancellation()
        p_l, p_e, q_e = ctx.mpf(legit.gain), ctx.mpf(eve.gain), ctx.mpf(eve.interference)
        x1 = ctx.inf if eve_top else ctx.mpf(y) / (p_e - q_e * ctx.mpf(y))
        if abs(slope) <= 1e-14 * scale:
            mixture, y_e, y_l = _mixture_terms(ctx, legit, eve)
            rate = y_e + y_l * p_e / p_l
            total = ctx.mpf(0)
            for m, k, coef in mixture:
                order = m + k + 1
                total += coef * (p_e / p_l) ** k * ctx.gammainc(order, 0, rate * x1) / rate ** order
            return total, abs(total)

        expansion = _expansion(ctx, legit, eve, ctrl)
        state.update(terms=expansion.terms, truncated=expansion.truncated)
        t = abs(ctx.mpf(slope))
        if slope < 0:
            w_hi = ctx.inf if eve_top else p_l + t * x1
            window = _GammaWindow(ctx, expansion.rate, p_l, w_hi)
        else:
            v_hi = ctx.inf if legit_top else 1 / (p_l - t * x1)
            window = _GammaWindow(ctx, expansion.rate, 1 / p_l, v_hi)
        total = _moment(ctx, expansion, window, 0, cancel)
        return total, abs(total) * cancel.factor()

    value, digits = adaptive_precision(evaluate, ctrl.rel_tol)
    return value, state["terms"], state["truncated"], digits


def _j_value(y: float, legit: RatioSinr, eve: RatioSinr, ctrl: SeriesControl,
             diag: Diagnostics, name: str = "J") -> float:
    try:
        value, terms, truncated, digits = _j_series(y, legit, eve, ctrl)
    except (SatsecError, ValueError, ZeroDivisionError) as e:
        diag.fallback(name, str(e))
        return j_integral_quadrature(y, legit, eve)
    diag.record(name, terms, truncated, digits)
    if truncated or not (0.0 <= value <= 1.0 + 1e-9):
        diag.fallback(name, "series truncated" if truncated else f"value {value!r} out of range")
        return j_integral_quadrature(y, legit, eve)
    return min(value, 1.0)


def j_integral(y: float, scenario: SecrecyScenario, mode: Optional[PrecodingMode] = None,
               ctrl: Optional[SeriesControl] = None) -> float:
    """
    J(y) = int_0^y f_eve(x) (1 - F_legit(x)) dx from its series form.

    y is clamped to the saturation levels of both RF links. Falls back to
    quadrature if the series fails.
    """
    if mode is not None and mode is not scenario.mode:
        scenario = replace(scenario, mode=mode)
    return _j_value(y, scenario.legit_sinr(), scenario.eve_sinr(), ctrl or DEFAULT_CONTROL,
                    Diagnostics())


# ---------------------------------------------------------------------------
# K: legitimate FSO density against the eavesdropper's FSO CDF
# ---------------------------------------------------------------------------

def _require_coherent(scenario: SecrecyScenario):
    if scenario.fso_legit.detection_order != 1 or scenario.fso_eve.detection_order != 1:
        raise UnsupportedParameterError(
            "series closed form requires coherent detection (r = 1); "
            "use the quadrature reference or Monte Carlo for r = 2"
        )


def _fso_series(scenario: SecrecyScenario) -> tuple:
    return (SelectionCombiningSeries(scenario.fso_legit, scenario.num_apertures),
            SelectionCombiningSeries(scenario.fso_eve, 1))


def _h1_value(scenario: SecrecyScenario, legit_series: SelectionCombiningSeries,
              ctrl: SeriesControl, diag: Diagnostics) -> float:
    """H1 = Pr(gamma1 < gamma1e) summed against the eavesdropper's moments."""
    eve = scenario.fso_eve
    k = scenario.num_apertures
    if k * k * legit_series.upsilon >= eve.upsilon:
        diag.fallback("K.H1", "moment series diverges for this SNR ratio")
        return _h1_quadrature(scenario, ctrl)
    state = {}

    def evaluate(ctx):
        ratio = ctx.mpf(legit_series.upsilon) / ctx.mpf(eve.upsilon)
        pe = ctx.exp(ctx.mpf(eve.log_p_const))
        ae, be, xe = ctx.mpf(eve.alpha), ctx.mpf(eve.beta), ctx.mpf(eve.xi2)

        def kernel(rho):
            return ratio ** rho * pe * ctx.gamma(ae + rho) * ctx.gamma(be + rho) / (xe + rho)

        total, magnitude, used, truncated = legit_series.sum_blocks(ctx, kernel, ctrl)
        state.update(used=used, truncated=truncated)
        return total, magnitude

    value, digits = adaptive_precision(evaluate, ctrl.rel_tol)
    diag.record("K.H1", state["used"], state["truncated"], digits)
    if state["truncated"]:
        diag.fallback("K.H1", "moment series truncated")
        return _h1_quadrature(scenario, ctrl)
    return value


def _h2_params(eve: TurbulenceParams, rho: float) -> MeijerGParams:
    return MeijerGParams(3, 2, 3, 5, (1.0 - rho, 1.0), (eve.xi2 + 1.0,),
                         (eve.xi2, eve.alpha, eve.beta), (0.0, -rho))


def _density_pairs(ctx, legit_series: SelectionCombiningSeries,
                   eve_series: SelectionCombiningSeries, z_max: float,
                   ctrl: SeriesControl) -> tuple:
    """
    (lambda, A / lambda) with f_gamma1(z) F_gamma1e(z) = sum A z^(lambda - 1).

    Both CDF series are truncated for z <= z_max and negligible products
    are dropped.
    """
    legit_terms, t1 = legit_series.power_terms(ctx, z_max, ctrl)
    eve_terms, t2 = eve_series.power_terms(ctx, z_max, ctrl)
    zm = ctx.mpf(z_max)
    pairs = []
    for rho, c1 in legit_terms:
        for nu, c2 in eve_terms:
            lam = rho + nu
            pairs.append((lam, c1 * rho * c2 / lam))
    sizes = [abs(c) * zm ** lam for lam, c in pairs]
    keep = max(sizes) * ctx.mpf(ctrl.rel_tol) * ctx.mpf("1e-6")
    pairs = [pair for pair, size in zip(pairs, sizes) if size >= keep]
    return pairs, len(legit_terms) + len(eve_terms), (t1 or t2)


def _h2_power_series(phi: float, legit_series, eve_series, ctrl: SeriesControl) -> tuple:
    state = {}

    def evaluate(ctx):
        pairs, terms, truncated = _density_pairs(ctx, legit_series, eve_series, phi, ctrl)
        state.update(terms=terms, truncated=truncated)
        x = ctx.mpf(phi)
        parts = [c * x ** lam for lam, c in pairs]
        total = ctx.fsum(parts)
        return total, max(abs(p) for p in parts)

    value, digits = adaptive_precision(evaluate, ctrl.rel_tol)
    return value, state["terms"], state["truncated"], digits


def _h2_value(phi: float, scenario: SecrecyScenario, legit_series: SelectionCombiningSeries,
              eve_series: SelectionCombiningSeries, ctrl: SeriesControl,
              diag: Diagnostics) -> float:
    """
    H2(phi) = int_0^phi f_gamma1 F_gamma1e.

    Each term of the combined-SNR series pairs with one Meijer G^{3,2}_{3,5}
    of the eavesdropper law; heavy cancellation switches to the double
    power series in extended precision.
    """
    if not phi > 0:
        return 0.0
    eve = scenario.fso_eve
    ctx = mp_context()
    g_cache = {}
    with ctx.workdps(30):
        x = ctx.mpf(legit_series.upsilon) * phi
        pe = ctx.exp(ctx.mpf(eve.log_p_const))

        def kernel(rho):
            g = g_cache.get(rho)
            if g is None:
                g = meijer_g_value(_h2_params(eve, rho), eve.upsilon * phi, ctrl).value
                g_cache[rho] = g
            return rho * x ** rho * pe * g

        total, magnitude, used, truncated = legit_series.sum_blocks(ctx, kernel, ctrl)
        value = float(total)
        cancellation = float(magnitude / abs(total)) if total != 0 else math.inf
    diag.record("K.H2", used, truncated)
    if truncated or cancellation > MEIJER_CANCELLATION:
        log.debug(f"H2 Meijer sum cancels by {cancellation:.3g}; using the power series")
        value, terms, truncated, digits = _h2_power_series(phi, legit_series, eve_series, ctrl)
        diag.record("K.H2", terms, truncated, digits)
    return value


def _k_value(phi: float, scenario: SecrecyScenario, ctrl: SeriesControl,
             diag: Diagnostics) -> float:
    if math.isinf(phi):
        return 0.0
    legit_series, eve_series = _fso_series(scenario)
    h1 = _h1_value(scenario, legit_series, ctrl, diag)
    h2 = _h2_value(phi, scenario, legit_series, eve_series, ctrl, diag)
    k = 1.0 - h1 - h2
    if not (-IP_SLACK <= k <= 1.0 + IP_SLACK):
        log.warning(f"K({phi:.6g}) = {k!r} lies outside [0, 1]")
    return min(max(k, 0.0), 1.0)


def k_integral(phi: float, scenario: SecrecyScenario,
               ctrl: Optional[SeriesControl] = None) -> float:
    """K(phi) = Pr(gamma1 > phi, gamma1 > gamma1e) = 1 - H1 - H2(phi)."""
    if phi < 0:
        raise DomainError(f"phi must be non-negative, got {phi}")
    _require_coherent(scenario)
    return _k_value(phi, scenario, ctrl or DEFAULT_CONTROL, Diagnostics())


# ---------------------------------------------------------------------------
# O: overlap of the eavesdropper's RF range with [gamma_th, L]
# ---------------------------------------------------------------------------

def _dyadic_intervals(th: float, level: float) -> list:
    """[max(th, L / 2^(k+1)), L / 2^k] for k = 0, 1, ... down to th."""
    out = []
    hi = level
    while hi > th:
        lo = max(th, hi / 2.0)
        out.append((lo, hi))
        hi = lo
    return out


def _binomial_order(lams: np.ndarray, log_sizes: np.ndarray, ctrl: SeriesControl) -> tuple:
    """Terms needed in sum_n C(lam, n) u^n with |u| <= 1/2, for every pair."""
    limit = log_sizes.max() + math.log(ctrl.rel_tol * 1e-3)
    binom = np.ones_like(lams)
    top = lams.max()
    with np.errstate(divide="ignore"):
        for n in range(ctrl.max_terms):
            size = log_sizes + np.log(np.abs(binom)) - n * math.log(2.0)
            if n > top and size.max() < limit:
                return n, False
            binom = binom * (lams - n) / (n + 1)
    return ctrl.max_terms, True


def _o_series(scenario: SecrecyScenario, ctrl: SeriesControl) -> tuple:
    """
    O = -int_{gamma_th}^{L} f_eve (1 - F_legit) D(z) dz for ZF, with D(z) = K(gamma_th) - K(z).

    D is a double power series in z. Each dyadic piece of [gamma_th, L]
    expands z^lambda binomially around its right end, which reduces every
    power to moments int f_eve (1 - F_legit) w^(-j) with w = L / (L - z).
    """
    legit, eve = scenario.legit_sinr(), scenario.eve_sinr()
    th = scenario.gamma_th
    level = eve.saturation
    legit_series, eve_series = _fso_series(scenario)
    intervals = _dyadic_intervals(th, level)
    state = {"terms": 0, "truncated": False}

    def evaluate(ctx):
        cancel = _Cancellation()
        pairs, terms, truncated = _density_pairs(ctx, legit_series, eve_series, level, ctrl)
        expansion = _expansion(ctx, legit, eve, ctrl)
        state.update(terms=max(terms, expansion.terms), truncated=truncated or expansion.truncated)
        lams = np.array([float(lam) for lam, _ in pairs])
        big_l = ctx.mpf(level)
        total = ctx.mpf(0)
        magnitude = ctx.mpf(0)
        n0 = ctx.mpf(0)
        for z_lo, z_hi in intervals:
            c = ctx.mpf(z_hi)
            w_lo = big_l / (big_l - z_lo)
            w_hi = ctx.inf if z_hi >= level else big_l / (big_l - c)
            window = _GammaWindow(ctx, expansion.rate, w_lo, w_hi)
            scaled = [coef * c ** lam for lam, coef in pairs]
            log_sizes = np.array([float(ctx.log(abs(s))) for s in scaled])
            order, cut = _binomial_order(lams, log_sizes, ctrl)
            if cut:
                state["truncated"] = True
            moments = [_moment(ctx, expansion, window, j, cancel) for j in range(order + 1)]

            ratio = big_l / c
            binom_pairs = [ctx.mpf(1)] * len(pairs)
            for n in range(order + 1):
                p_n = ctx.mpf(0)
                p_mag = ctx.mpf(0)
                for j in range(n + 1):
                    term = ctx.binomial(n, j) * (1 - ratio) ** (n - j) * ratio ** j * moments[j]
                    p_n += term
                    p_mag += abs(term)
                cancel.note("binomial", p_mag, p_n)
                if n == 0:
                    n0 += p_n

                s_n = ctx.mpf(0)
                s_mag = ctx.mpf(0)
                for idx, (lam, _) in enumerate(pairs):
                    term = scaled[idx] * binom_pairs[idx]
                    s_n += term
                    s_mag += abs(term)
                    binom_pairs[idx] = binom_pairs[idx] * (lam - n) / (n + 1)
                if n % 2:
                    s_n = -s_n
                cancel.note("power", s_mag, s_n)
                total += s_n * p_n
                magnitude += abs(s_n * p_n)

        d_th = ctx.fsum(coef * ctx.mpf(th) ** lam for lam, coef in pairs)
        total -= d_th * n0
        magnitude += abs(d_th * n0)
        cancel.note("outer", magnitude, total)
        return -total, abs(total) * cancel.factor()

    value, digits = adaptive_precision(evaluate, ctrl.rel_tol)
    return value, state["terms"], state["truncated"], digits


def _o_value(scenario: SecrecyScenario, ctrl: SeriesControl, diag: Diagnostics) -> float:
    if math.isinf(scenario.eve_sinr().saturation):
        diag.fallback("O", "eavesdropper SINR does not saturate")
        return _o_quadrature(scenario, ctrl)
    try:
        value, terms, truncated, digits = _o_series(scenario, ctrl)
    except (SatsecError, ValueError, ZeroDivisionError) as e:
        diag.fallback("O", str(e))
        return _o_quadrature(scenario, ctrl)
    diag.record("O", terms, truncated, digits)
    if truncated or value > 1e-12:
        diag.fallback("O", "series truncated" if truncated else f"positive overlap {value!r}")
        return _o_quadrature(scenario, ctrl)
    return value


def intercept_probability(scenario: SecrecyScenario,
                          ctrl: Optional[SeriesControl] = None) -> IpResult:
    """
    Closed-form intercept probability.

    IP = 1 - J(s) K(gamma_th) - O, with s the saturation level of the RF
    pair. O vanishes unless the eavesdropper's ZF SINR can exceed gamma_th.
    NZF is only covered while the eavesdropper saturates below gamma_th.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    _require_coherent(scenario)
    legit, eve = scenario.legit_sinr(), scenario.eve_sinr()
    th = scenario.gamma_th
    if scenario.mode is PrecodingMode.NZF and not eve.saturation < th:
        raise UnsupportedRegimeError(
            f"NZF closed form needs the eavesdropper saturation {eve.saturation:.6g} "
            f"below gamma_th {th:.6g}; use the monte_carlo or quadrature_reference engine"
        )
    case = classify_case(scenario)
    diag = Diagnostics()

    j_sat = _j_value(math.inf, legit, eve, ctrl, diag)
    k_th = _k_value(th, scenario, ctrl, diag)
    overlap = 0.0
    if case in (CaseFired.ZF_CASE2, CaseFired.ZF_CASE3):
        overlap = _o_value(scenario, ctrl, diag)
    raw = 1.0 - j_sat * k_th - overlap
    if not (-IP_SLACK <= raw <= 1.0 + IP_SLACK):
        log.warning(f"Pre-clamp intercept probability {raw!r} outside [0, 1]")
    log.debug(f"{case.value}: J={j_sat:.12g} K={k_th:.12g} O={overlap:.6g} IP={raw:.12g}")
    return IpResult(
        ip=min(max(raw, 0.0), 1.0),
        case_fired=case,
        raw_ip=raw,
        diagnostics=diag,
        components={"J": j_sat, "K": k_th, "O": overlap},
    )


# ---------------------------------------------------------------------------
# High-SNR asymptotics
# ---------------------------------------------------------------------------

def _leading_log_coefficient(legit_series: SelectionCombiningSeries) -> tuple:
    """(x_d, log |P a_0|) of the dominant small-z term of one branch CDF."""
    xi2, alpha, beta = legit_series.xi2, legit_series.alpha, legit_series.beta
    x_d = min(xi2, alpha, beta)
    if x_d == xi2:
        log_a0 = ln_gamma(alpha - xi2) + ln_gamma(beta - xi2) - math.log(xi2)
    elif x_d == alpha:
        log_a0 = ln_gamma(beta - alpha) - math.log(abs((xi2 - alpha) * alpha))
    else:
        log_a0 = ln_gamma(alpha - beta) - math.log(abs((xi2 - beta) * beta))
    return x_d, legit_series.log_p_const + log_a0


def _max_moment(y: float, s: float, eve: TurbulenceParams, ctrl: SeriesControl) -> float:
    """E[max(y, gamma1e)^s] from the eavesdropper's CDF and a partial Mellin transform."""
    log_pe = eve.log_p_const
    full = math.exp(
        log_pe + ln_gamma(eve.alpha + s) + ln_gamma(eve.beta + s)
        - s * math.log(eve.upsilon) - math.log(eve.xi2 + s)
    )
    params = MeijerGParams(3, 1, 2, 4, (1.0 - s,), (eve.xi2 + 1.0,), (eve.xi2, eve.alpha, eve.beta), (-s,))
    partial = meijer_g_value(params, eve.upsilon * y, ctrl, log_pe + s * math.log(y)).value
    return y ** s * gg_cdf(y, eve, ctrl) + full - partial


def _scaled_gamma_tail(m: int, u: float) -> float:
    """u^(m+1) e^u Gamma(-m, u), which tends to 1 as u grows."""
    if u > ASYMPTOTIC_SWITCH:
        total = 0.0
        for k in range(200):
            term = (-1) ** k * pochhammer(m + 1.0, k) / u ** k
            total += term
            if abs(term) < 1e-17 * abs(total):
                break
        return total
    if u < EI_SWITCH:
        # Gamma(-m, u) = (-1)^m / m! [E1(u) - e^-u sum_k (-1)^k k! / u^(k+1)]
        e1 = -exp_integral_ei(-u)
        head = sum((-1) ** k * math.factorial(k) / u ** (k + 1) for k in range(m))
        gamma = (-1) ** m / math.factorial(m) * (e1 - math.exp(-u) * head)
        return u ** (m + 1) * math.exp(u) * gamma
    return math.exp((m + 1) * math.log(u) + u) * upper_incomplete_gamma(-float(m), u)


def rf_ratio_mean(legit: RatioSinr, eve: RatioSinr) -> float:
    """
    E[gamma_e / (p_l - q_l gamma_e)] over the eavesdropper's fading.

    With X the eavesdropper's fading this is E[p_e X / (p_l + D X)],
    D = p_l q_e - q_l p_e. Each Erlang component of X integrates to an
    incomplete gamma function of negative order; D = 0 leaves the plain
    first moment. Requires D >= 0, i.e. the legitimate SINR does not
    saturate below the eavesdropper's.
    """
    fading = eve.fading
    y = fading.rate
    d = legit.gain * eve.interference - legit.interference * eve.gain
    if d < 0:
        raise UnsupportedRegimeError("legitimate RF SINR saturates below the eavesdropper's")
    u = math.inf if d == 0 else legit.gain * y / d
    total = 0.0
    for n, c in enumerate(fading.weights):
        tail = 1.0 if math.isinf(u) else _scaled_gamma_tail(n + 1, u)
        total += c * pochhammer(n + 1.0, 1) / y * tail
    return eve.gain / legit.gain * total


def intercept_probability_asymptotic(scenario: SecrecyScenario,
                                     ctrl: Optional[SeriesControl] = None) -> AsymptoticResult:
    """
    Diversity order and coding gain along gamma_bar_l = epsilon * mu1.

    The optical hop contributes E[F_gamma1(max(a, gamma1e))] ~ mu1^(-K x_d)
    with a = max(gamma_th, L), L the eavesdropper's RF saturation level.
    The legitimate RF hop contributes Pr(gamma_l < gamma_e) ~ mu1^(-1). The
    smaller exponent wins. A legitimate SINR that saturates below the
    eavesdropper's leaves the error floor Pr(gamma_e > L_l) instead.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    _require_coherent(scenario)
    legit, eve = scenario.legit_sinr(), scenario.eve_sinr()
    th = scenario.gamma_th
    if legit.saturation == eve.saturation:
        raise UnsupportedRegimeError(
            "legitimate and eavesdropper RF SINRs saturate at the same level; no power law applies"
        )
    mu1 = scenario.fso_legit.mu
    epsilon = scenario.rf_legit.gamma_bar / mu1
    legit_series = SelectionCombiningSeries(scenario.fso_legit, scenario.num_apertures)
    x_d, log_lead = _leading_log_coefficient(legit_series)
    k = scenario.num_apertures
    order = k * x_d
    shape_upsilon = legit_series.upsilon * mu1
    anchor = max(th, eve.saturation) if math.isfinite(eve.saturation) else th

    base = _max_moment(anchor, order, scenario.fso_eve, ctrl)
    fso_gain = math.exp(k * (log_lead + x_d * math.log(shape_upsilon))) * base

    if legit.saturation < eve.saturation:
        floor = float(eve.ccdf(legit.saturation))
        log.warning(f"Legitimate RF SINR saturates at {legit.saturation:.6g}, below the eavesdropper's "
                    f"{eve.saturation:.6g}; IP floor {floor:.6g}")
        return AsymptoticResult(
            coding_gain=floor, diversity_order=0.0, anchor=anchor, x_d=x_d,
            epsilon=epsilon, fso_gain=fso_gain, rf_gain=floor,
        )

    rf_gain = scenario.rf_legit.lam * rf_ratio_mean(legit, eve) / epsilon

    if abs(order - 1.0) < DIVERSITY_TIE:
        log.warning(f"K x_d = {order:.6g} is within {DIVERSITY_TIE:g} of 1; both hops set the slope")
        coding_gain, diversity = fso_gain + rf_gain, 1.0
    elif order < 1.0:
        coding_gain, diversity = fso_gain, order
    else:
        coding_gain, diversity = rf_gain, 1.0
    return AsymptoticResult(
        coding_gain=coding_gain,
        diversity_order=diversity,
        anchor=anchor,
        x_d=x_d,
        epsilon=epsilon,
        fso_gain=fso_gain,
        rf_gain=rf_gain,
    )
