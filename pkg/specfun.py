"""
Special functions for satsec.
Gamma-family kernels, finite hypergeometric forms and a Meijer G evaluator
with two independent backends: a residue series over the poles of the
numerator gammas and a numerical Mellin-Barnes contour integral.
"""

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from mpmath.ctx_mp import MPContext
from scipy import optimize, special

# Module logger
log = logging.getLogger("satsec.specfun")

# Pole separation: distance to an integer below which two b parameters collide
POLE_TOLERANCE = 1e-6
POLE_SHIFT = 1e-5
POLE_SHIFT_BUDGET = 8

# Backends must agree to rel_tol times this factor
BACKEND_AGREEMENT = 1e3

# Extended-precision residue sums give up beyond this many digits
MAX_SERIES_DIGITS = 600

# Contour integration: stop once the integrand has decayed this many decades
CONTOUR_DECADES = 45.0
MAX_CONTOUR_HEIGHT = 1e5
MAX_CONTOUR_PIECES = 20000

_CHUNK = 32
_EPS = np.finfo(float).eps
_GAUSS_FINE = np.polynomial.legendre.leggauss(16)
_GAUSS_COARSE = np.polynomial.legendre.leggauss(12)


class SatsecError(Exception):
    """Base class for every error raised by satsec."""


class DomainError(SatsecError, ValueError):
    """Argument outside the domain of a function."""


class UnsupportedParameterError(SatsecError, ValueError):
    """Parameter class the implementation deliberately does not cover."""


class DegenerateParametersError(SatsecError):
    """Pole collision that survived the perturbation budget."""


class BackendMismatchError(SatsecError):
    """Residue and contour backends disagree."""


class SeriesTruncationError(SatsecError):
    """A series hit max_terms before meeting its tolerance."""

    def __init__(self, message: str, partial_value: float, tail_estimate: float, terms: int):
        super().__init__(message)
        self.partial_value = partial_value
        self.tail_estimate = tail_estimate
        self.terms = terms


# ---------------------------------------------------------------------------
# Extended precision
# ---------------------------------------------------------------------------

_local = threading.local()


def mp_context() -> MPContext:
    """
    Return this thread's private mpmath context.

    The global mpmath.mp precision is shared between threads; every
    extended-precision evaluation in satsec goes through a per-thread
    context instead and sets its precision with ``ctx.workdps``.
    """
    ctx = getattr(_local, "ctx", None)
    if ctx is None:
        ctx = MPContext()
        _local.ctx = ctx
    return ctx


def digits_for_cancellation(ratio: float, rel_tol: float) -> int:
    """Decimal digits needed to sum terms whose largest/|sum| ratio is given."""
    ratio = max(ratio, 1.0)
    if not math.isfinite(ratio):
        ratio = 1e300
    return int(math.ceil(math.log10(ratio))) + int(math.ceil(-math.log10(rel_tol))) + 10


def adaptive_precision(evaluate, rel_tol: float, start_digits: int = 30,
                       max_digits: int = 1500) -> tuple:
    """
    Run ``evaluate(ctx)`` with enough digits to survive its own cancellation.

    ``evaluate`` returns (value, magnitude) as mpmath numbers, where magnitude
    is the largest absolute term that went into value. The call is repeated
    at higher precision until the cancellation ratio fits. Returns
    (float value, digits used).
    """
    digits = start_digits
    ctx = mp_context()
    while True:
        with ctx.workdps(digits):
            value, magnitude = evaluate(ctx)
            if value == 0:
                ratio = math.inf if magnitude != 0 else 1.0
            else:
                ratio = float(ctx.log10(abs(magnitude) / abs(value)))
                ratio = 10.0 ** min(ratio, 300.0)
            result = float(value)
        need = digits_for_cancellation(ratio, rel_tol)
        if need <= digits or digits >= max_digits:
            if need > digits:
                log.warning(f"Precision ceiling of {max_digits} digits reached; result may be inexact")
            return result, digits
        digits = min(need, max_digits)


# ---------------------------------------------------------------------------
# Series control
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy shared by every infinite series."""
    # Stop once three consecutive terms fall below rel_tol * |partial sum|
    rel_tol: float = 1e-10

    # Hard ceiling on the number of terms per series
    max_terms: int = 500

    # Collect per-series term counts in result diagnostics
    report: bool = False

    def __post_init__(self):
        if not (self.rel_tol > 0):
            raise DomainError(f"rel_tol must be positive, got {self.rel_tol}")
        if int(self.max_terms) < 1:
            raise DomainError(f"max_terms must be >= 1, got {self.max_terms}")


DEFAULT_CONTROL = SeriesControl()


@dataclass
class SeriesResult:
    """Value of a truncated series with its diagnostics."""
    value: float
    terms: int
    tail_estimate: float = 0.0
    truncated: bool = False
    digits: int = 16  # working precision (decimal digits) actually used


class ConvergenceTracker:
    """
    Applies the three-consecutive-terms stopping rule.

    Feed it successive term magnitudes and the running sum; ``done`` turns
    true once the tail is negligible and the terms have started to decrease.
    """

    def __init__(self, ctrl: SeriesControl):
        self.ctrl = ctrl
        self.small = 0
        self.previous = math.inf
        self.count = 0

    def update(self, term_abs: float, total_abs: float) -> bool:
        self.count += 1
        decreasing = term_abs <= self.previous
        self.previous = term_abs
        if decreasing and term_abs <= self.ctrl.rel_tol * total_abs:
            self.small += 1
        elif term_abs == 0.0 and total_abs == 0.0:
            self.small += 1
        else:
            self.small = 0
        return self.small >= 3

    @property
    def exhausted(self) -> bool:
        return self.count >= self.ctrl.max_terms

    def tail_estimate(self) -> float:
        return self.previous * 10.0


# ---------------------------------------------------------------------------
# Scalar kernels
# ---------------------------------------------------------------------------

def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")
    return value


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    x = _require_finite("x", x)
    if x <= 0:
        raise DomainError(f"ln_gamma requires x > 0, got {x}")
    return float(special.gammaln(x))


def lower_incomplete_gamma(a: float, x: float) -> float:
    """gamma(a, x) = integral of t^(a-1) e^(-t) over [0, x]."""
    a = _require_finite("a", a)
    x = float(x)
    if a <= 0:
        raise DomainError(f"lower_incomplete_gamma requires a > 0, got {a}")
    if x < 0:
        raise DomainError(f"lower_incomplete_gamma requires x >= 0, got {x}")
    if x == 0:
        return 0.0
    if a < 170.0:
        return float(special.gammainc(a, x) * special.gamma(a))
    ctx = mp_context()
    with ctx.workdps(30):
        return float(ctx.gammainc(a, 0, x))


def upper_incomplete_gamma(a: float, x: float) -> float:
    """Gamma(a, x) for any real a; x must be positive when a <= 0."""
    a = _require_finite("a", a)
    x = float(x)
    if x < 0 or (x == 0 and a <= 0):
        raise DomainError(f"upper_incomplete_gamma undefined for a={a}, x={x}")
    if math.isinf(x):
        return 0.0
    if a > 0 and a < 170.0:
        return float(special.gammaincc(a, x) * special.gamma(a))
    ctx = mp_context()
    with ctx.workdps(30):
        return float(ctx.gammainc(a, x))


def pochhammer(x: float, n: int) -> float:
    """Rising factorial (x)_n by direct product."""
    if int(n) != n or n < 0:
        raise DomainError(f"pochhammer requires a non-negative integer n, got {n}")
    return float(np.prod(float(x) + np.arange(int(n), dtype=float)))


def bessel_j(order: int, x: float) -> float:
    """Bessel function of the first kind J_order(x)."""
    return float(special.jv(order, x))


def _positive_int(name: str, value: float) -> int:
    if float(value) != int(value) or int(value) < 1:
        raise UnsupportedParameterError(f"{name} must be a positive integer, got {value}")
    return int(value)


def kummer_1f1(a: int, b: int, z: float) -> float:
    """
    Confluent hypergeometric 1F1(a; b; z) for positive integers a, b.

    For a >= b Kummer's transformation gives e^z times a terminating
    polynomial of degree a - b.
    """
    a = _positive_int("a", a)
    b = _positive_int("b", b)
    z = float(z)
    if a < b:
        return float(special.hyp1f1(a, b, z))
    total = 0.0
    term = 1.0
    for n in range(a - b + 1):
        total += term
        term *= (b - a + n) * (-z) / ((b + n) * (n + 1))
    return math.exp(z) * total


def gauss_2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric 2F1(a, b; c; z) for real arguments."""
    if c <= 0 and float(c).is_integer():
        raise DomainError(f"gauss_2f1 undefined for c={c}")
    z = float(z)
    if z < 1:
        value = float(special.hyp2f1(a, b, c, z))
    elif z == 1:
        if c - a - b <= 0:
            raise DomainError(f"gauss_2f1 diverges at z=1 for c-a-b={c - a - b}")
        value = math.exp(
            special.gammaln(c) + special.gammaln(c - a - b)
            - special.gammaln(c - a) - special.gammaln(c - b)
        ) * special.gammasgn(c) * special.gammasgn(c - a - b) \
            * special.gammasgn(c - a) * special.gammasgn(c - b)
    else:
        # Beyond the branch point the principal value is only real for special cases
        ctx = mp_context()
        with ctx.workdps(30):
            raw = ctx.hyp2f1(a, b, c, z)
        value = float(ctx.re(raw))
        if abs(float(ctx.im(raw))) > 1e-12 * max(abs(value), 1e-300):
            raise DomainError(f"gauss_2f1 is complex on the branch cut z={z}")
    if not math.isfinite(value):
        raise DomainError(f"gauss_2f1({a}, {b}, {c}, {z}) is not finite")
    return value


def exp_integral_ei(x: float) -> float:
    """Exponential integral Ei(x), principal value for x > 0."""
    x = float(x)
    if x == 0:
        raise DomainError("exp_integral_ei is singular at x = 0")
    return float(special.expi(x))


# ---------------------------------------------------------------------------
# Meijer G
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeijerGParams:
    """
    Orders and parameters of G^{m,n}_{p,q}(z | a; b).

    The a row is split after its first n entries and the b row after its
    first m entries, matching the usual upper/lower notation.
    """
    m: int
    n: int
    p: int
    q: int
    a_top: tuple = field(default_factory=tuple)
    a_bottom: tuple = field(default_factory=tuple)
    b_top: tuple = field(default_factory=tuple)
    b_bottom: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "a_top", tuple(float(v) for v in self.a_top))
        object.__setattr__(self, "a_bottom", tuple(float(v) for v in self.a_bottom))
        object.__setattr__(self, "b_top", tuple(float(v) for v in self.b_top))
        object.__setattr__(self, "b_bottom", tuple(float(v) for v in self.b_bottom))
        if not (0 <= self.n <= self.p and 0 <= self.m <= self.q):
            raise DomainError(f"invalid Meijer G orders m={self.m} n={self.n} p={self.p} q={self.q}")
        if len(self.a_top) != self.n or len(self.a_bottom) != self.p - self.n:
            raise DomainError("a parameter lists do not match the declared orders")
        if len(self.b_top) != self.m or len(self.b_bottom) != self.q - self.m:
            raise DomainError("b parameter lists do not match the declared orders")

    @classmethod
    def from_rows(cls, m: int, n: int, a: Sequence[float], b: Sequence[float]) -> "MeijerGParams":
        """Build from full a and b rows plus the split points."""
        a = list(a)
        b = list(b)
        return cls(m, n, len(a), len(b), a[:n], a[n:], b[:m], b[m:])

    @property
    def delta(self) -> float:
        return self.m + self.n - (self.p + self.q) / 2.0

    def with_b_top(self, b_top: Sequence[float]) -> "MeijerGParams":
        return MeijerGParams(self.m, self.n, self.p, self.q,
                             self.a_top, self.a_bottom, tuple(b_top), self.b_bottom)


def _near_integer(x: float, tol: float) -> bool:
    return abs(x - round(x)) < tol


def separate_poles(values: Sequence[float], tol: float = POLE_TOLERANCE,
                   shift: float = POLE_SHIFT, budget: int = POLE_SHIFT_BUDGET) -> tuple:
    """
    Nudge parameters so that no pairwise difference is within tol of an integer.

    The later member of a colliding pair is shifted by +shift. Raises
    DegenerateParametersError when the budget runs out.
    """
    vals = [float(v) for v in values]
    for _ in range(budget + 1):
        collision = None
        for i in range(len(vals)):
            for j in range(i + 1, len(vals)):
                if _near_integer(vals[j] - vals[i], tol):
                    collision = (i, j)
                    break
            if collision:
                break
        if collision is None:
            return tuple(vals)
        i, j = collision
        log.warning(
            f"Pole collision between {vals[i]:.8g} and {vals[j]:.8g}; "
            f"shifting the latter by {shift:g}"
        )
        vals[j] += shift
    raise DegenerateParametersError(f"pole collision persists after {budget} shifts: {vals}")


def _pole_mask(x: np.ndarray) -> np.ndarray:
    return (x <= 0.5) & (np.abs(x - np.round(x)) < 1e-12)


def _float_family_terms(params: MeijerGParams, h: int, k: np.ndarray, logz: float):
    """Log-magnitudes and signs of residue terms of family h at indices k."""
    bh = params.b_top[h]
    s = bh + k
    logmag = -special.gammaln(k + 1.0) + s * logz
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    with np.errstate(all="ignore"):
        for j, bj in enumerate(params.b_top):
            if j == h:
                continue
            x = bj - s
            if np.any(_pole_mask(x)):
                raise DegenerateParametersError("double pole in residue series")
            logmag += special.gammaln(x)
            sign *= special.gammasgn(x)
        for aj in params.a_top:
            x = 1.0 - aj + s
            if np.any(_pole_mask(x)):
                raise DegenerateParametersError("numerator gamma pole in residue series")
            logmag += special.gammaln(x)
            sign *= special.gammasgn(x)
        for x in [1.0 - bj + s for bj in params.b_bottom] + [aj - s for aj in params.a_bottom]:
            zero = _pole_mask(x)
            logmag = np.where(zero, -np.inf, logmag - special.gammaln(x))
            sign = np.where(zero, 0.0, sign * special.gammasgn(x))
    return logmag, sign


def _residue_float(params: MeijerGParams, z: float, ctrl: SeriesControl, log_scale: float):
    """Residue series in double precision; returns (result, cancellation ratio)."""
    logz = math.log(z)
    logs = [[] for _ in params.b_top]
    signs = [[] for _ in params.b_top]
    start = 0
    while True:
        k = np.arange(start, start + _CHUNK, dtype=float)
        for h in range(params.m):
            lm, sg = _float_family_terms(params, h, k, logz)
            lm = lm + log_scale
            logs[h].append(lm)
            signs[h].append(sg)
        all_logs = np.stack([np.concatenate(v) for v in logs])
        all_signs = np.stack([np.concatenate(v) for v in signs])
        finite = all_logs[np.isfinite(all_logs)]
        shift = float(finite.max()) if finite.size else 0.0
        terms = all_signs * np.exp(all_logs - shift)
        per_index = terms.sum(axis=0)
        partial = np.cumsum(per_index)

        # The common scale moves as terms grow, so rescan from the start
        tracker = ConvergenceTracker(ctrl)
        done = False
        for idx in range(per_index.size):
            if tracker.update(abs(per_index[idx]), abs(partial[idx])):
                done = True
                break
            if tracker.exhausted:
                break
        if not (done or tracker.exhausted):
            start += _CHUNK
            continue

        used = tracker.count
        total = float(partial[used - 1])
        biggest = float(np.abs(terms[:, :used]).max())
        # Both are in units of exp(shift), so the ratio does not depend on it
        ratio = biggest / abs(total) if total != 0 else math.inf
        with np.errstate(over="ignore"):
            value = float(np.sign(total) * np.exp(np.log(abs(total)) + shift)) if total != 0 else 0.0
            tail = float(np.exp(np.log(max(tracker.tail_estimate(), 1e-300)) + shift))
        return SeriesResult(value, used, tail, not done, 16), ratio


def _mp_family_term(ctx, params: MeijerGParams, h: int, k: int, z):
    bh = ctx.mpf(params.b_top[h])
    s = bh + k
    term = ctx.rgamma(k + 1) * ctx.power(z, s)
    if k % 2:
        term = -term
    for j, bj in enumerate(params.b_top):
        if j != h:
            term *= ctx.gamma(ctx.mpf(bj) - s)
    for aj in params.a_top:
        term *= ctx.gamma(1 - ctx.mpf(aj) + s)
    for bj in params.b_bottom:
        term *= ctx.rgamma(1 - ctx.mpf(bj) + s)
    for aj in params.a_bottom:
        term *= ctx.rgamma(ctx.mpf(aj) - s)
    return term


def _residue_mp(params: MeijerGParams, z: float, ctrl: SeriesControl, digits: int,
                log_scale: float) -> tuple:
    """
    Residue series at the given working precision.

    Returns (result, ratio) where ratio compares the largest single family
    term with the final sum, measured at this precision.
    """
    ctx = mp_context()
    with ctx.workdps(digits):
        zz = ctx.mpf(z)
        scale = ctx.exp(log_scale)
        total = ctx.mpf(0)
        magnitude = ctx.mpf(0)
        tracker = ConvergenceTracker(ctrl)
        done = False
        k = 0
        while not tracker.exhausted:
            parts = [scale * _mp_family_term(ctx, params, h, k, zz) for h in range(params.m)]
            magnitude = max([magnitude] + [abs(v) for v in parts])
            term = ctx.fsum(parts)
            total += term
            if tracker.update(abs(term), abs(total)):
                done = True
                break
            k += 1
        if total == 0:
            ratio = math.inf if magnitude != 0 else 1.0
        else:
            ratio = 10.0 ** min(float(ctx.log10(magnitude / abs(total))), 300.0)
        result = SeriesResult(float(total), tracker.count, float(tracker.tail_estimate()), not done, digits)
        return result, ratio


def _truncation(result: SeriesResult, ctrl: SeriesControl, z: float) -> SeriesTruncationError:
    return SeriesTruncationError(
        f"Meijer G residue series did not converge in {ctrl.max_terms} terms at z={z:g}",
        partial_value=result.value,
        tail_estimate=result.tail_estimate,
        terms=result.terms,
    )


def meijer_g_series(params: MeijerGParams, z: float, ctrl: Optional[SeriesControl] = None,
                    log_scale: float = 0.0) -> SeriesResult:
    """
    Residue-series backend.

    Sums residues at s = b_h + k for every h <= m. Requires p < q. Runs in
    double precision first. When the terms cancel beyond what doubles can
    hold, the sum is repeated in extended precision and the cancellation is
    re-measured at each precision until the digits in use cover it. Raises
    SeriesTruncationError when max_terms or MAX_SERIES_DIGITS is reached.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    if not z > 0:
        raise DomainError(f"meijer_g requires z > 0, got {z}")
    if params.p >= params.q:
        raise UnsupportedParameterError("residue backend requires p < q")
    if params.m == 0:
        return SeriesResult(0.0, 0)
    params = params.with_b_top(separate_poles(params.b_top))

    result, ratio = _residue_float(params, z, ctrl, log_scale)
    if ratio * _EPS <= 0.1 * ctrl.rel_tol and math.isfinite(result.value):
        if result.truncated:
            raise _truncation(result, ctrl, z)
        return result

    digits = max(30, digits_for_cancellation(ratio, ctrl.rel_tol))
    while True:
        digits = min(digits, MAX_SERIES_DIGITS)
        log.debug(f"Residue series cancels by {ratio:.3g} at z={z:g}; summing with {digits} digits")
        result, ratio = _residue_mp(params, z, ctrl, digits, log_scale)
        if result.truncated:
            raise _truncation(result, ctrl, z)
        need = digits_for_cancellation(ratio, ctrl.rel_tol)
        if need <= digits:
            return result
        if digits >= MAX_SERIES_DIGITS:
            raise SeriesTruncationError(
                f"Meijer G residue series at z={z:g} needs {need} digits, above {MAX_SERIES_DIGITS}",
                partial_value=result.value,
                tail_estimate=abs(result.value),
                terms=result.terms,
            )
        digits = max(need, 2 * digits)


def _log_integrand(params: MeijerGParams, s: np.ndarray, logz: float,
                   log_scale: float = 0.0) -> np.ndarray:
    out = s * logz + log_scale
    for bj in params.b_top:
        out = out + special.loggamma(bj - s)
    for aj in params.a_top:
        out = out + special.loggamma(1.0 - aj + s)
    for bj in params.b_bottom:
        out = out - special.loggamma(1.0 - bj + s)
    for aj in params.a_bottom:
        out = out - special.loggamma(aj - s)
    return out


def _contour_abscissa(params: MeijerGParams, logz: float) -> float:
    """
    Real part of the integration line.

    Picks the minimum of |Phi(c) z^c| on the real axis between the two pole
    sequences. On that line the integrand is no larger than needed, so the
    oscillating parts cancel least.
    """
    lo = max((a - 1.0 for a in params.a_top), default=None)
    hi = min(params.b_top, default=None)
    if lo is None and hi is None:
        return 0.0
    if lo is not None and hi is not None and lo >= hi:
        raise DomainError("no vertical line separates the two pole sequences")

    def level(c: float) -> float:
        return float(_log_integrand(params, np.array([c + 0j]), logz)[0].real)

    if lo is not None and hi is not None:
        margin = min(0.25, 0.1 * (hi - lo))
        left, right = lo + margin, hi - margin
    elif hi is not None:
        right = hi - 0.25
        step = 1.0
        while step < 1e4 and level(right - step) < level(right - step / 2.0):
            step *= 2.0
        left = right - step
    else:
        left = lo + 0.25
        step = 1.0
        while step < 1e4 and level(left + step) < level(left + step / 2.0):
            step *= 2.0
        right = left + step
    found = optimize.minimize_scalar(level, bounds=(left, right), method="bounded",
                                     options={"xatol": 1e-3})
    return float(found.x)


def meijer_g_contour(params: MeijerGParams, z: float, log_scale: float = 0.0) -> tuple:
    """
    Mellin-Barnes contour backend.

    Integrates Phi(s) z^s along s = c + it with c between the two pole
    sequences. The line is cut into pieces of one oscillation period and
    each piece gets a 16-point Gauss-Legendre rule; the gap to a 12-point
    rule on the same pieces is the error estimate. Returns (value,
    absolute error estimate).
    """
    if not z > 0:
        raise DomainError(f"meijer_g requires z > 0, got {z}")
    if params.delta <= 0:
        raise UnsupportedParameterError("contour backend requires m + n > (p + q) / 2")
    logz = math.log(z)
    c = _contour_abscissa(params, logz)

    def log_level(t: float) -> float:
        return float(_log_integrand(params, np.array([c + 1j * t]), logz, log_scale)[0].real)

    # Walk out until the integrand has dropped by CONTOUR_DECADES orders
    peak = log_level(0.0)
    height = 1.0
    while height < MAX_CONTOUR_HEIGHT:
        level = log_level(height)
        peak = max(peak, level)
        if level < peak - CONTOUR_DECADES * math.log(10.0):
            break
        height *= 1.5
    else:
        log.warning(f"Contour integrand still significant at height {height:.3g} for z={z:g}")

    largest = max((abs(v) for v in params.a_top + params.a_bottom + params.b_top + params.b_bottom),
                  default=0.0)
    rate = abs(logz) + (params.p + params.q) * math.log(2.0 + abs(c) + height + largest)
    pieces = min(MAX_CONTOUR_PIECES, max(1, int(math.ceil(height * rate / (2.0 * math.pi)))))
    edges = np.linspace(0.0, height, pieces + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]

    def rule(nodes: np.ndarray, weights: np.ndarray) -> float:
        t = mid + half * nodes[None, :]
        values = np.exp(_log_integrand(params, c + 1j * t, logz, log_scale)).real
        return float(np.sum(half * weights[None, :] * values))

    fine = rule(*_GAUSS_FINE)
    coarse = rule(*_GAUSS_COARSE)
    return fine / math.pi, abs(fine - coarse) / math.pi


def meijer_g(params: MeijerGParams, z: float, ctrl: Optional[SeriesControl] = None) -> float:
    """
    Evaluate G^{m,n}_{p,q}(z) with both backends and cross-check them.

    The residue value is returned. A gap beyond rel_tol * BACKEND_AGREEMENT
    raises BackendMismatchError, and so does a contour whose own error
    estimate is too large to certify that tolerance.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    params = params.with_b_top(separate_poles(params.b_top))
    series = meijer_g_series(params, z, ctrl)
    reference, error = meijer_g_contour(params, z)
    allowed = ctrl.rel_tol * BACKEND_AGREEMENT * max(abs(series.value), 1e-300)
    if error > allowed:
        raise BackendMismatchError(
            f"Meijer G contour error {error:.3g} at z={z:g} exceeds the agreement tolerance {allowed:.3g}"
        )
    gap = abs(series.value - reference)
    if gap > allowed:
        raise BackendMismatchError(
            f"Meijer G backends disagree at z={z:g}: residue={series.value!r} contour={reference!r}"
        )
    if gap > ctrl.rel_tol * max(abs(series.value), 1e-300):
        log.debug(f"Meijer G backends differ by {gap:.3g} at z={z:g}")
    return series.value


def meijer_g_value(params: MeijerGParams, z: float, ctrl: Optional[SeriesControl] = None,
                   log_scale: float = 0.0) -> SeriesResult:
    """
    Fast single-backend evaluation used inside distribution functions.

    Takes the double-precision residue sum when it is clean. When its terms
    cancel, or it runs out of terms, the contour integral is used if its
    error estimate meets rel_tol * BACKEND_AGREEMENT; otherwise the residue
    series is redone in extended precision.
    """
    ctrl = ctrl or DEFAULT_CONTROL
    if z > 0 and params.p < params.q and params.m > 0 and params.delta > 0:
        params = params.with_b_top(separate_poles(params.b_top))
        result, ratio = _residue_float(params, z, ctrl, log_scale)
        if ratio * _EPS <= 0.1 * ctrl.rel_tol and math.isfinite(result.value) and not result.truncated:
            return result
        value, error = meijer_g_contour(params, z, log_scale)
        if error <= BACKEND_AGREEMENT * ctrl.rel_tol * max(abs(value), 1e-300):
            return SeriesResult(value, result.terms, error, False, 16)
        log.debug(f"Contour error {error:.3g} too large at z={z:g}; summing residues in extended precision")
    try:
        return meijer_g_series(params, z, ctrl, log_scale)
    except SeriesTruncationError as e:
        log.debug(f"Residue series gave up at z={z:g} after {e.terms} terms; using contour")
        value, error = meijer_g_contour(params.with_b_top(separate_poles(params.b_top)), z, log_scale)
        if error > BACKEND_AGREEMENT * ctrl.rel_tol * max(abs(value), 1e-300):
            log.warning(f"Contour value {value:.6g} at z={z:g} carries an error estimate of {error:.3g}")
        return SeriesResult(value, e.terms, error, False, 16)
