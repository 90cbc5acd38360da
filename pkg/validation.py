"""
Invariant checks behind ``satsec validate``.

Each check evaluates one property of the configured scenario against an
independent oracle (quadrature, the direct product form, simulation) and
reports PASS, FAIL or SKIP with the worst deviation it saw.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from channel import gg_cdf, gg_pdf, sc_cdf, sc_cdf_product, sr_cdf, sr_pdf
from montecarlo import RngSpec, estimate_ip, ks_distance, sample_gg_pe, sample_shadowed_rician
from secrecy import (
    SecrecyScenario,
    UnsupportedRegimeError,
    intercept_probability,
    intercept_probability_reference,
    j_integral,
    j_integral_quadrature,
    k_integral,
    k_integral_quadrature,
)
from specfun import SatsecError, SeriesControl, UnsupportedParameterError

log = logging.getLogger("satsec.validation")

# Tolerances
PDF_MASS_TOL = 1e-6
SC_SERIES_RTOL = 1e-6
JK_RTOL = 1e-4
IP_RTOL = 1e-3
ZF_IDENTITY_TOL = 1e-8

MC_SAMPLES = 20_000
KS_SAMPLES = 2_000

# KS critical value coefficient at the 0.1% level
KS_COEFF = 1.95


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    skipped: bool = False

    @property
    def status(self) -> str:
        if self.skipped:
            return "SKIP"
        return "PASS" if self.passed else "FAIL"


@dataclass
class ValidationReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def format(self) -> str:
        lines = [f"{c.status} {c.name}: {c.detail}" for c in self.checks]
        failed = sum(not c.passed for c in self.checks)
        lines.append(f"{len(self.checks) - failed}/{len(self.checks)} checks passed")
        return "\n".join(lines) + "\n"


def _rel_error(value: float, reference: float, floor: float = 1e-12) -> float:
    return abs(value - reference) / max(abs(reference), floor)


def _snr_grid(mu: float) -> np.ndarray:
    return mu * np.logspace(-3, 3, 13)


def check_cdf_bounds(scenario: SecrecyScenario, ctrl: SeriesControl) -> CheckResult:
    worst = 0.0
    for p in (scenario.fso_legit, scenario.fso_eve):
        values = np.array([gg_cdf(z, p, ctrl) for z in _snr_grid(p.mu)])
        if np.any(values < -1e-12) or np.any(values > 1 + 1e-12):
            return CheckResult("cdf_bounds", False, f"FSO CDF leaves [0, 1]: {values.min():.3g}..{values.max():.3g}")
        worst = max(worst, float(np.max(-np.diff(values), initial=0.0)))
    for fading in (scenario.rf_legit, scenario.rf_eve):
        values = np.asarray(sr_cdf(_snr_grid(fading.gamma_bar), fading))
        if np.any(values < 0) or np.any(values > 1):
            return CheckResult("cdf_bounds", False, "RF CDF leaves [0, 1]")
        worst = max(worst, float(np.max(-np.diff(values), initial=0.0)))
    return CheckResult("cdf_bounds", worst <= 1e-12, f"largest decrease {worst:.3g}")


def _log_mass(pdf: Callable, scale: float) -> float:
    """Integral of pdf over (0, inf) in u = ln x, split into decades around scale."""
    edges = np.log(scale) + np.log(10.0) * np.arange(-60, 4)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        piece, _ = integrate.quad(lambda u: pdf(math.exp(u)) * math.exp(u), lo, hi,
                                  limit=200, epsabs=0.0, epsrel=1e-11)
        total += piece
    tail, _ = integrate.quad(lambda u: pdf(math.exp(u)) * math.exp(u), edges[-1], edges[-1] + 30.0,
                             limit=200, epsabs=0.0, epsrel=1e-11)
    return total + tail


def check_pdf_mass(scenario: SecrecyScenario, ctrl: SeriesControl) -> CheckResult:
    errors = []
    for p in (scenario.fso_legit, scenario.fso_eve):
        errors.append(abs(_log_mass(lambda x: gg_pdf(x, p, ctrl), p.mu) - 1.0))
    for fading in (scenario.rf_legit, scenario.rf_eve):
        errors.append(abs(_log_mass(lambda x: float(sr_pdf(x, fading)), fading.gamma_bar) - 1.0))
    worst = max(errors)
    return CheckResult("pdf_mass", worst <= PDF_MASS_TOL, f"worst |mass - 1| = {worst:.3g}")


def check_selection_combining(scenario: SecrecyScenario, ctrl: SeriesControl) -> CheckResult:
    p, k = scenario.fso_legit, scenario.num_apertures
    worst = 0.0
    try:
        for z in _snr_grid(p.mu):
            series = sc_cdf(z, p, k, ctrl)
            product = sc_cdf_product(z, p, k, ctrl)
            worst = max(worst, _rel_error(series, product, 1e-300))
    except UnsupportedParameterError as e:
        return CheckResult("sc_series", True, str(e), skipped=True)
    return CheckResult("sc_series", worst <= SC_SERIES_RTOL, f"max rel. deviation {worst:.3g}")


def check_j_and_k(scenario: SecrecyScenario, ctrl: SeriesControl) -> CheckResult:
    th = scenario.gamma_th
    legit, eve = scenario.legit_sinr(), scenario.eve_sinr()
    worst_j = worst_k = 0.0
    try:
        for y in [th * f for f in (0.1, 0.5, 1.0, 2.0, 5.0)] + [math.inf]:
            worst_j = max(worst_j, _rel_error(j_integral(y, scenario, ctrl=ctrl),
                                              j_integral_quadrature(y, legit, eve)))
        for phi in [th * f for f in (0.5, 1.0, 2.0, 5.0, 10.0)]:
            worst_k = max(worst_k, _rel_error(k_integral(phi, scenario, ctrl),
                                              k_integral_quadrature(phi, scenario, ctrl)))
    except UnsupportedParameterError as e:
        return CheckResult("j_k_closed_forms", True, str(e), skipped=True)
    ok = worst_j <= JK_RTOL and worst_k <= JK_RTOL
    return CheckResult("j_k_closed_forms", ok, f"J rel. error {worst_j:.3g}, K rel. error {worst_k:.3g}")


def _closed_form(scenario: SecrecyScenario, ctrl: SeriesControl):
    try:
        return intercept_probability(scenario, ctrl), ""
    except (UnsupportedRegimeError, UnsupportedParameterError) as e:
        return None, str(e)


def check_ip_reference(scenario: SecrecyScenario, ctrl: SeriesControl) -> CheckResult:
    result, reason = _closed_form(scenario, ctrl)
    if result is None:
        return CheckResult("ip_vs_reference", True, reason, skipped=True)
    reference = intercept_probability_reference(scenario, ctrl)
    err = _rel_error(result.ip, reference.ip)
    return CheckResult(
        "ip_vs_reference", err <= IP_RTOL,
        f"closed form {result.ip!r} ({result.case_fired.value}), quadrature {reference.ip!r}, rel. error {err:.3g}",
    )


def check_monte_carlo(scenario: SecrecyScenario, ctrl: SeriesControl, seed: int = 0,
                      samples: int = MC_SAMPLES) -> CheckResult:
    result, _ = _closed_form(scenario, ctrl)
    analytic = result.ip if result is not None else intercept_probability_reference(scenario, ctrl).ip
    estimate = estimate_ip(scenario, samples, RngSpec(seed))

    # A zero-hit estimate has no spread; fall back to one trial's resolution
    sigma = max(estimate.std_error, 1.0 / samples)
    gap = abs(estimate.value - analytic)
    return CheckResult(
        "monte_carlo", gap <= 3.0 * sigma,
        f"MC {estimate.value!r} +/- {estimate.std_error:.3g} vs analytic {analytic!r} ({gap / sigma:.2f} sigma)",
    )


def check_zf_identity(scenario: SecrecyScenario, ctrl: Optional[SeriesControl] = None) -> CheckResult:
    ctx = scenario.precoding
    identity = ctx.v_legit @ ctx.a_inv
    err = float(np.max(np.abs(identity - np.eye(ctx.num_beams))))
    return CheckResult("zf_identity", err <= ZF_IDENTITY_TOL, f"max |V A - I| = {err:.3g}")


def check_samplers(scenario: SecrecyScenario, ctrl: SeriesControl, seed: int = 0,
                   samples: int = KS_SAMPLES) -> CheckResult:
    spec = RngSpec(seed, stream=(1,))
    critical = KS_COEFF / math.sqrt(samples)
    stats = {}
    fso = scenario.fso_legit
    stats["fso"] = ks_distance(sample_gg_pe(fso, spec.generator(0), samples), lambda z: gg_cdf(z, fso, ctrl))
    for name, fading in (("rf_legit", scenario.rf_legit), ("rf_eve", scenario.rf_eve)):
        draws = sample_shadowed_rician(fading, spec.generator(len(stats)), samples)
        stats[name] = ks_distance(draws, lambda z, f=fading: float(sr_cdf(z, f)))
    worst = max(stats.values())
    detail = ", ".join(f"{k} {v:.4f}" for k, v in stats.items())
    return CheckResult("sampler_ks", worst <= critical, f"KS {detail} (critical {critical:.4f})")


CHECKS = (
    ("cdf_bounds", check_cdf_bounds),
    ("pdf_mass", check_pdf_mass),
    ("sc_series", check_selection_combining),
    ("j_k_closed_forms", check_j_and_k),
    ("ip_vs_reference", check_ip_reference),
    ("monte_carlo", check_monte_carlo),
    ("zf_identity", check_zf_identity),
    ("sampler_ks", check_samplers),
)


def run_validation(scenario: SecrecyScenario, ctrl: SeriesControl, seed: int = 0) -> ValidationReport:
    """Run every check; a check that raises is reported as a failure."""
    report = ValidationReport()
    for name, check in CHECKS:
        kwargs = {"seed": seed} if check in (check_monte_carlo, check_samplers) else {}
        try:
            result = check(scenario, ctrl, **kwargs)
        except SatsecError as e:
            result = CheckResult(name, False, f"{type(e).__name__}: {e}")
        log.log(logging.INFO if result.passed else logging.ERROR, f"{result.status} {name}: {result.detail}")
        report.checks.append(result)
    return report
