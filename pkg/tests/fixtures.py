"""
Small two-beam scenarios shared by the secrecy and Monte Carlo tests.

The legitimate V matrix is the identity under ZF, so the eavesdropper's
cross-coupling c alone sets its saturation level 1 / c^2.
"""

import math

import numpy as np

from channel import ShadowedRicianParams, TurbulenceParams, make_precoding_context
from secrecy import PrecodingMode, SecrecyScenario

LEGIT_FSO = TurbulenceParams(alpha=2.5, beta=1.8, xi2=1.1, mu=1e3)
EVE_FSO = TurbulenceParams(alpha=3.0, beta=2.2, xi2=0.9, mu=1e2)
RF_LEGIT = ShadowedRicianParams(b=1.4, m_s=2, omega=3.0, gamma_bar=50.0)
RF_EVE = ShadowedRicianParams(b=1.4, m_s=2, omega=3.0, gamma_bar=10.0)

GAMMA_TH = 100.0

CASE1_COUPLING = 0.2                    # 25 < gamma_th
CASE2_COUPLING = math.sqrt(1.0 / 150)   # 150 in [gamma_th, 2 gamma_th)
CASE3_COUPLING = 0.05                   # 400 >= 2 gamma_th


def coupled(c: float) -> np.ndarray:
    return np.array([[1.0, c], [c, 1.0]])


def zf_scenario(coupling: float, **changes) -> SecrecyScenario:
    ctx = make_precoding_context(np.eye(2), coupled(coupling), p_sat=1.0)
    fields = dict(fso_legit=LEGIT_FSO, fso_eve=EVE_FSO, rf_legit=RF_LEGIT, rf_eve=RF_EVE,
                  precoding=ctx, mode=PrecodingMode.ZF, gamma_th=GAMMA_TH, num_apertures=2)
    fields.update(changes)
    return SecrecyScenario(**fields)


def nzf_scenario(legit_coupling: float, eve_coupling: float, **changes) -> SecrecyScenario:
    ctx = make_precoding_context(coupled(legit_coupling), coupled(eve_coupling), p_sat=1.0)
    return zf_scenario(CASE1_COUPLING, precoding=ctx, mode=PrecodingMode.NZF, **changes)
