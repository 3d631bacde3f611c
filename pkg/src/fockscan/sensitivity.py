"""Closed-form science outputs: thermal occupation, scan rate, exclusion reach.

The scan rate is the DM bandwidth (one coherence linewidth, 1/tau_dm, per
tuning step) divided by the per-step exposure needed to reach the target
signal-to-noise ratio zeta at the target kinetic mixing.  The efficiency
factor eta is an input here; the protocol layer measures it as the ratio of
simulated to ideal peak SNR, and eta = 1 gives the loss-free curves.

Every formula is evaluated through two independently coded routes (direct
SI and natural-units-then-convert) and the pair is required to agree to
1e-10 relative, as a standing dimensional audit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .drive import (
    CONSTANTS,
    CavityGeometry,
    DMParams,
    PhysicalConstants,
    cavity_volume_tm010,
    coupling_g,
    form_factor_tm010,
)
from .errors import BudgetTooSmall, InvalidArgument

_AUDIT_RTOL = 1e-10


@dataclass(frozen=True)
class SensitivityParams:
    """Inputs for the projection formulas (SI units; temperatures in K)."""

    rho_dm: float
    q_cav: float
    n_cavities: int
    fock_m: int
    temp_cavity: float
    target_epsilon: float
    q_dm: float = 1e6
    zeta_snr: float = 1.62
    eta: float = 1.0

    def __post_init__(self):
        if self.zeta_snr <= 0:
            raise InvalidArgument("zeta_snr must be positive")
        if not 0 < self.eta <= 1:
            raise InvalidArgument("eta must lie in (0, 1]")


def thermal_occupation(omega: float, temp: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """Bose-Einstein occupation (exp(hbar w / k T) - 1)^-1, underflow-safe."""
    if temp <= 0:
        raise InvalidArgument("temperature must be positive")
    if omega <= 0:
        raise InvalidArgument("omega must be positive")
    x = constants.hbar * omega / (constants.k_b * temp)
    if x > 40.0:
        # 1/(e^x - 1) = e^-x (1 + e^-x + ...); the correction is < e^-40
        return math.exp(-x)
    return 1.0 / math.expm1(x)


@dataclass(frozen=True)
class ScanRateResult:
    rate: float           # DM bandwidth per second, rad/s per s
    rate_hz_per_s: float  # same in Hz/s
    tau_tot_step: float   # exposure per tuning step, s
    n_th: float
    coupling: float       # g at the target mixing, rad/s


def scan_rate(
    params: SensitivityParams,
    geometry: CavityGeometry,
    constants: PhysicalConstants = CONSTANTS,
) -> ScanRateResult:
    """Scan rate at the target mixing, plus the per-step exposure.

    tau_tot = zeta^2 w n_th / (4 eta^2 g^4 tau_dm^2 Q_cav N^2 (m+1)),
    rate = (w / Q_dm) / tau_tot
         = 16 eta^2 eps^4 G^2 rho^2 V^2 Q_dm Q_cav N^2 (m+1) / (hbar^2 zeta^2 n_th).
    """
    omega = geometry.omega
    n_th = thermal_occupation(omega, params.temp_cavity, constants)
    dm = DMParams(
        epsilon=params.target_epsilon, rho_dm=params.rho_dm, omega_dm=omega, q_dm=params.q_dm
    )
    g = coupling_g(dm, geometry, constants)
    tau_dm = dm.tau_dm
    tau_tot = (
        params.zeta_snr ** 2 * omega * n_th
        / (4.0 * params.eta ** 2 * g ** 4 * tau_dm ** 2 * params.q_cav
           * params.n_cavities ** 2 * (params.fock_m + 1))
    )
    rate_si = (omega / params.q_dm) / tau_tot

    # independent route: natural units (hbar = c = 1, rad/s as the energy unit)
    rho_nat = params.rho_dm * constants.c ** 3 / constants.hbar   # (rad/s)^4
    vol_nat = geometry.volume / constants.c ** 3                  # (s/rad)^3
    rate_nat = (
        16.0 * params.eta ** 2 * params.target_epsilon ** 4 * geometry.form_factor_g ** 2
        * rho_nat ** 2 * vol_nat ** 2 * params.q_dm * params.q_cav
        * params.n_cavities ** 2 * (params.fock_m + 1)
        / (params.zeta_snr ** 2 * n_th)
    )
    if abs(rate_nat - rate_si) > _AUDIT_RTOL * abs(rate_si):
        raise ArithmeticError(
            f"unit audit failed: SI route {rate_si!r} vs natural route {rate_nat!r}"
        )
    return ScanRateResult(
        rate=rate_si,
        rate_hz_per_s=rate_si / (2.0 * math.pi),
        tau_tot_step=tau_tot,
        n_th=n_th,
        coupling=g,
    )


def exclusion_epsilon(
    omega: float,
    params: SensitivityParams,
    tau_tot: float,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """Kinetic mixing excluded after exposure tau_tot at frequency omega.

    eps(w) = [ n_th zeta^2 w hbar^2 /
               (16 eta^2 G^2 rho^2 Q_dm^2 Q_cav V(w)^2 tau_tot (m+1) N^2) ]^(1/4),
    with V(w) the TM010 frequency-volume relation.
    """
    if tau_tot <= 0 or omega <= 0:
        raise InvalidArgument("omega and tau_tot must be positive")
    volume = cavity_volume_tm010(omega, constants)
    g_form = form_factor_tm010()
    n_th = thermal_occupation(omega, params.temp_cavity, constants)
    eps4_si = (
        n_th * params.zeta_snr ** 2 * omega * constants.hbar ** 2
        / (16.0 * params.eta ** 2 * g_form ** 2 * params.rho_dm ** 2
           * params.q_dm ** 2 * params.q_cav * volume ** 2 * tau_tot
           * (params.fock_m + 1) * params.n_cavities ** 2)
    )
    # independent route in natural units
    rho_nat = params.rho_dm * constants.c ** 3 / constants.hbar
    vol_nat = volume / constants.c ** 3
    eps4_nat = (
        n_th * params.zeta_snr ** 2 * omega
        / (16.0 * params.eta ** 2 * g_form ** 2 * rho_nat ** 2 * vol_nat ** 2
           * params.q_dm ** 2 * params.q_cav * tau_tot
           * (params.fock_m + 1) * params.n_cavities ** 2)
    )
    eps_si = eps4_si ** 0.25
    if abs(eps4_nat ** 0.25 - eps_si) > _AUDIT_RTOL * eps_si:
        raise ArithmeticError("unit audit failed in exclusion_epsilon")
    return eps_si


@dataclass(frozen=True)
class ReachBand:
    """Frequency interval covered before the time budget runs out."""

    omega_start: float
    omega_end: float
    n_steps: int
    total_time: float
    steps: tuple  # (omega, tau_tot, cumulative_time) triples

    @property
    def freq_start_hz(self) -> float:
        return self.omega_start / (2.0 * math.pi)

    @property
    def freq_end_hz(self) -> float:
        return self.omega_end / (2.0 * math.pi)


def reach_band(
    target_epsilon: float,
    time_budget: float,
    params: SensitivityParams,
    omega_start: float,
    constants: PhysicalConstants = CONSTANTS,
    max_steps: int = 2_000_000,
) -> ReachBand:
    """Accumulate tuning steps of width 1/tau_dm until the budget is spent.

    The step size is evaluated at the running frequency (a geometric-like
    progression, d omega = omega / Q_dm), and each step costs the exposure
    that reaches zeta_snr at the target mixing.
    """
    if time_budget <= 0:
        raise BudgetTooSmall("time budget must be positive")
    work = SensitivityParams(
        rho_dm=params.rho_dm, q_cav=params.q_cav, n_cavities=params.n_cavities,
        fock_m=params.fock_m, temp_cavity=params.temp_cavity,
        target_epsilon=target_epsilon, q_dm=params.q_dm,
        zeta_snr=params.zeta_snr, eta=params.eta,
    )
    g_form = form_factor_tm010()
    omega = omega_start
    spent = 0.0
    steps = []
    tau_tot = math.inf
    for _ in range(max_steps):
        geometry = CavityGeometry(
            omega=omega, volume=cavity_volume_tm010(omega, constants), form_factor_g=g_form
        )
        tau_tot = scan_rate(work, geometry, constants).tau_tot_step
        if spent + tau_tot > time_budget:
            break
        spent += tau_tot
        steps.append((omega, tau_tot, spent))
        omega = omega * (1.0 + 1.0 / params.q_dm)
    if not steps:
        raise BudgetTooSmall(
            f"budget {time_budget:g} s cannot afford one step (first step needs {tau_tot:g} s)"
        )
    return ReachBand(
        omega_start=omega_start,
        omega_end=steps[-1][0],
        n_steps=len(steps),
        total_time=spent,
        steps=tuple(steps),
    )
