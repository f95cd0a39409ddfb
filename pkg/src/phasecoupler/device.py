"""Circuit constants and closed-form coupler physics.

The coupler junction acts as a bias-tuneable inductance ``L_c`` that is
balanced against a fixed negative mutual ``-M``; the resulting exchange rate
between the two qubits is proportional to ``M - L_c``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

#: Superconducting flux quantum h/2e in webers.
PHI0 = 2.067833848e-15

# relative bisection tolerance on the bias, in units of i_c0
_BISECT_TOL = 1e-6


class BiasAtOrBeyondCritical(ValueError):
    """Raised when the coupler bias reaches the junction critical current."""


@dataclass(frozen=True)
class DeviceParams:
    """All circuit constants in SI units.

    Inductances in henries, capacitance in farads, currents in amperes,
    frequencies in hertz, times in seconds. ``omega_c0`` is an angular
    frequency (rad/s). ``bias_shift_coeff`` is the qubit frequency shift per
    ampere of coupler bias, shared by both qubits. ``t1_a``/``t1_b`` may be
    ``math.inf`` to switch off relaxation.
    """

    c: float = 1e-12
    l: float = 750e-12
    l_s: float = 2657e-12
    l_m: float = 390e-12
    m: float = 190e-12
    l_z: float = 9e-9
    i_c0: float = 1.58e-6
    f10_a: float = 6.0e9
    f10_b: float = 5.8e9
    n_a: float = 5.0
    n_b: float = 5.0
    t1_a: float = 350e-9
    t1_b: float = 350e-9
    omega_c0: float = 2 * math.pi * 30e9
    bias_shift_coeff: float = 10e6 / 1e-6
    l_offset: float = 0.0

    def __post_init__(self):
        positive = ("c", "l", "l_s", "l_m", "m", "l_z", "i_c0", "f10_a", "f10_b",
                    "t1_a", "t1_b", "omega_c0")
        for name in positive:
            value = getattr(self, name)
            if not (value > 0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        for name in ("n_a", "n_b"):
            if not getattr(self, name) >= 2:
                raise ValueError(f"{name} must be >= 2 (at least two levels in the well)")
        if not math.isfinite(self.bias_shift_coeff) or not math.isfinite(self.l_offset):
            raise ValueError("bias_shift_coeff and l_offset must be finite")

    def replace(self, **changes) -> "DeviceParams":
        return dataclasses.replace(self, **changes)

    def swapped(self) -> "DeviceParams":
        """Same device with the roles of qubits A and B exchanged."""
        return self.replace(f10_a=self.f10_b, f10_b=self.f10_a, n_a=self.n_b,
                            n_b=self.n_a, t1_a=self.t1_b, t1_b=self.t1_a)

    @property
    def loop_inductance(self) -> float:
        """L_s + L_M + L, the series inductance of one shunting loop."""
        return self.l_s + self.l_m + self.l


def paper_params() -> DeviceParams:
    """Printed device constants, no calibration offset."""
    return DeviceParams()


def figure_params() -> DeviceParams:
    """Constants used for figure reproduction.

    The printed M = 190 pH is below L_c(0) = 208.3 pH, so the coupler could
    never be switched off; shifting the effective mutual to 209 pH puts the
    zero crossing just above zero bias.
    """
    return DeviceParams(l_offset=19e-12)


def reset_study_params() -> DeviceParams:
    """Constants quoted for the flux-branch study: i_c0 = 1.6 uA, loop 4.2 nH.

    ``l`` absorbs the difference so that L_s + L_M + L = 4.2 nH.
    """
    return DeviceParams(i_c0=1.6e-6, l=4.2e-9 - 2657e-12 - 390e-12)


def _check_bias(params: DeviceParams, i_cb) -> None:
    worst = float(np.max(np.abs(i_cb)))
    if not worst < params.i_c0:
        raise BiasAtOrBeyondCritical(
            f"|i_cb| = {worst:.6g} A must stay below i_c0 = {params.i_c0:.6g} A")


def junction_inductance(params: DeviceParams, i_cb):
    """Josephson inductance of the coupler junction at bias ``i_cb``.

    Accepts a scalar or an array of biases.
    """
    _check_bias(params, i_cb)
    x = np.asarray(i_cb, dtype=float) / params.i_c0
    out = PHI0 / (2 * math.pi * params.i_c0 * np.sqrt(1.0 - x * x))
    return float(out) if out.ndim == 0 else out


def coupling_strength(params: DeviceParams, i_cb):
    """Signed coupling strength Omega_c in rad/s.

    Uses qubit A's idle frequency as the reference omega_10.
    """
    l_c = junction_inductance(params, i_cb)
    omega10 = 2 * math.pi * params.f10_a
    return (params.m + params.l_offset - l_c) / ((params.l_m + params.l_s) ** 2 * omega10 * params.c)


def effective_inductance(params: DeviceParams, i_cb: float, omega: float) -> float:
    """Junction inductance seen at angular frequency ``omega``.

    The junction capacitance resonates with L_c at ``omega_c0``, which pulls
    the effective inductance down as ``1 - (omega/omega_c0)**2``.
    """
    if not abs(omega) < params.omega_c0:
        raise ValueError("omega must be below the junction self-resonance omega_c0")
    return junction_inductance(params, i_cb) * (1.0 - (omega / params.omega_c0) ** 2)


@dataclass(frozen=True)
class NotReachable:
    """Zero coupling cannot be reached; carries the best achievable point."""

    bias: float
    residual_omega_c: float


def zero_coupling_bias(params: DeviceParams) -> float | NotReachable:
    """Non-negative coupler bias at which Omega_c vanishes.

    Returns a :class:`NotReachable` report when M + l_offset < L_c(0), since
    L_c only grows with |i_cb| and the numerator can then never change sign.
    """
    omega0 = coupling_strength(params, 0.0)
    if omega0 < 0:
        return NotReachable(bias=0.0, residual_omega_c=omega0)
    if omega0 == 0:
        return 0.0
    lo, hi = 0.0, params.i_c0 * (1 - 1e-15)
    while hi - lo > _BISECT_TOL * params.i_c0:
        mid = 0.5 * (lo + hi)
        if coupling_strength(params, mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def off_bias(params: DeviceParams) -> float:
    """Bias used as "coupler off": the zero crossing, or the min-|Omega_c| bias."""
    b = zero_coupling_bias(params)
    return b.bias if isinstance(b, NotReachable) else b


def bias_for_coupling(params: DeviceParams, omega_target: float) -> float:
    """Non-negative bias whose |Omega_c| equals ``omega_target`` (rad/s).

    Searches above the zero-coupling bias, where |Omega_c| rises monotonically
    toward the critical current.
    """
    if omega_target < 0:
        raise ValueError("omega_target is a magnitude and must be >= 0")
    lo = off_bias(params)
    if abs(coupling_strength(params, lo)) >= omega_target:
        return lo
    hi = params.i_c0 * (1 - 1e-12)
    if abs(coupling_strength(params, hi)) < omega_target:
        raise BiasAtOrBeyondCritical(
            f"|Omega_c| = {omega_target:.6g} rad/s needs a bias at or beyond i_c0")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if abs(coupling_strength(params, mid)) < omega_target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * params.i_c0:
            break
    return 0.5 * (lo + hi)
