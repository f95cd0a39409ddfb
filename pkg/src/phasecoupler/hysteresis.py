"""Flux branches of the inductively shunted coupler junction and branch reset.

The coupler junction is shunted by the two qubit loops. Current balance with
a single effective shunt gives the normalized bias as a function of the
junction phase,

    i_cb / i_c0 = sin(delta) + delta / beta,

which is multivalued once beta > 1. Stable branches are the rising pieces of
this curve (cos(delta) > -1/beta). Branch ``k`` is the stable piece centred on
``delta = 2*pi*k``; branch 0 is the central branch the reset protocol targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .device import PHI0, DeviceParams

_ROOT_TOL = 1e-13
_GRID_PER_RADIAN = 64


class NoStableBranch(RuntimeError):
    pass


class TargetNotStable(RuntimeError):
    pass


@dataclass(frozen=True)
class BranchPoint:
    """Operating point of the coupler junction.

    ``branch_id`` is ``round(delta / 2pi)`` for stable points and ``None`` for
    unstable ones (they sit between two stable branches). ``switched`` marks
    a point reached through a branch switch in :func:`follow_branch`.
    """

    delta: float
    bias: float
    stable: bool
    branch_id: int | None
    switched: bool = False

    @property
    def flux(self) -> float:
        return PHI0 * self.delta / (2 * math.pi)


@dataclass(frozen=True)
class ResetConfig:
    i_cb_minus: float
    i_cb_plus: float
    n_cycles: int = 30
    per_cycle_survival_q: float = 0.746

    def __post_init__(self):
        if not self.i_cb_minus < self.i_cb_plus:
            raise ValueError("reset rails need i_cb_minus < i_cb_plus")
        if self.n_cycles < 1:
            raise ValueError("n_cycles must be >= 1")
        if not 0.0 <= self.per_cycle_survival_q < 1.0:
            raise ValueError("per_cycle_survival_q must lie in [0, 1)")


@dataclass
class ResetResult:
    distribution: dict[int, float]
    residual_error: float
    residual_by_cycle: list[float] = field(default_factory=list)


def beta(params: DeviceParams) -> float:
    """Screening parameter of the junction plus its shunting loops."""
    return 2 * math.pi * params.i_c0 * params.loop_inductance / (2 * PHI0)


def branch_equation(delta, beta):
    """Normalized bias sustaining junction phase ``delta``."""
    return np.sin(delta) + delta / beta


def _slope(delta, beta):
    return np.cos(delta) + 1.0 / beta


def _is_stable(delta: float, b: float) -> bool:
    return math.cos(delta) > -1.0 / b


def _branch_id(delta: float, b: float) -> int | None:
    if b <= 1.0:
        return 0
    if not _is_stable(delta, b):
        return None
    return int(round(delta / (2 * math.pi)))


def _half_width(b: float) -> float:
    # phase half-width of a stable branch, measured from its centre 2*pi*k
    return math.acos(-1.0 / b)


def branch_range(k: int, b: float) -> tuple[float, float]:
    """Normalized bias interval over which stable branch ``k`` exists."""
    if b <= 1.0:
        return (-math.inf, math.inf)
    a = _half_width(b)
    centre = 2 * math.pi * k
    return (float(branch_equation(centre - a, b)), float(branch_equation(centre + a, b)))


def _roots(i_norm: float, b: float) -> list[float]:
    # every root obeys |delta| <= beta * (|i| + 1)
    half = b * (abs(i_norm) + 1.0) + 1.0
    n = max(64, int(2 * half * _GRID_PER_RADIAN))
    grid = np.linspace(-half, half, n + 1)
    g = branch_equation(grid, b) - i_norm
    roots = []
    for j in range(n):
        g0, g1 = g[j], g[j + 1]
        if g0 == 0.0:
            roots.append(float(grid[j]))
        elif g0 * g1 < 0:
            roots.append(brentq(lambda d: branch_equation(d, b) - i_norm,
                                grid[j], grid[j + 1], xtol=_ROOT_TOL, rtol=4 * np.finfo(float).eps))
    # tangential roots (turning points hit exactly) show up as a sign-free
    # minimum of |g|; polish them on the slope zero
    extra = []
    for j in range(1, n):
        if abs(g[j]) < abs(g[j - 1]) and abs(g[j]) < abs(g[j + 1]) and g[j - 1] * g[j + 1] > 0:
            s0, s1 = _slope(grid[j - 1], b), _slope(grid[j + 1], b)
            if s0 * s1 < 0:
                d = brentq(lambda d: _slope(d, b), grid[j - 1], grid[j + 1], xtol=_ROOT_TOL)
                if abs(branch_equation(d, b) - i_norm) <= 1e-10:
                    extra.append(float(d))
    out = sorted(roots + extra)
    dedup = []
    for d in out:
        if not dedup or d - dedup[-1] > 1e-9:
            dedup.append(d)
    return dedup


def enumerate_branches(i_cb: float, params: DeviceParams) -> list[BranchPoint]:
    """All operating points at bias ``i_cb``, ordered by phase."""
    b = beta(params)
    i_norm = i_cb / params.i_c0
    points = []
    for d in _roots(i_norm, b):
        stable = b <= 1.0 or _is_stable(d, b)
        points.append(BranchPoint(delta=d, bias=i_cb, stable=stable, branch_id=_branch_id(d, b)))
    return points


def stable_branch_ids(i_cb: float, params: DeviceParams) -> list[int]:
    return [p.branch_id for p in enumerate_branches(i_cb, params) if p.stable]


def _solve_on_branch(k: int, i_norm: float, b: float) -> float | None:
    """Phase on stable branch ``k`` at bias ``i_norm``, or None if it has vanished."""
    if b <= 1.0:
        half = b * (abs(i_norm) + 1.0) + 1.0
        return brentq(lambda d: branch_equation(d, b) - i_norm, -half, half, xtol=_ROOT_TOL)
    a = _half_width(b)
    lo, hi = 2 * math.pi * k - a, 2 * math.pi * k + a
    glo, ghi = branch_equation(lo, b) - i_norm, branch_equation(hi, b) - i_norm
    if glo > 0 or ghi < 0:
        return None
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    return brentq(lambda d: branch_equation(d, b) - i_norm, lo, hi, xtol=_ROOT_TOL)


def follow_branch(current_point: BranchPoint, new_i_cb: float, params: DeviceParams,
                  n_steps: int = 200) -> BranchPoint:
    """Carry an operating point adiabatically to a new bias.

    The bias is moved in small steps. When the occupied branch disappears at
    its turning point, the junction lands on the stable branch whose phase is
    closest to where the old root vanished, and continues from there.
    """
    if not current_point.stable:
        raise ValueError("follow_branch needs a stable starting point")
    b = beta(params)
    i_start = float(branch_equation(current_point.delta, b))
    i_end = new_i_cb / params.i_c0
    k = _branch_id(current_point.delta, b)
    delta = current_point.delta
    switched = False
    for i_norm in np.linspace(i_start, i_end, n_steps + 1)[1:]:
        d = _solve_on_branch(k, float(i_norm), b)
        while d is None:
            # root vanished at the turning point nearest the direction of travel
            a = _half_width(b)
            edge = 2 * math.pi * k + (a if i_norm > i_start else -a)
            candidates = [p for p in enumerate_branches(float(i_norm) * params.i_c0, params)
                          if p.stable and p.branch_id != k]
            if not candidates:
                raise NoStableBranch(f"no stable branch at i_cb/i_c0 = {float(i_norm):.6g}")
            nearest = min(candidates, key=lambda p: abs(p.delta - edge))
            k = nearest.branch_id
            switched = True
            d = _solve_on_branch(k, float(i_norm), b)
        delta = d
    return BranchPoint(delta=delta, bias=new_i_cb, stable=True,
                       branch_id=_branch_id(delta, b), switched=switched)


def branch_point(k: int, i_cb: float, params: DeviceParams) -> BranchPoint:
    """Operating point on stable branch ``k`` at ``i_cb``."""
    b = beta(params)
    d = _solve_on_branch(k, i_cb / params.i_c0, b)
    if d is None:
        raise NoStableBranch(f"branch {k} does not exist at i_cb = {i_cb:.6g} A")
    return BranchPoint(delta=d, bias=i_cb, stable=True, branch_id=_branch_id(d, b))


def _loses_stability(k: int, lo: float, hi: float, b: float) -> bool:
    kmin, kmax = branch_range(k, b)
    return kmin > lo or kmax < hi


def _cycle_destination(k: int, config: ResetConfig, params: DeviceParams) -> int:
    """Branch reached from branch ``k`` after one up/down sweep across the rails."""
    b = beta(params)
    kmin, kmax = branch_range(k, b)
    # start where branch k exists, as close to the lower rail as possible
    start = min(max(config.i_cb_minus / params.i_c0, kmin), kmax)
    start = min(max(start, kmin + 1e-9), kmax - 1e-9)
    point = branch_point(k, start * params.i_c0, params)
    point = follow_branch(point, config.i_cb_plus, params)
    point = follow_branch(point, config.i_cb_minus, params)
    return point.branch_id


def simulate_reset(initial: dict[int, float], config: ResetConfig,
                   params: DeviceParams) -> ResetResult:
    """Propagate a branch-occupation distribution through reset cycles.

    Every branch other than the target (0) that loses stability somewhere
    between the rails is switched out each cycle, except for a surviving
    fraction ``per_cycle_survival_q``. The switched mass goes where the
    deterministic sweep takes it. No sampling is involved.
    """
    b = beta(params)
    lo, hi = config.i_cb_minus / params.i_c0, config.i_cb_plus / params.i_c0
    if b > 1.0 and _loses_stability(0, lo, hi, b):
        raise TargetNotStable("branch 0 is not stable across the reset rails")
    q = config.per_cycle_survival_q
    dist = {int(k): float(v) for k, v in initial.items() if v != 0}
    dest_cache: dict[int, int] = {}
    history = []
    for _ in range(config.n_cycles):
        new: dict[int, float] = {}
        for k, mass in dist.items():
            if k != 0 and b > 1.0 and _loses_stability(k, lo, hi, b):
                if k not in dest_cache:
                    dest_cache[k] = _cycle_destination(k, config, params)
                dest = dest_cache[k]
                new[k] = new.get(k, 0.0) + q * mass
                new[dest] = new.get(dest, 0.0) + (1 - q) * mass
            else:
                new[k] = new.get(k, 0.0) + mass
        dist = new
        history.append(sum(v for k, v in dist.items() if k != 0))
    return ResetResult(distribution=dict(sorted(dist.items())), residual_error=history[-1],
                       residual_by_cycle=history)


def branch_frequency_shift(point: BranchPoint, params: DeviceParams) -> float:
    """Qubit frequency shift (Hz) caused by the loop current of a flux branch."""
    return params.bias_shift_coeff * point.flux / params.loop_inductance


def branch_map(params: DeviceParams, i_min: float, i_max: float, n: int = 201) -> list[BranchPoint]:
    """All operating points over a bias sweep, for plotting flux vs bias."""
    out = []
    for i_cb in np.linspace(i_min, i_max, n):
        out.extend(enumerate_branches(float(i_cb), params))
    return out
