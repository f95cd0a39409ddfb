"""Two-qubit open-system dynamics in a rotating frame.

Each phase qubit is a two-level system. States are 4x4 density matrices over
``|00>, |01>, |10>, |11>`` with the first label qubit A and the second label
qubit B. Hamiltonians are in angular-frequency units (hbar = 1).

Pauli conventions: ``sz = |1><1| - |0><0|`` so that a positive detuning
raises the excited state, and ``sm = |0><1|`` lowers it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.linalg import expm

from .device import DeviceParams

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[-1, 0], [0, 1]], dtype=complex)
SM = np.array([[0, 1], [0, 0]], dtype=complex)
SP = SM.conj().T
I2 = np.eye(2, dtype=complex)

BASIS = ("00", "01", "10", "11")
SWAP = np.eye(4)[[0, 2, 1, 3]]

DEFAULT_DT = 0.05e-9
MAX_STEP_PHASE = 0.25


class StepTooCoarse(ValueError):
    pass


def _kron(a, b):
    return np.kron(a, b)


_SZ_A, _SZ_B = _kron(SZ, I2), _kron(I2, SZ)
_SX_A, _SX_B = _kron(SX, I2), _kron(I2, SX)
_SY_A, _SY_B = _kron(SY, I2), _kron(I2, SY)
_SM_A, _SM_B = _kron(SM, I2), _kron(I2, SM)
_XX = _kron(SX, SX)
_ZZ = _kron(SZ, SZ)
_EXCHANGE = _kron(SP, SM) + _kron(SM, SP)


@dataclass(frozen=True)
class ControlSnapshot:
    """Instantaneous controls, all in rad/s except the drive phases."""

    detune_a: float = 0.0
    detune_b: float = 0.0
    rabi_a: float = 0.0
    phase_a: float = 0.0
    rabi_b: float = 0.0
    phase_b: float = 0.0
    omega_c: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_tuple()):
            raise ValueError("control values must be finite")

    def as_tuple(self) -> tuple:
        return (self.detune_a, self.detune_b, self.rabi_a, self.phase_a,
                self.rabi_b, self.phase_b, self.omega_c)


_FIELDS = ("detune_a", "detune_b", "rabi_a", "phase_a", "rabi_b", "phase_b", "omega_c")


@dataclass
class ControlTrace:
    """Piecewise-constant controls, run-length encoded.

    Entry ``k`` covers ``repeat[k]`` consecutive steps of length ``dt[k]``
    starting at ``t[k]``, all with controls ``values[k]``. Columns of
    ``values`` follow :class:`ControlSnapshot` field order.

    ``nodes``, when given, holds the controls at the two Gauss-Legendre
    points of each step, shape ``(n, 2, 7)``; steps whose two nodes differ
    are then propagated with a fourth-order Magnus generator.
    """

    t: np.ndarray
    dt: np.ndarray
    values: np.ndarray
    repeat: np.ndarray | None = None
    nodes: np.ndarray | None = None

    def __post_init__(self):
        if self.repeat is None:
            self.repeat = np.ones(len(self.dt), dtype=np.int64)

    def __len__(self):
        return len(self.dt)

    @property
    def n_steps(self) -> int:
        return int(np.sum(self.repeat))

    def expanded(self) -> "ControlTrace":
        """One entry per step."""
        rep = self.repeat
        offs = np.concatenate([np.arange(r) for r in rep]) if len(rep) else np.zeros(0)
        t = np.repeat(self.t, rep) + offs * np.repeat(self.dt, rep)
        nodes = None if self.nodes is None else np.repeat(self.nodes, rep, axis=0)
        return ControlTrace(t, np.repeat(self.dt, rep), np.repeat(self.values, rep, axis=0),
                            nodes=nodes)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, _FIELDS.index(name)]

    def snapshot(self, k: int) -> ControlSnapshot:
        return ControlSnapshot(*map(float, self.values[k]))

    @property
    def t_start(self) -> float:
        return float(self.t[0]) if len(self.t) else 0.0

    @property
    def t_end(self) -> float:
        return float(self.t[-1] + self.dt[-1] * self.repeat[-1]) if len(self.t) else 0.0

    def __call__(self, t: float) -> ControlSnapshot:
        k = int(np.searchsorted(self.t, t, side="right")) - 1
        return self.snapshot(min(max(k, 0), len(self.t) - 1))


@dataclass(frozen=True)
class TwoQubitState:
    rho: np.ndarray

    @classmethod
    def basis(cls, label: str) -> "TwoQubitState":
        """Pure computational basis state, e.g. ``"10"`` for A excited."""
        psi = np.zeros(4, dtype=complex)
        psi[BASIS.index(label)] = 1.0
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def from_ket(cls, psi) -> "TwoQubitState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def mixed(cls) -> "TwoQubitState":
        return cls(np.eye(4, dtype=complex) / 4)

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))

    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)))

    def check(self, herm_tol=1e-10, trace_tol=1e-9, psd_tol=1e-9) -> None:
        rho = self.rho
        if rho.shape != (4, 4):
            raise ValueError("density matrix must be 4x4")
        if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > trace_tol:
            raise ValueError("density matrix does not have unit trace")
        if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -psd_tol:
            raise ValueError("density matrix is not positive semidefinite")


@dataclass(frozen=True)
class MeasurementModel:
    """Readout map: ``reported = true @ confusion`` (rows are true outcomes)."""

    confusion: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        c = np.asarray(self.confusion, dtype=float)
        if c.shape != (4, 4):
            raise ValueError("confusion matrix must be 4x4")
        if np.any(c < 0) or np.any(c > 1):
            raise ValueError("confusion entries must lie in [0, 1]")
        if np.max(np.abs(c.sum(axis=1) - 1)) > 1e-12:
            raise ValueError("confusion rows must sum to 1")

    @classmethod
    def from_readout_errors(cls, e0_a=0.0, e1_a=0.0, e0_b=0.0, e1_b=0.0) -> "MeasurementModel":
        """Independent single-qubit errors; ``e0`` is P(read 1 | 0), ``e1`` is P(read 0 | 1)."""
        ma = np.array([[1 - e0_a, e0_a], [e1_a, 1 - e1_a]])
        mb = np.array([[1 - e0_b, e0_b], [e1_b, 1 - e1_b]])
        return cls(np.kron(ma, mb))


def zz_weight(params: DeviceParams) -> float:
    """Relative weight of the sz-sz term next to the exchange term."""
    return 1.0 / (6.0 * math.sqrt(params.n_a * params.n_b))


def build_hamiltonian(snapshot: ControlSnapshot, params: DeviceParams, rwa: bool = True,
                      include_zz: bool = True) -> np.ndarray:
    s = snapshot
    h = 0.5 * s.detune_a * _SZ_A + 0.5 * s.detune_b * _SZ_B
    if s.rabi_a:
        h = h + 0.5 * s.rabi_a * (math.cos(s.phase_a) * _SX_A + math.sin(s.phase_a) * _SY_A)
    if s.rabi_b:
        h = h + 0.5 * s.rabi_b * (math.cos(s.phase_b) * _SX_B + math.sin(s.phase_b) * _SY_B)
    if s.omega_c:
        exchange = _EXCHANGE if rwa else _XX
        zz = zz_weight(params) * _ZZ if include_zz else 0.0
        h = h + 0.5 * s.omega_c * (exchange + zz)
    return h


def _rates(params: DeviceParams) -> tuple[float, float]:
    return tuple(0.0 if math.isinf(t1) else 1.0 / t1 for t1 in (params.t1_a, params.t1_b))


def _skron(a, b):
    # np.kron for two 4x4 matrices, without its generic-shape overhead
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(16, 16)


_EYE4 = np.eye(4)


def dissipator(rates=(0.0, 0.0)) -> np.ndarray:
    """Relaxation part of the generator, on row-major ``rho.reshape(16)``."""
    gen = np.zeros((16, 16), dtype=complex)
    for gamma, c in zip(rates, (_SM_A, _SM_B)):
        if gamma:
            cdc = c.conj().T @ c
            gen += gamma * (_skron(c, c.conj()) - 0.5 * _skron(cdc, _EYE4)
                            - 0.5 * _skron(_EYE4, cdc.T))
    return gen


def liouvillian(h: np.ndarray, rates=(0.0, 0.0), diss: np.ndarray | None = None) -> np.ndarray:
    """Generator acting on row-major ``rho.reshape(16)``."""
    if diss is None:
        diss = dissipator(rates)
    return -1j * (_skron(h, _EYE4) - _skron(_EYE4, h.T)) + diss


class Propagator:
    """Caches exact propagators of piecewise-constant generators.

    Propagators are keyed on the control values and the interval length, so
    repeated pulses (identical ramps, pi pulses, plateaus) reuse them.
    """

    def __init__(self, params: DeviceParams, rwa: bool = True, include_zz: bool = True,
                 max_cache: int = 50_000):
        self.params = params
        self.rwa = rwa
        self.include_zz = include_zz
        self.rates = _rates(params)
        self._diss = dissipator(self.rates)
        self._cache: dict = {}
        self._norms: dict = {}
        self.max_cache = max_cache

    def _generator(self, key: tuple) -> np.ndarray:
        h = build_hamiltonian(ControlSnapshot(*key), self.params, self.rwa, self.include_zz)
        return h, liouvillian(h, self.rates, self._diss)

    def _check_step(self, key: tuple, h: np.ndarray, dt: float) -> None:
        norm = self._norms.get(key)
        if norm is None:
            norm = float(np.max(np.abs(np.linalg.eigvalsh(h)))) if np.any(h) else 0.0
            self._norms[key] = norm
        if dt * norm > MAX_STEP_PHASE:
            raise StepTooCoarse(
                f"dt * |H| = {dt * norm:.3g} rad exceeds {MAX_STEP_PHASE} rad; reduce dt")

    def step(self, key: tuple, dt: float, duration: float) -> np.ndarray:
        """Propagator over ``duration`` for constant controls ``key``.

        ``dt`` is the nominal step the controls were sampled with; it is what
        the step-size guard checks.
        """
        ck = (key, duration)
        u = self._cache.get(ck)
        if u is None:
            h, gen = self._generator(key)
            self._check_step(key, h, dt)
            u = self._store(ck, expm(gen * duration))
        return u

    def magnus_step(self, key1: tuple, key2: tuple, dt: float) -> np.ndarray:
        """Fourth-order Magnus propagator for one step from its two Gauss-node controls."""
        ck = (key1, key2, dt)
        u = self._cache.get(ck)
        if u is None:
            h1, g1 = self._generator(key1)
            h2, g2 = self._generator(key2)
            self._check_step(key1, h1, dt)
            self._check_step(key2, h2, dt)
            omega = 0.5 * dt * (g1 + g2) + (math.sqrt(3) / 12) * dt * dt * (g2 @ g1 - g1 @ g2)
            u = self._store(ck, expm(omega))
        return u

    def _store(self, ck, u):
        if len(self._cache) >= self.max_cache:
            self._cache.clear()
        self._cache[ck] = u
        return u

    def evolve(self, state: TwoQubitState, trace: ControlTrace) -> TwoQubitState:
        vec = state.rho.reshape(16).astype(complex)
        n = len(trace)
        if n == 0:
            return TwoQubitState(state.rho.copy())
        vals, dts, rep, nodes = trace.values, trace.dt, trace.repeat, trace.nodes
        varying = (np.zeros(n, dtype=bool) if nodes is None
                   else np.any(nodes[:, 0] != nodes[:, 1], axis=1))
        # consecutive identical constant steps collapse into one exact exponential
        change = np.ones(n, dtype=bool)
        change[1:] = (np.any(vals[1:] != vals[:-1], axis=1) | (dts[1:] != dts[:-1])
                      | varying[1:] | varying[:-1])
        starts = np.flatnonzero(change)
        ends = np.append(starts[1:], n)
        for s, e in zip(starts, ends):
            dt = float(dts[s])
            if varying[s]:
                u = self.magnus_step(tuple(map(float, nodes[s, 0])), tuple(map(float, nodes[s, 1])), dt)
                for _ in range(int(rep[s])):
                    vec = u @ vec
                continue
            key = tuple(float(v) for v in vals[s])
            count = int(rep[s]) if e - s == 1 else int(np.sum(rep[s:e]))
            vec = self.step(key, dt, dt * count) @ vec
        rho = vec.reshape(4, 4)
        return TwoQubitState(0.5 * (rho + rho.conj().T))


# 2-point Gauss-Legendre nodes on [0, 1]
GAUSS_NODES = 0.5 + np.array([-1.0, 1.0]) * math.sqrt(3) / 6


def step_average(nodes: np.ndarray) -> np.ndarray:
    """Mean of the two Gauss-node controls, shape ``(n, 2, 7)`` to ``(n, 7)``.

    Drives are averaged as quadratures so the result is the time average of
    the Hamiltonian, not of amplitude and phase separately.
    """
    v = np.asarray(nodes, dtype=float)
    out = v.mean(axis=1)
    for amp, ph in ((2, 3), (4, 5)):
        vary = v[:, 0, ph] != v[:, 1, ph]
        if np.any(vary):
            x = np.mean(v[:, :, amp] * np.cos(v[:, :, ph]), axis=1)
            y = np.mean(v[:, :, amp] * np.sin(v[:, :, ph]), axis=1)
            out[vary, amp] = np.hypot(x, y)[vary]
            out[vary, ph] = np.arctan2(y, x)[vary]
        out[~vary, ph] = v[~vary, 0, ph]
    return out


def sample_controls(controls: Callable[[float], ControlSnapshot], t_start: float,
                    t_end: float, dt: float) -> ControlTrace:
    """Controls at the two Gauss points of each of the fewest equal steps not longer than ``dt``.

    ``t_end`` is hit exactly. See :class:`ControlTrace` for how the node
    values are used.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end < t_start:
        raise ValueError("t_end must not precede t_start")
    span = t_end - t_start
    n = int(math.ceil(span / dt - 1e-9)) if span > 0 else 0
    if n == 0:
        return ControlTrace(np.zeros(0), np.zeros(0), np.zeros((0, 7)))
    h = span / n
    t = t_start + h * np.arange(n)
    nodes = np.array([[controls(float(tk + x * h)).as_tuple() for x in GAUSS_NODES] for tk in t],
                     dtype=float)
    return ControlTrace(t, np.full(n, h), step_average(nodes), nodes=nodes)


def constant_trace(snapshot: ControlSnapshot, t_start: float, t_end: float,
                   dt: float) -> ControlTrace:
    """Same step layout as :func:`sample_controls` for time-independent controls."""
    span = t_end - t_start
    n = int(math.ceil(span / dt - 1e-9)) if span > 0 else 0
    if n == 0:
        return ControlTrace(np.zeros(0), np.zeros(0), np.zeros((0, 7)))
    values = np.array([snapshot.as_tuple()], dtype=float)
    return ControlTrace(np.array([t_start]), np.array([span / n]), values, np.array([n]))


ControlSource = Union[ControlSnapshot, ControlTrace, Callable[[float], ControlSnapshot]]


def propagate(state: TwoQubitState, controls: ControlSource, t_start: float, t_end: float,
              dt: float, params: DeviceParams, rwa: bool = True,
              include_zz: bool = True) -> TwoQubitState:
    """Integrate the Lindblad equation with T1 decay on both qubits.

    ``controls`` may be a constant :class:`ControlSnapshot`, a
    :class:`ControlTrace` (its own steps are used and the window arguments
    only get validated), or any callable returning a snapshot at time ``t``.
    The Hamiltonian is held constant over each step and the step is
    propagated with the exact exponential of the generator.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end < t_start:
        raise ValueError("t_end must not precede t_start")
    if isinstance(controls, ControlTrace):
        trace = controls
    elif isinstance(controls, ControlSnapshot):
        trace = constant_trace(controls, t_start, t_end, dt)
    else:
        trace = sample_controls(controls, t_start, t_end, dt)
    return Propagator(params, rwa, include_zz).evolve(state, trace)


def measure_probabilities(state: TwoQubitState, model: MeasurementModel | None = None) -> np.ndarray:
    """Outcome probabilities ``(P00, P01, P10, P11)``."""
    p = np.clip(np.real(np.diag(state.rho)), 0.0, None)
    p = p / p.sum()
    if model is not None:
        p = p @ np.asarray(model.confusion, dtype=float)
    return p


def sample_shots(probs, n: int, seed: int) -> np.ndarray:
    """Multinomial single-shot counts for the four outcomes."""
    if n < 0:
        raise ValueError("n must be >= 0")
    p = np.asarray(probs, dtype=float)
    p = np.clip(p, 0.0, None)
    p = p / p.sum()
    return np.random.default_rng(seed).multinomial(n, p)
