"""Virtual versions of the coupler experiments, returned as gridded datasets."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import device, fitting, sequences
from .device import DeviceParams
from .dynamics import (DEFAULT_DT, ControlSnapshot, MeasurementModel, Propagator, TwoQubitState,
                       constant_trace, measure_probabilities, sample_shots)

F_THRESHOLD = 4.0
DEFAULT_SHOTS_NOISE = 1000
MHZ = 1e6
TWO_PI = 2 * math.pi


def fingerprint(obj) -> str:
    """SHA-256 of the canonical JSON form of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class Simulation:
    """Shared settings for running sequences on a device.

    ``shots=None`` returns exact ensemble probabilities; an integer draws that
    many single shots per grid point, seeded from ``seed`` and the point index.
    """

    params: DeviceParams
    dt: float = DEFAULT_DT
    rwa: bool = True
    include_zz: bool = True
    shots: int | None = None
    seed: int = 0
    model: MeasurementModel | None = None
    _prop: Propagator | None = field(default=None, repr=False, compare=False)

    @property
    def propagator(self) -> Propagator:
        if self._prop is None:
            self._prop = Propagator(self.params, self.rwa, self.include_zz)
        return self._prop

    def exact(self, seq: sequences.PulseSequence) -> np.ndarray:
        trace = sequences.sample(seq, self.dt, self.params)
        state = self.propagator.evolve(TwoQubitState.basis("00"), trace)
        return measure_probabilities(state, self.model)

    def run(self, seq: sequences.PulseSequence, index: int = 0) -> np.ndarray:
        p = self.exact(seq)
        if self.shots is None:
            return p
        point_seed = int(np.random.SeedSequence([self.seed, index]).generate_state(1)[0])
        return sample_shots(p, self.shots, point_seed) / self.shots

    def settings(self) -> dict:
        return {"dt": self.dt, "rwa": self.rwa, "include_zz": self.include_zz,
                "shots": self.shots, "seed": self.seed,
                "confusion": None if self.model is None else np.asarray(self.model.confusion).tolist()}

    def fingerprint(self) -> str:
        return fingerprint({"device": asdict(self.params), "simulation": self.settings()})


@dataclass
class Axis:
    name: str
    unit: str
    values: np.ndarray


@dataclass
class ExperimentResult:
    """Probabilities on a grid; ``probs[..., k]`` is P00, P01, P10, P11 for k = 0..3."""

    name: str
    axes: list
    probs: np.ndarray
    fits: dict
    fingerprint: str
    seed: int

    def __post_init__(self):
        shape = tuple(len(a.values) for a in self.axes) + (4,)
        if self.probs.shape != shape:
            raise ValueError(f"probability grid {self.probs.shape} does not match axes {shape}")

    @property
    def p00(self):
        return self.probs[..., 0]

    @property
    def p01(self):
        return self.probs[..., 1]

    @property
    def p10(self):
        return self.probs[..., 2]

    @property
    def p11(self):
        return self.probs[..., 3]

    @property
    def p_xi(self):
        """Qubit B excited, whatever A does."""
        return self.probs[..., 1] + self.probs[..., 3]

    @property
    def p_ix(self):
        """Qubit A excited, whatever B does."""
        return self.probs[..., 2] + self.probs[..., 3]

    def normalization_error(self) -> float:
        return float(np.max(np.abs(self.probs.sum(axis=-1) - 1.0))) if self.probs.size else 0.0

    def rows(self):
        grids = np.meshgrid(*[a.values for a in self.axes], indexing="ij")
        flat = self.probs.reshape(-1, 4)
        for k in range(flat.shape[0]):
            yield [g.reshape(-1)[k] for g in grids] + list(flat[k])

    def write_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"{a.name}_{a.unit}" if a.unit else a.name for a in self.axes]
                       + ["p00", "p01", "p10", "p11"])
            for row in self.rows():
                w.writerow([v if isinstance(v, str) else format_number(v) for v in row])


def format_number(x) -> str:
    return f"{float(x):.8e}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else str(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if hasattr(obj, "__dataclass_fields__"):
        return _jsonable(asdict(obj))
    return obj


# ---------------------------------------------------------------- spectroscopy


def run_spectroscopy(i_cb: float, delta_grid, probe_grid, params: DeviceParams,
                     sim: Simulation | None = None,
                     probe_amp: float = sequences.SPECTROSCOPY_AMP) -> ExperimentResult:
    """Two-tone style spectroscopy map versus detuning and probe frequency.

    Both axes are in hertz; the probe axis is relative to qubit A's idle
    frequency. Peaks of the total excitation ``1 - P00`` are extracted row
    by row and fitted with two hyperbolic branches.
    """
    sim = sim or Simulation(params)
    delta_grid = np.asarray(delta_grid, dtype=float)
    probe_grid = np.asarray(probe_grid, dtype=float)
    if delta_grid.size == 0 or probe_grid.size == 0:
        raise ValueError("grids must be non-empty")
    probs = np.empty((delta_grid.size, probe_grid.size, 4))
    idx = 0
    for i, d in enumerate(delta_grid):
        for j, fp in enumerate(probe_grid):
            seq = sequences.build_spectroscopy_sequence(d, fp, params, probe_amp=probe_amp, i_cb=i_cb)
            probs[i, j] = sim.run(seq, idx)
            idx += 1
    fits = {"omega_c_theory_hz": abs(device.coupling_strength(params, i_cb)) / TWO_PI}
    rows = []
    for i, d in enumerate(delta_grid):
        try:
            peaks = fitting.extract_peaks(probe_grid, 1.0 - probs[i, :, 0])
        except (fitting.NoPeak, ValueError):
            continue
        rows.append((d, [pk.frequency for pk in peaks]))
    fits["peaks"] = [{"delta_hz": d, "peaks_hz": pk} for d, pk in rows]
    try:
        cross = fitting.fit_avoided_crossing(rows)
        fits["crossing"] = asdict(cross)
    except (ValueError, fitting.DegenerateFit) as exc:
        fits["crossing"] = {"error": str(exc)}
    axes = [Axis("delta", "Hz", delta_grid), Axis("probe", "Hz", probe_grid)]
    return ExperimentResult("spectroscopy", axes, probs, fits, sim.fingerprint(), sim.seed)


# ------------------------------------------------------------------ crosstalk


def run_crosstalk_scan(i_cb_grid, t_rabi_grid, params: DeviceParams,
                       sim: Simulation | None = None,
                       rabi_amp: float = sequences.CROSSTALK_RABI) -> ExperimentResult:
    """Rabi-drive one qubit, measure both, for each coupler bias.

    The result grid is indexed ``[driven, bias, t_rabi]`` with driven = A, B.
    ``fits["ratio"][driven][bias]`` is the undriven/driven amplitude ratio.
    """
    sim = sim or Simulation(params)
    biases = np.asarray(i_cb_grid, dtype=float)
    times = np.asarray(t_rabi_grid, dtype=float)
    if biases.size == 0 or times.size == 0:
        raise ValueError("grids must be non-empty")
    probs = np.empty((2, biases.size, times.size, 4))
    idx = 0
    for q, driven in enumerate("ab"):
        for i, b in enumerate(biases):
            for j, t in enumerate(times):
                seq = sequences.build_crosstalk_sequence(driven, t, b, params, rabi_amp=rabi_amp)
                probs[q, i, j] = sim.run(seq, idx)
                idx += 1
    ratios = np.zeros((2, biases.size))
    clamped = np.zeros((2, biases.size), dtype=bool)
    for q in range(2):
        for i in range(biases.size):
            p = probs[q, i]
            a_exc, b_exc = p[:, 2] + p[:, 3], p[:, 1] + p[:, 3]
            drv, und = (a_exc, b_exc) if q == 0 else (b_exc, a_exc)
            ratios[q, i], info = fitting.crosstalk_ratio(times, drv, und)
            clamped[q, i] = info["clamped"]
    fits = {
        "ratio": {"a": ratios[0].tolist(), "b": ratios[1].tolist()},
        "clamped": {"a": clamped[0].tolist(), "b": clamped[1].tolist()},
        "omega_c_theory_hz": (np.abs(device.coupling_strength(params, biases)) / TWO_PI).tolist(),
    }
    axes = [Axis("driven", "", np.array([0.0, 1.0])), Axis("i_cb", "A", biases),
            Axis("t_rabi", "s", times)]
    return ExperimentResult("crosstalk", axes, probs, fits, sim.fingerprint(), sim.seed)


# --------------------------------------------------------------------- swaps


def swap_trace(delta: float, i_cb_on: float, t_swap_grid, params: DeviceParams,
               sim: Simulation | None = None, index0: int = 0) -> np.ndarray:
    sim = sim or Simulation(params)
    off = device.off_bias(params)
    out = np.empty((len(t_swap_grid), 4))
    for j, t in enumerate(t_swap_grid):
        seq = sequences.build_swap_sequence(delta, i_cb_on, float(t), params, i_cb_off=off)
        out[j] = sim.run(seq, index0 + j)
    return out


def _fit_swap(t, p01, rise_fall=sequences.DEFAULT_RISE_FALL):
    # pulses shorter than two edges do not reach the plateau
    keep = t >= 2 * rise_fall
    return fitting.fit_damped_sine(t[keep], p01[keep], decaying_offset=True)


def run_swap_chevron(i_cb_on: float, delta_grid, t_swap_grid, params: DeviceParams,
                     sim: Simulation | None = None) -> ExperimentResult:
    """Swap probabilities versus detuning and interaction time.

    For each detuning the P01 oscillation is fitted; ``fits["frequency_hz"]``
    lists the fitted frequencies next to the two-level prediction
    ``sqrt(delta**2 + omega_c**2)``.
    """
    sim = sim or Simulation(params)
    deltas = np.asarray(delta_grid, dtype=float)
    times = np.asarray(t_swap_grid, dtype=float)
    if deltas.size == 0 or times.size == 0:
        raise ValueError("grids must be non-empty")
    probs = np.empty((deltas.size, times.size, 4))
    for i, d in enumerate(deltas):
        probs[i] = swap_trace(d, i_cb_on, times, params, sim, index0=i * times.size)
    omega = abs(device.coupling_strength(params, i_cb_on)) / TWO_PI
    fitted, expected = [], []
    for i, d in enumerate(deltas):
        expected.append(math.hypot(d, omega))
        try:
            fitted.append(_fit_swap(times, probs[i, :, 1]).frequency)
        except (ValueError, fitting.FitDiverged):
            fitted.append(float("nan"))
    fits = {"omega_c_theory_hz": omega, "frequency_hz": fitted, "expected_hz": expected}
    axes = [Axis("delta", "Hz", deltas), Axis("t_swap", "s", times)]
    return ExperimentResult("chevron", axes, probs, fits, sim.fingerprint(), sim.seed)


def _noise_var(p, shots):
    return max(float(np.mean(p * (1 - p))) / shots, 1e-30)


def run_coupling_curve(i_cb_grid, params: DeviceParams, sim: Simulation | None = None,
                       n_points: int = 121, noise_shots: int = DEFAULT_SHOTS_NOISE,
                       f_threshold: float = F_THRESHOLD) -> list[dict]:
    """Swap frequency versus coupler bias, simulated and from the closed form.

    Each bias gets an on-resonance swap trace long enough for three periods
    (capped at 1 us). Oscillations that do not pass the resolvability test
    are reported as a fitted value of 0.
    """
    sim = sim or Simulation(params)
    off = device.off_bias(params)
    t1 = min(params.t1_a, params.t1_b)
    rows = []
    for b in np.asarray(i_cb_grid, dtype=float):
        omega = device.coupling_strength(params, b)
        f_th = abs(omega) / TWO_PI
        t_end = min(max(3.0 / f_th if f_th > 0 else math.inf, 40e-9), 1e-6)
        t = np.linspace(0.0, t_end, n_points)
        p = np.empty((t.size, 4))
        for j, ts in enumerate(t):
            seq = sequences.build_swap_sequence(0.0, b, float(ts), params, i_cb_off=off)
            p[j] = sim.run(seq, j)
        keep = t >= 2 * sequences.DEFAULT_RISE_FALL
        fitted, resolved = 0.0, False
        try:
            fit = _fit_swap(t, p[:, 1])
            F = fitting.resolvability_fratio(t[keep], p[keep, 1], fit.frequency,
                                             _noise_var(p[keep, 1], noise_shots))
            if F >= f_threshold:
                fitted, resolved = fit.frequency, True
        except (ValueError, fitting.FitDiverged):
            pass
        rows.append({
            "bias": float(b),
            "omega_c_theory_hz": f_th,
            "omega_c_signed_hz": float(omega / TWO_PI),
            "omega_c_fitted_hz": float(fitted),
            "resolved": resolved,
            "decay_limited": bool(math.isfinite(t1) and t1 * abs(omega) < TWO_PI),
        })
    return rows


# ------------------------------------------------------- minimum coupling


def decay_swap_trace(omega_c: float, t_grid, params: DeviceParams, dt: float = DEFAULT_DT,
                     delta: float = 0.0) -> np.ndarray:
    """Probabilities after holding constant exchange, starting from A excited."""
    prop = Propagator(params)
    snap = ControlSnapshot(detune_b=-TWO_PI * delta, omega_c=omega_c)
    out = np.empty((len(t_grid), 4))
    for j, t in enumerate(t_grid):
        state = prop.evolve(TwoQubitState.basis("10"), constant_trace(snap, 0.0, float(t), dt))
        out[j] = measure_probabilities(state)
    return out


def fratio_for_coupling(omega_c: float, t_grid, params: DeviceParams,
                        shots: int = DEFAULT_SHOTS_NOISE, dt: float = DEFAULT_DT) -> float:
    p01 = decay_swap_trace(omega_c, t_grid, params, dt)[:, 1]
    return fitting.resolvability_fratio(t_grid, p01, abs(omega_c) / TWO_PI, _noise_var(p01, shots))


def resolution_floor(t_grid, params: DeviceParams, shots: int = DEFAULT_SHOTS_NOISE,
                     f_threshold: float = F_THRESHOLD, lo: float = 0.005 * MHZ,
                     hi: float = 5 * MHZ) -> float:
    """Smallest coupling (Hz) whose swap oscillation passes the F test."""
    def F(f):
        return fratio_for_coupling(TWO_PI * f, t_grid, params, shots)

    if F(lo) >= f_threshold:
        return lo
    if F(hi) < f_threshold:
        return math.inf
    for _ in range(40):
        mid = math.sqrt(lo * hi)
        if F(mid) >= f_threshold:
            hi = mid
        else:
            lo = mid
        if hi / lo < 1.001:
            break
    return hi


def run_min_coupling_study(omega_c_list, params: DeviceParams, t_grid=None, t1: float = 350e-9,
                           shots: int = DEFAULT_SHOTS_NOISE,
                           f_threshold: float = F_THRESHOLD) -> dict:
    """Which weak couplings still show an oscillation before T1 wins.

    ``omega_c_list`` holds couplings in hertz (Omega_c / 2pi). Each trace is
    the B-excited probability after preparing A excited on resonance. The
    oscillation counts as resolvable when its expected F statistic against a
    pure-decay model, for ``shots`` single shots per point, reaches
    ``f_threshold``.
    """
    if t_grid is None:
        t_grid = np.linspace(0.0, 1e-6, 101)
    t_grid = np.asarray(t_grid, dtype=float)
    params = params.replace(t1_a=t1, t1_b=t1)
    out = {"t_grid": t_grid.tolist(), "shots": shots, "threshold": f_threshold, "cases": []}
    for f in omega_c_list:
        p = decay_swap_trace(TWO_PI * f, t_grid, params)
        F = fitting.resolvability_fratio(t_grid, p[:, 1], f, _noise_var(p[:, 1], shots))
        out["cases"].append({
            "omega_c_hz": float(f),
            "fratio": float(F),
            "verdict": "resolvable" if F >= f_threshold else "unresolvable",
            "p01": p[:, 1].tolist(),
            "p10": p[:, 2].tolist(),
        })
    out["resolution_floor_hz"] = resolution_floor(t_grid, params, shots, f_threshold)
    return out


def write_sidecar(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
