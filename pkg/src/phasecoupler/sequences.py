"""Multi-channel control sequences and the canonical coupler experiments.

Five channels drive the device:

``z_a``, ``z_b``
    qubit frequency offsets in hertz, added to the idle frequencies
``uw_a``, ``uw_b``
    microwave Rabi envelopes in rad/s (rotating frame), with a drive phase
``coupler``
    coupler bias current in amperes

Each channel starts at its ``baseline`` and holds its last value between
segments. ``constant`` and ``linear_ramp`` segments leave the channel at
their level; ``flat_with_rise_fall`` and ``gaussian_pulse`` are excursions
that return to the value held before them.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import device
from .device import DeviceParams
from .dynamics import GAUSS_NODES, ControlTrace, step_average

CHANNELS = ("z_a", "z_b", "uw_a", "uw_b", "coupler")
SHAPES = ("constant", "linear_ramp", "flat_with_rise_fall", "gaussian_pulse")

DEFAULT_RISE_FALL = 2e-9
DEFAULT_PI_DURATION = 10e-9
IDLE_DETUNING = 200e6
SPECTROSCOPY_DURATION = 2e-6
SPECTROSCOPY_AMP = 2 * math.pi * 1.5e6
CROSSTALK_RABI = 2 * math.pi * 20e6

# area of a unit gaussian truncated at +-2 sigma, per sigma
_GAUSS_AREA = math.sqrt(2 * math.pi) * math.erf(math.sqrt(2))


@dataclass(frozen=True)
class Segment:
    t_start: float
    duration: float
    shape: str
    level: float
    rise_fall: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown segment shape {self.shape!r}")
        if not self.duration > 0:
            raise ValueError("segment duration must be positive")
        if self.rise_fall < 0 or self.rise_fall > self.duration / 2 * (1 + 1e-12):
            raise ValueError("rise_fall must lie in [0, duration/2]")

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    def envelope(self, t: np.ndarray) -> np.ndarray:
        """Fraction of the way from the held value to ``level`` at times ``t``."""
        u = t - self.t_start
        if self.shape == "constant":
            return np.ones_like(u)
        if self.shape == "linear_ramp":
            return u / self.duration
        if self.shape == "gaussian_pulse":
            sigma = self.duration / 4
            return np.exp(-0.5 * ((u - self.duration / 2) / sigma) ** 2)
        rf = self.rise_fall
        env = np.ones_like(u)
        if rf > 0:
            rise = u < rf
            env[rise] = 0.5 * (1 - np.cos(np.pi * u[rise] / rf))
            fall = u > self.duration - rf
            env[fall] = 0.5 * (1 - np.cos(np.pi * (self.duration - u[fall]) / rf))
        return env

    def value(self, t: np.ndarray, held: float) -> np.ndarray:
        return held + (self.level - held) * self.envelope(t)

    def after(self, held: float) -> float:
        return self.level if self.shape in ("constant", "linear_ramp") else held

    def breakpoints(self) -> list[float]:
        pts = [self.t_start, self.t_end]
        if self.shape == "flat_with_rise_fall":
            pts += [self.t_start + self.rise_fall, self.t_end - self.rise_fall]
        return pts

    def is_static_at(self, t: float) -> bool:
        """True when the waveform is flat around ``t`` (inside the segment)."""
        if self.shape == "constant":
            return True
        if self.shape == "flat_with_rise_fall":
            return self.t_start + self.rise_fall <= t < self.t_end - self.rise_fall
        return False

    def scaled(self, factor: float) -> "Segment":
        return replace(self, level=self.level * factor)


@dataclass(frozen=True)
class Channel:
    id: str
    segments: tuple = ()
    baseline: float = 0.0

    def __post_init__(self):
        if self.id not in CHANNELS:
            raise ValueError(f"unknown channel {self.id!r}")
        segs = tuple(sorted(self.segments, key=lambda s: s.t_start))
        for a, b in zip(segs, segs[1:]):
            if b.t_start < a.t_end - 1e-18:
                raise ValueError(f"overlapping segments on channel {self.id}")
        object.__setattr__(self, "segments", segs)

    def sample(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, float(self.baseline))
        held = float(self.baseline)
        for seg in self.segments:
            inside = (t >= seg.t_start) & (t < seg.t_end)
            out[inside] = seg.value(t[inside], held)
            held = seg.after(held)
            out[t >= seg.t_end] = held
        return out

    def sample_phase(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for seg in self.segments:
            out[(t >= seg.t_start) & (t < seg.t_end)] = seg.phase
        return out

    def is_static_at(self, t: float) -> bool:
        for seg in self.segments:
            if seg.t_start <= t < seg.t_end:
                return seg.is_static_at(t)
        return True

    def scaled(self, factor: float) -> "Channel":
        return Channel(self.id, tuple(s.scaled(factor) for s in self.segments),
                       self.baseline * factor)


@dataclass(frozen=True)
class PulseSequence:
    """Five control channels plus optional z compensation tracks.

    ``frame_hz`` is the rotating-frame frequency relative to qubit A's idle
    frequency; drives are resonant with the frame. ``compensation`` holds
    z-channel tracks that are summed onto ``z_a``/``z_b``.
    """

    channels: dict
    total_duration: float
    measurement_time: float
    frame_hz: float = 0.0
    compensation: dict = field(default_factory=dict)

    def __post_init__(self):
        chans = {cid: Channel(cid) for cid in CHANNELS}
        chans.update(self.channels)
        object.__setattr__(self, "channels", chans)
        if self.measurement_time > self.total_duration + 1e-18:
            raise ValueError("measurement_time must not exceed total_duration")
        for ch in chans.values():
            for seg in ch.segments:
                if seg.t_end > self.total_duration * (1 + 1e-12) + 1e-18:
                    raise ValueError(f"segment on {ch.id} extends past total_duration")

    def z_offsets(self, qubit: str, t) -> np.ndarray:
        cid = "z_" + qubit
        z = self.channels[cid].sample(t)
        if cid in self.compensation:
            z = z + self.compensation[cid].sample(t)
        return z

    def qubit_frequencies(self, t, params: DeviceParams) -> tuple[np.ndarray, np.ndarray]:
        """Modelled transition frequencies (Hz) of qubits A and B at times ``t``."""
        shift = params.bias_shift_coeff * self.channels["coupler"].sample(t)
        return (params.f10_a + self.z_offsets("a", t) + shift,
                params.f10_b + self.z_offsets("b", t) + shift)

    def to_dict(self) -> dict:
        def chan(ch: Channel) -> dict:
            return {"baseline": ch.baseline, "segments": [asdict(s) for s in ch.segments]}

        return {
            "total_duration": self.total_duration,
            "measurement_time": self.measurement_time,
            "frame_hz": self.frame_hz,
            "channels": {cid: chan(ch) for cid, ch in self.channels.items()},
            "compensation": {cid: chan(ch) for cid, ch in self.compensation.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PulseSequence":
        def chan(cid: str, c: dict) -> Channel:
            return Channel(cid, tuple(Segment(**s) for s in c["segments"]), c["baseline"])

        return cls(
            channels={cid: chan(cid, c) for cid, c in d["channels"].items()},
            total_duration=d["total_duration"],
            measurement_time=d["measurement_time"],
            frame_hz=d.get("frame_hz", 0.0),
            compensation={cid: chan(cid, c) for cid, c in d.get("compensation", {}).items()},
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _step_layout(seq: PulseSequence, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Step start times, step lengths and repeat counts.

    Each interval between consecutive breakpoints of any channel is cut into
    the fewest equal steps not longer than ``dt``, anchored at the interval
    start. Intervals where every channel is flat collapse into one entry.
    """
    tracks = list(seq.channels.values()) + list(seq.compensation.values())
    cuts = {0.0, seq.measurement_time}
    for ch in tracks:
        for seg in ch.segments:
            cuts.update(x for x in seg.breakpoints() if 0.0 < x < seq.measurement_time)
    cuts = sorted(cuts)
    starts, steps, counts = [], [], []
    for a, b in zip(cuts, cuts[1:]):
        n = int(math.ceil((b - a) / dt - 1e-9))
        if n <= 0 or b - a <= 1e-6 * dt:
            continue
        h = (b - a) / n
        if all(ch.is_static_at(0.5 * (a + b)) for ch in tracks):
            starts.append(a)
            steps.append(h)
            counts.append(n)
        else:
            starts.extend(a + h * np.arange(n))
            steps.extend([h] * n)
            counts.extend([1] * n)
    return np.array(starts, dtype=float), np.array(steps, dtype=float), np.array(counts, dtype=np.int64)


def _snap(x: np.ndarray, digits: int = 13) -> np.ndarray:
    # drop rounding noise so equal pulses map to equal cached propagators
    x = np.asarray(x, dtype=float)
    out = x.copy()
    nz = np.isfinite(x) & (x != 0)
    scale = 10.0 ** (np.floor(np.log10(np.abs(x[nz]))) - (digits - 1))
    out[nz] = np.round(x[nz] / scale) * scale
    return out


def sample(seq: PulseSequence, dt: float, params: DeviceParams) -> ControlTrace:
    """Controls up to the measurement time, ready for propagation.

    Steps never cross a channel breakpoint and are at most ``dt`` long.
    Each step carries the controls at its two Gauss-Legendre points and
    their mean. Runs of steps with identical controls are stored once with a
    repeat count. Control values are rounded to 13 significant digits.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not seq.measurement_time > 0:
        return ControlTrace(np.zeros(0), np.zeros(0), np.zeros((0, 7)))
    t, h, repeat = _step_layout(seq, dt)
    tt = (t[:, None] + GAUSS_NODES[None, :] * h[:, None]).reshape(-1)
    f_a, f_b = seq.qubit_frequencies(tt, params)
    frame = params.f10_a + seq.frame_hz
    ch = seq.channels
    bias = ch["coupler"].sample(tt)
    # few distinct bias values on plateaus: evaluate the coupler formula once per value
    levels, inverse = np.unique(bias, return_inverse=True)
    omega_c = np.asarray(device.coupling_strength(params, levels), dtype=float).reshape(-1)[inverse]
    nodes = np.column_stack([
        2 * np.pi * (f_a - frame),
        2 * np.pi * (f_b - frame),
        ch["uw_a"].sample(tt),
        ch["uw_a"].sample_phase(tt),
        ch["uw_b"].sample(tt),
        ch["uw_b"].sample_phase(tt),
        omega_c,
    ]).reshape(t.size, GAUSS_NODES.size, 7)
    nodes = _snap(nodes.reshape(-1, 7)).reshape(nodes.shape)
    return ControlTrace(t, h, _snap(step_average(nodes)), repeat, nodes)


def pi_pulse(qubit: str, duration: float = DEFAULT_PI_DURATION, t_start: float = 0.0,
             phase: float = 0.0, area: float = math.pi) -> Segment:
    """Gaussian pulse truncated at +-2 sigma whose envelope integrates to ``area``."""
    if qubit not in ("a", "b"):
        raise ValueError("qubit must be 'a' or 'b'")
    sigma = duration / 4
    amp = area / (sigma * _GAUSS_AREA)
    return Segment(t_start, duration, "gaussian_pulse", amp, phase=phase)


def compensation_offsets(coupler_channel: Channel, params: DeviceParams) -> tuple[Channel, Channel]:
    """Z tracks cancelling the coupler-induced qubit frequency shift.

    Both qubits shift by ``bias_shift_coeff * I_cb``; every segment shape is
    affine in its level, so a scaled copy of the coupler waveform cancels the
    shift exactly at every instant.
    """
    k = -params.bias_shift_coeff
    if not coupler_channel.segments and coupler_channel.baseline == 0:
        return Channel("z_a"), Channel("z_b")
    segs = tuple(s.scaled(k) for s in coupler_channel.segments)
    base = coupler_channel.baseline * k
    return Channel("z_a", segs, base), Channel("z_b", segs, base)


def _with_compensation(channels: dict, params: DeviceParams, compensate: bool) -> dict:
    if not compensate:
        return {}
    za, zb = compensation_offsets(channels["coupler"], params)
    return {"z_a": za, "z_b": zb}


def build_spectroscopy_sequence(delta: float, f_probe_offset: float, params: DeviceParams,
                                probe_amp: float = SPECTROSCOPY_AMP, i_cb: float = 0.0,
                                duration: float = SPECTROSCOPY_DURATION,
                                compensate: bool = True) -> PulseSequence:
    """Static-coupler two-qubit spectroscopy at detuning ``delta = f_A - f_B``.

    A long weak probe at ``f10_a + f_probe_offset`` is applied to both
    qubits. Qubit B's drive carries a 90 degree phase so that both
    single-excitation eigenstates stay bright at the crossing.
    """
    channels = {
        "coupler": Channel("coupler", baseline=i_cb),
        "z_b": Channel("z_b", baseline=params.f10_a - delta - params.f10_b),
        "uw_a": Channel("uw_a", (Segment(0.0, duration, "constant", probe_amp),)),
        "uw_b": Channel("uw_b", (Segment(0.0, duration, "constant", probe_amp, phase=math.pi / 2),)),
    }
    return PulseSequence(channels, duration, duration, frame_hz=f_probe_offset,
                         compensation=_with_compensation(channels, params, compensate))


def build_crosstalk_sequence(driven: str, t_rabi: float, i_cb: float, params: DeviceParams,
                             rabi_amp: float = CROSSTALK_RABI,
                             detuning: float = IDLE_DETUNING,
                             compensate: bool = True) -> PulseSequence:
    """Resonant Rabi drive on one qubit with the pair held ``detuning`` apart."""
    if driven not in ("a", "b"):
        raise ValueError("driven must be 'a' or 'b'")
    channels = {
        "coupler": Channel("coupler", baseline=i_cb),
        "z_b": Channel("z_b", baseline=params.f10_a - detuning - params.f10_b),
    }
    if t_rabi > 0:
        cid = "uw_" + driven
        channels[cid] = Channel(cid, (Segment(0.0, t_rabi, "constant", rabi_amp),))
    frame = 0.0 if driven == "a" else -detuning
    return PulseSequence(channels, t_rabi, t_rabi, frame_hz=frame,
                         compensation=_with_compensation(channels, params, compensate))


def build_swap_sequence(delta: float, i_cb_on: float, t_swap: float, params: DeviceParams,
                        i_cb_off: float | None = None,
                        pi_duration: float = DEFAULT_PI_DURATION,
                        rise_fall: float = DEFAULT_RISE_FALL,
                        idle_detuning: float = IDLE_DETUNING,
                        compensate: bool = True) -> PulseSequence:
    """Dynamic-mode swap: pi pulse on A, coupler and B-detune pulse, measure.

    ``t_swap`` is the full length of the coupler pulse including its rise
    and fall; pulses shorter than two rise times use half the pulse for each
    edge.
    """
    if t_swap < 0:
        raise ValueError("t_swap must be >= 0")
    if i_cb_off is None:
        i_cb_off = device.off_bias(params)
    z_idle = params.f10_a - idle_detuning - params.f10_b
    z_swap = params.f10_a - delta - params.f10_b
    coupler_segs, zb_segs = (), ()
    if t_swap > 0:
        rf = min(rise_fall, t_swap / 2)
        coupler_segs = (Segment(pi_duration, t_swap, "flat_with_rise_fall", i_cb_on, rise_fall=rf),)
        zb_segs = (Segment(pi_duration, t_swap, "flat_with_rise_fall", z_swap, rise_fall=rf),)
    channels = {
        "coupler": Channel("coupler", coupler_segs, i_cb_off),
        "z_b": Channel("z_b", zb_segs, z_idle),
        "uw_a": Channel("uw_a", (pi_pulse("a", pi_duration),)),
    }
    end = pi_duration + t_swap
    return PulseSequence(channels, end, end,
                         compensation=_with_compensation(channels, params, compensate))
