"""Parameter extraction: spectral peaks, avoided crossings, damped sinusoids."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

DEFAULT_LINEWIDTH = 3e6
MAX_ITER = 200
XTOL = 1e-9


class NoPeak(ValueError):
    pass


class DegenerateFit(ValueError):
    pass


class FitDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class Peak:
    frequency: float
    width: float
    height: float


@dataclass(frozen=True)
class DampedSineFit:
    """``offset + exp(-t/decay_time) * (decaying_offset + amplitude*cos(2 pi f t + phase))``."""

    amplitude: float
    frequency: float
    decay_time: float
    phase: float
    offset: float
    residual_rms: float
    decaying_offset: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        env = np.exp(-t / self.decay_time) if math.isfinite(self.decay_time) else np.ones_like(t)
        return self.offset + env * (self.decaying_offset
                                    + self.amplitude * np.cos(2 * np.pi * self.frequency * t + self.phase))


@dataclass(frozen=True)
class CrossingFit:
    omega_c: float
    f_center: float
    residual_rms: float
    tilt: float = 0.0

    def branches(self, delta):
        delta = np.asarray(delta, dtype=float)
        half = 0.5 * np.sqrt(delta ** 2 + self.omega_c ** 2)
        mid = self.f_center + self.tilt * delta
        return mid - half, mid + half


def _lorentzians(f, params, n):
    out = np.full_like(f, params[0])
    for j in range(n):
        f0, hw, h = params[1 + 3 * j:4 + 3 * j]
        out = out + h / (1 + ((f - f0) / hw) ** 2)
    return out


def extract_peaks(freq, prob, linewidth: float = DEFAULT_LINEWIDTH, max_peaks: int = 2) -> list[Peak]:
    """Locate up to two resonances in a spectroscopy line.

    Candidate maxima are picked by prominence and then refined together by a
    least-squares fit of a constant plus one Lorentzian per peak. ``width``
    is the full width at half maximum.
    """
    f = np.asarray(freq, dtype=float)
    p = np.asarray(prob, dtype=float)
    if f.size < 5:
        raise ValueError("need at least 5 points")
    if np.any(np.diff(f) <= 0):
        raise ValueError("frequencies must be strictly increasing")
    baseline = float(np.median(p))
    spread = 1.4826 * float(np.median(np.abs(p - baseline)))
    height = float(p.max()) - baseline
    if height <= max(3 * spread, 1e-12):
        raise NoPeak("no point rises above 3x the baseline spread")
    idx, props = find_peaks(p, prominence=max(3 * spread, 0.05 * height))
    if idx.size == 0:
        idx = np.array([int(np.argmax(p))])
        prom = np.array([height])
    else:
        prom = props["prominences"]
    order = np.argsort(prom)[::-1][:max_peaks]
    idx = np.sort(idx[order])
    n = idx.size
    x0 = [baseline]
    lo, hi = [-np.inf], [np.inf]
    step = float(np.median(np.diff(f)))
    for i in idx:
        x0 += [f[i], linewidth / 2, p[i] - baseline]
        lo += [f[0], step / 4, 0.0]
        hi += [f[-1], f[-1] - f[0], np.inf]
    x0 = np.clip(x0, np.array(lo) + 1e-300, np.array(hi))
    scale = np.array([1.0] + [linewidth, linewidth, 1.0] * n)
    res = least_squares(lambda x: _lorentzians(f, x * scale, n) - p, x0 / scale,
                        bounds=(np.array(lo) / scale, np.array(hi) / scale),
                        xtol=XTOL, max_nfev=MAX_ITER * (3 * n + 1))
    x = res.x * scale
    peaks = [Peak(float(x[1 + 3 * j]), float(2 * x[2 + 3 * j]), float(x[3 + 3 * j])) for j in range(n)]
    return sorted(peaks, key=lambda pk: pk.frequency)


def fit_avoided_crossing(rows) -> CrossingFit:
    """Fit two hyperbolic branches to peak positions versus detuning.

    ``rows`` is a sequence of ``(delta, peak_frequencies)`` with one or two
    peak frequencies per detuning. The branches are

        f(delta) = f_center + tilt*delta +- sqrt(delta**2 + omega_c**2) / 2,

    where ``tilt`` absorbs the choice of frequency reference (with qubit A
    fixed and B tuned, the pair centre moves at -1/2 per unit detuning).
    Rows with a single peak are matched to the nearer branch.
    """
    rows = [(float(d), sorted(float(x) for x in pk)) for d, pk in rows if len(pk)]
    if len(rows) < 5:
        raise ValueError("need at least 5 detuning rows with a peak")
    d = np.array([r[0] for r in rows])
    pairs = [(dd, pk) for dd, pk in rows if len(pk) >= 2]
    if pairs:
        pd = np.array([q[0] for q in pairs])
        mids = np.array([0.5 * (q[1][0] + q[1][-1]) for q in pairs])
        seps = np.array([q[1][-1] - q[1][0] for q in pairs])
        if len(pairs) >= 2 and np.ptp(pd) > 0:
            tilt0, center0 = np.polyfit(pd, mids, 1)
        else:
            tilt0, center0 = 0.0, float(mids.mean())
        j = int(np.argmin(seps))
        omega0 = math.sqrt(max(seps[j] ** 2 - pd[j] ** 2, 0.0))
    else:
        allf = np.concatenate([pk for _, pk in rows])
        tilt0, center0, omega0 = 0.0, float(np.mean(allf)), 0.0
    if np.ptp(d) < omega0:
        raise DegenerateFit("detuning span is smaller than the splitting seed")

    scale = max(float(np.ptp(d)), 1.0)

    def resid(x):
        c, tilt, om = x[0] * scale, x[1], x[2] * scale
        out = []
        for dd, pk in rows:
            half = 0.5 * math.sqrt(dd * dd + om * om)
            mid = c + tilt * dd
            lo_b, hi_b = mid - half, mid + half
            if len(pk) >= 2:
                out += [pk[0] - lo_b, pk[-1] - hi_b]
            else:
                out.append(min(pk[0] - lo_b, pk[0] - hi_b, key=abs))
        return np.array(out) / scale

    x0 = np.array([center0 / scale, tilt0, omega0 / scale])
    res = least_squares(resid, x0, xtol=XTOL, max_nfev=MAX_ITER * 4)
    c, tilt, om = res.x[0] * scale, res.x[1], abs(res.x[2]) * scale
    rms = float(np.sqrt(np.mean((res.fun * scale) ** 2)))
    return CrossingFit(omega_c=om, f_center=c, residual_rms=rms, tilt=float(tilt))


def spectral_seed(t, y, pad: int = 8) -> float:
    """Dominant oscillation frequency from the zero-padded discrete spectrum.

    Candidates within 5% of the largest peak resolve to the lowest frequency.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    step = float(np.median(np.diff(t)))
    yy = y - np.polyval(np.polyfit(t, y, 1), t)
    n = pad * len(yy)
    spec = np.abs(np.fft.rfft(yy, n))
    freqs = np.fft.rfftfreq(n, step)
    # skip the zero-frequency lobe
    k0 = max(1, pad // 2)
    if spec.size <= k0 + 1:
        return 1.0 / (t[-1] - t[0])
    s = spec[k0:]
    local = [i for i in range(1, s.size - 1) if s[i] >= s[i - 1] and s[i] >= s[i + 1]]
    if not local:
        return float(freqs[k0 + int(np.argmax(s))])
    best = max(s[i] for i in local)
    near = [i for i in local if s[i] >= 0.95 * best]
    return float(freqs[k0 + min(near)])


def _design(t, f, tau, decaying_offset):
    env = np.exp(-t / tau) if math.isfinite(tau) else np.ones_like(t)
    cols = [np.ones_like(t)]
    if decaying_offset:
        cols.append(env)
    cols += [env * np.cos(2 * np.pi * f * t), env * np.sin(2 * np.pi * f * t)]
    return np.column_stack(cols)


def _linear_part(t, y, f, tau, decaying_offset):
    a = _design(t, f, tau, decaying_offset)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return coef, y - a @ coef


def _fit_from_coef(f, tau, coef, decaying_offset, rms) -> DampedSineFit:
    c = coef[0]
    b = coef[1] if decaying_offset else 0.0
    ac, as_ = coef[-2], coef[-1]
    # a*cos(wt) + b*sin(wt) = A cos(wt + phi) with A = hypot, phi = atan2(-b, a)
    amp = math.hypot(ac, as_)
    phase = math.atan2(-as_, ac)
    return DampedSineFit(amplitude=float(amp), frequency=float(abs(f)), decay_time=float(tau), phase=float(phase),
                         offset=float(c), residual_rms=float(rms), decaying_offset=float(b))


def fit_damped_sine(t, y, decaying_offset: bool = False, freq_seed: float | None = None,
                    allow_subperiod: bool = False) -> DampedSineFit:
    """Fit an exponentially damped cosine.

    The frequency is seeded from the discrete spectrum. Frequency and decay
    time are then refined with the linear amplitudes projected out.
    Unless ``allow_subperiod``, a trace shorter than one period of either
    the seed or the fitted frequency is rejected.
    With ``decaying_offset`` the baseline has a part that decays with the
    oscillation, as in swap traces where total excitation relaxes.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 8:
        raise ValueError("need at least 8 points")
    span = float(t[-1] - t[0])
    f0 = spectral_seed(t, y) if freq_seed is None else float(freq_seed)
    if f0 * span < 1.0 and not allow_subperiod:
        raise ValueError("trace spans less than one period at the seed frequency")

    def rss(f, tau):
        return float(np.sum(_linear_part(t, y, f, tau, decaying_offset)[1] ** 2))

    taus = [span * s for s in (0.1, 0.3, 1.0, 3.0, 10.0)] + [math.inf]
    df = 1.0 / (8 * span)
    seeds = [(f0 + k * df, tau) for k in (-1, 0, 1) for tau in taus if f0 + k * df > 0]
    seed_f, seed_tau = min(seeds, key=lambda s: rss(*s))
    seed_rss = rss(seed_f, seed_tau)

    # refine in (f, 1/tau) so that an undamped trace sits at an interior point
    def vp(x):
        f, g = x[0] * f0, x[1] / span
        tau = 1.0 / g if g > 0 else math.inf
        return _linear_part(t, y, f, tau, decaying_offset)[1]

    g0 = 0.0 if not math.isfinite(seed_tau) else span / seed_tau
    res = least_squares(vp, [seed_f / f0, g0], xtol=XTOL, max_nfev=MAX_ITER,
                        bounds=([1e-6, 0.0], [np.inf, np.inf]))
    f1, g1 = res.x[0] * f0, res.x[1] / span
    tau1 = 1.0 / g1 if g1 > 0 else math.inf
    coef, r = _linear_part(t, y, f1, tau1, decaying_offset)
    final_rss = float(np.sum(r ** 2))
    if not np.isfinite(final_rss) or final_rss > seed_rss * (1 + 1e-12) + 1e-300:
        raise FitDiverged("refinement did not improve on the spectral seed")
    if f1 * span < 1.0 and not allow_subperiod:
        raise ValueError("trace spans less than one period of the fitted frequency")
    return _fit_from_coef(f1, tau1, coef, decaying_offset, math.sqrt(final_rss / t.size))


def fit_at_frequency(t, y, frequency: float, decay_time: float = math.inf,
                     decaying_offset: bool = False) -> tuple[DampedSineFit, float]:
    """Linear fit of a damped cosine with frequency and decay held fixed.

    Returns the fit and the one-sigma uncertainty of its amplitude implied
    by the residual scatter.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    a = _design(t, frequency, decay_time, decaying_offset)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    r = y - a @ coef
    dof = max(t.size - a.shape[1], 1)
    s2 = float(np.sum(r ** 2)) / dof
    cov = s2 * np.linalg.pinv(a.T @ a)
    sig = math.sqrt(max(cov[-1, -1], cov[-2, -2], 0.0))
    fit = _fit_from_coef(frequency, decay_time, coef, decaying_offset, math.sqrt(np.mean(r ** 2)))
    return fit, sig


def crosstalk_ratio(t, driven_trace, undriven_trace, n_sigma: float = 3.0) -> tuple[float, dict]:
    """Ratio of undriven to driven oscillation amplitude at the driven frequency.

    The driven trace is fitted freely. The undriven trace is projected onto
    the driven fit's frequency and decay; an amplitude below ``n_sigma``
    standard errors counts as no response and yields 0.
    """
    driven = fit_damped_sine(t, driven_trace)
    und, sig = fit_at_frequency(t, undriven_trace, driven.frequency, driven.decay_time)
    info = {"driven": driven, "undriven": und, "undriven_sigma": sig, "clamped": False}
    if driven.amplitude == 0:
        raise FitDiverged("driven trace shows no oscillation")
    if und.amplitude <= n_sigma * sig or und.amplitude < 1e-12:
        info["clamped"] = True
        return 0.0, info
    return und.amplitude / driven.amplitude, info


def pure_decay_fit(t, y):
    """Best ``c + B*exp(-t/tau)`` fit; returns (c, B, tau, rss)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    span = float(t[-1] - t[0])

    def lin(g):
        a = np.column_stack([np.ones_like(t), np.exp(-g * t)])
        coef, *_ = np.linalg.lstsq(a, y, rcond=None)
        return coef, y - a @ coef

    grid = np.geomspace(1e-3, 1e2, 121) / span
    g0 = min(grid, key=lambda g: float(np.sum(lin(g)[1] ** 2)))
    res = least_squares(lambda x: lin(x[0] / span)[1], [g0 * span], bounds=([0.0], [np.inf]),
                        xtol=XTOL, max_nfev=MAX_ITER)
    g = res.x[0] / span
    coef, r = lin(g)
    tau = 1.0 / g if g > 0 else math.inf
    return float(coef[0]), float(coef[1]), tau, float(np.sum(r ** 2))


def resolvability_fratio(t, y, frequency: float, noise_var: float) -> float:
    """Expected F statistic of an oscillation at ``frequency`` over pure decay.

    The oscillating model is ``c + exp(-t/tau) * (B + a cos + b sin)`` at the
    candidate frequency with ``tau`` free; the null model is ``c + B
    exp(-t/tau)``. The two extra linear parameters buy a residual reduction
    that is compared with the per-point measurement noise variance, giving
    ``F = 1 + (RSS_decay - RSS_osc) / (2 * noise_var)``, the expectation of
    the usual nested-model F statistic for data with that noise.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    *_, rss0 = pure_decay_fit(t, y)
    if frequency <= 0:
        return 1.0
    span = float(t[-1] - t[0])

    def r(x):
        g = x[0] / span
        tau = 1.0 / g if g > 0 else math.inf
        return _linear_part(t, y, frequency, tau, True)[1]

    g_seed = min(np.geomspace(1e-3, 1e2, 61), key=lambda g: float(np.sum(r([g]) ** 2)))
    res = least_squares(r, [g_seed], bounds=([0.0], [np.inf]), xtol=XTOL, max_nfev=MAX_ITER)
    rss1 = float(np.sum(res.fun ** 2))
    gain = max(rss0 - rss1, 0.0)
    return 1.0 + gain / (2.0 * noise_var)
