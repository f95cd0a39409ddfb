"""The twelve acceptance criteria, one test each, each printing a PASS/FAIL line."""

import math

import mpmath as mp
import numpy as np
import pytest

import oracles
from phasecoupler import experiments as X
from phasecoupler import fitting, hysteresis
from phasecoupler import sequences as S
from phasecoupler.device import (bias_for_coupling, coupling_strength, effective_inductance,
                                 figure_params, junction_inductance, off_bias, paper_params,
                                 reset_study_params)
from phasecoupler.dynamics import (DEFAULT_DT, ControlSnapshot, Propagator, TwoQubitState,
                                   build_hamiltonian, constant_trace, measure_probabilities,
                                   propagate, zz_weight)

TWO_PI = 2 * math.pi
P = paper_params()
FIG = figure_params()


def bias(mhz):
    return off_bias(FIG) if mhz == 0 else bias_for_coupling(FIG, TWO_PI * mhz * 1e6)


def test_01_coupling_formula(accept):
    fracs = [-0.85, -0.3, 0.0, 0.42, 0.9]
    worst = 0.0
    for x in fracs:
        ref = float(oracles.coupling_hz(mp.mpf(x) * oracles.IC0))
        got = coupling_strength(P, x * P.i_c0) / TWO_PI
        worst = max(worst, abs(got - ref) / abs(ref))
    at09 = coupling_strength(P, 0.9 * P.i_c0) / TWO_PI / 1e6
    ok = worst <= 1e-12 and abs(at09 - (-130.9)) <= 0.1
    assert accept(1, ok, f"max rel err {worst:.2e} (<=1e-12); Omega_c/2pi(0.9 i_c0) = {at09:.3f} MHz (-130.9 +- 0.1)")


def test_02_zz_weight(accept):
    w = zz_weight(P)
    h = build_hamiltonian(ControlSnapshot(omega_c=1.0), P)
    # |00> diagonal carries w/2, the exchange element carries 1/2
    rel = h[0, 0].real / h[1, 2].real
    ok = w == 1 / 30 and abs(rel - 1 / 30) < 1e-15
    assert accept(2, ok, f"sz-sz weight {w:.6f} = 1/30, Hamiltonian ratio {rel:.6f}")


@pytest.mark.parametrize("mhz", [0, 11, 17, 27, 40])
def test_03_spectroscopy_splitting(accept, mhz):
    deltas = np.linspace(-60e6, 60e6, 13)
    probe = np.arange(-100e6, 60e6, 0.5e6)
    res = X.run_spectroscopy(bias(mhz), deltas, probe, FIG)
    fitted = res.fits["crossing"]["omega_c"] / 1e6
    if mhz == 0:
        ok = fitted <= 1.5
        rule = "<= 1.5 MHz"
    else:
        tol = max(0.5, 0.03 * mhz)
        ok = abs(fitted - mhz) <= tol
        rule = f"{mhz} +- {tol:.2f} MHz"
    assert accept(3, ok, f"configured {mhz:>2} MHz -> fitted splitting {fitted:.3f} MHz ({rule})")


@pytest.mark.parametrize("mhz", [11, 27, 45])
def test_04_chevron_law(accept, mhz):
    deltas = np.linspace(-100e6, 100e6, 11)
    res = X.run_swap_chevron(bias(mhz), deltas, np.linspace(0, 250e-9, 201), FIG)
    fitted = np.array(res.fits["frequency_hz"])
    expected = np.hypot(deltas, mhz * 1e6)
    err = np.max(np.abs(fitted / expected - 1))
    ok = bool(np.all(np.isfinite(fitted))) and err <= 0.02
    assert accept(4, ok, f"Omega_c {mhz} MHz: max |f_fit/sqrt(D^2+W^2) - 1| = {err:.2e} over 11 detunings (<= 2%)")


def test_05_on_off_ratio(accept):
    off, on = X.run_coupling_curve([bias(0), bias(100)], FIG)
    # off trace: is an oscillation at 0.1 MHz or above detectable at all?
    t = np.linspace(0, 1e-6, 101)
    p01 = X.decay_swap_trace(coupling_strength(FIG, bias(0)), t, FIG)[:, 1]
    nv = max(float(np.mean(p01 * (1 - p01))) / X.DEFAULT_SHOTS_NOISE, 1e-30)
    f_off = fitting.resolvability_fratio(t, p01, 0.1e6, nv)
    on_err = abs(on["omega_c_fitted_hz"] / 100e6 - 1)
    ok = (not off["resolved"]) and f_off < X.F_THRESHOLD and on_err <= 0.02
    ratio = on["omega_c_fitted_hz"] / 0.1e6
    assert accept(5, ok, f"off: unresolved (F at 0.1 MHz = {f_off:.2f} < {X.F_THRESHOLD}); "
                         f"on: {on['omega_c_fitted_hz'] / 1e6:.3f} MHz (100 +- 2%); on/off >= {ratio:.0f}")


def test_06_min_coupling(accept):
    t = np.linspace(0, 1e-6, 101)
    out = X.run_min_coupling_study([0.1e6, 0.3e6, 0.5e6], FIG, t_grid=t, t1=350e-9)
    cases = {c["omega_c_hz"]: c for c in out["cases"]}
    floor = out["resolution_floor_hz"]
    # same traces from the fine-step RK4 reference, fed to the same F test
    ref_f = {}
    worst = 0.0
    for f in (0.1e6, 0.5e6):
        w = TWO_PI * f
        rhos = oracles.rk4_checkpoints(TwoQubitState.basis("10").rho, lambda _t: (0, 0, 0, 0, 0, 0, w),
                                       t, 0.05e-9, gammas=(1 / 350e-9, 1 / 350e-9))
        p01 = np.array([r[1, 1].real for r in rhos])
        worst = max(worst, float(np.max(np.abs(p01 - np.array(cases[f]["p01"])))))
        nv = max(float(np.mean(p01 * (1 - p01))) / 1000, 1e-30)
        ref_f[f] = fitting.resolvability_fratio(t, p01, f, nv)
    boundary = 0.5 * X.F_THRESHOLD <= cases[0.1e6]["fratio"] <= 2 * X.F_THRESHOLD
    ok = (cases[0.5e6]["verdict"] == "resolvable" and ref_f[0.5e6] >= X.F_THRESHOLD and boundary
          and 0.05e6 <= floor <= 0.2e6 and worst < 1e-8)
    assert accept(6, ok, f"F(0.5 MHz) = {cases[0.5e6]['fratio']:.1f} resolvable; F(0.1 MHz) = "
                         f"{cases[0.1e6]['fratio']:.2f} at threshold {X.F_THRESHOLD} (boundary); floor "
                         f"{floor / 1e6:.3f} MHz; RK4 trace diff {worst:.1e}")


def test_07_crosstalk(accept):
    res = X.run_crosstalk_scan([bias(0), bias(17)], np.linspace(0, 200e-9, 101), FIG)
    r = res.fits["ratio"]
    transfer = (17 / 400) ** 2  # leading-order (Omega_c / 2 Delta)**2 at Delta = 200 MHz
    ok = True
    for q in ("a", "b"):
        r0, r17 = r[q]
        ok &= r0 < 0.01 and r17 >= 5 * r0 and r17 >= 0.5 * transfer
    assert accept(7, ok, f"ratio at zero A/B = {r['a'][0]:.1e}/{r['b'][0]:.1e} (< 0.01); at 17 MHz "
                         f"{r['a'][1]:.2e}/{r['b'][1]:.2e} (>= 5x zero, transfer oracle {transfer:.2e})")


def test_08_hysteresis(accept):
    params = reset_study_params()
    b = hysteresis.beta(params)
    zero = hysteresis.enumerate_branches(0.0, params)
    n_stable = sum(p.stable for p in zero)
    ids = set()
    alternate = True
    for i in np.linspace(-0.5, 0.5, 101) * params.i_c0:
        pts = hysteresis.enumerate_branches(float(i), params)
        flags = [p.stable for p in pts]
        alternate &= flags[0] and flags[-1] and all(x != y for x, y in zip(flags, flags[1:]))
        ids.update(p.branch_id for p in pts if p.stable)
        ref = oracles.branch_roots(float(i / params.i_c0), b, 100_001)
        alternate &= len(ref) == len(pts)
    ok = abs(b / 10 - 1) <= 0.05 and n_stable == 3 and len(ids) == 5 and alternate
    assert accept(8, ok, f"beta = {b:.3f} (10 +- 5%); {n_stable} stable at zero bias; ids {sorted(ids)} "
                         f"across +-0.5 i_c0; alternation {'holds' if alternate else 'broken'}")


def test_09_reset(accept):
    params = reset_study_params()
    cfg = hysteresis.ResetConfig(-0.75 * params.i_c0, 0.75 * params.i_c0, n_cycles=30,
                                 per_cycle_survival_q=0.746)
    others = [k for k in hysteresis.stable_branch_ids(0.0, params) if k != 0]
    res = hysteresis.simulate_reset({k: 1 / len(others) for k in others}, cfg, params)
    ratio = res.residual_error / 1.5e-4
    ok = 1 / 1.05 <= ratio <= 1.05 and abs(res.residual_error - 0.746 ** 30) < 1e-15
    assert accept(9, ok, f"residual {res.residual_error:.4e} = q^30; ratio to 1.5e-4 is {ratio:.4f} (within 1.05)")


def test_10_dynamics_invariants(accept):
    p = P.replace(t1_a=350e-9, t1_b=350e-9)
    snap = ControlSnapshot(TWO_PI * 20e6, -TWO_PI * 35e6, TWO_PI * 15e6, 0.4, TWO_PI * 8e6, -1.0, TWO_PI * 40e6)
    rho = propagate(TwoQubitState.basis("10"), snap, 0.0, 1e-6, DEFAULT_DT, p)
    trace_err = abs(rho.trace() - 1)
    nodecay = P.replace(t1_a=math.inf, t1_b=math.inf)
    pure = propagate(TwoQubitState.from_ket([1, 0.5j, -0.2, 0.7]), snap, 0.0, 1e-6, DEFAULT_DT, nodecay)
    purity_err = abs(pure.purity() - 1)
    dec = propagate(TwoQubitState.basis("10"), ControlSnapshot(), 0.0, 350e-9, DEFAULT_DT, p)
    efold_err = abs(measure_probabilities(dec)[2] - math.exp(-1))
    # dt halving on the full swap sequence: the hardest time dependence used anywhere
    seq = S.build_swap_sequence(-20e6, bias(40), 23.7e-9, FIG)
    probs = []
    for dt in (DEFAULT_DT, DEFAULT_DT / 2):
        st = Propagator(FIG).evolve(TwoQubitState.basis("00"), S.sample(seq, dt, FIG))
        probs.append(measure_probabilities(st))
    halving = float(np.max(np.abs(probs[0] - probs[1])))
    ok = trace_err <= 1e-9 and purity_err <= 1e-8 and efold_err <= 1e-6 and halving <= 1e-6
    assert accept(10, ok, f"trace {trace_err:.1e}/us, purity {purity_err:.1e}, e-fold {efold_err:.1e}, "
                          f"dt-halving {halving:.1e}")


def test_11_effective_inductance(accept):
    drop = 1 - effective_inductance(P, 0.0, TWO_PI * 6e9) / junction_inductance(P, 0.0)
    ok = abs(drop - 0.04) < 1e-12
    assert accept(11, ok, f"L_eff drop 0 -> 6 GHz = {100 * drop:.6f}% (4.0%)")


def test_12_compensation(accept):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(200):
        t0, segs = 0.0, []
        for _ in range(rng.integers(1, 6)):
            shape = S.SHAPES[rng.integers(len(S.SHAPES))]
            dur = rng.uniform(0.5e-9, 30e-9)
            rf = rng.uniform(0, 0.5) * dur if shape == "flat_with_rise_fall" else 0.0
            gap = rng.uniform(0, 5e-9)
            segs.append(S.Segment(t0 + gap, dur, shape, rng.uniform(-1.5e-6, 1.5e-6), rise_fall=rf))
            t0 += gap + dur
        coupler = S.Channel("coupler", tuple(segs), rng.uniform(-1e-6, 1e-6))
        za, zb = S.compensation_offsets(coupler, P)
        seq = S.PulseSequence({"coupler": coupler}, t0, t0, compensation={"z_a": za, "z_b": zb})
        fa, fb = seq.qubit_frequencies(np.linspace(0, t0, 1001), P)
        worst = max(worst, float(np.max(np.abs(fa / P.f10_a - 1))), float(np.max(np.abs(fb / P.f10_b - 1))))
    ok = worst <= 1e-9
    assert accept(12, ok, f"max relative qubit-frequency excursion {worst:.1e} over 200 random waveforms (<= 1e-9)")
