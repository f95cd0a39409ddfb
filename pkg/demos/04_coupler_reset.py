"""Flux branches of the coupler loop and the reset cycle."""

from dataclasses import replace

from phasecoupler import hysteresis, reset_study_params

params = reset_study_params()
print(f"beta = {hysteresis.beta(params):.3f}")

for p in hysteresis.enumerate_branches(0.0, params):
    print(f"  delta = {p.delta:+8.4f}  {'stable' if p.stable else 'unstable'}  id={p.branch_id}")

cfg = hysteresis.ResetConfig(-0.75 * params.i_c0, 0.75 * params.i_c0, n_cycles=30,
                             per_cycle_survival_q=0.746)
others = [k for k in hysteresis.stable_branch_ids(0.0, params) if k != 0]
start = {k: 1 / len(others) for k in others}
for n in (1, 5, 10, 20, 30):
    res = hysteresis.simulate_reset(start, replace(cfg, n_cycles=n), params)
    print(f"{n:3d} cycles: residual error {res.residual_error:.3e}")
