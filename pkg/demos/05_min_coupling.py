"""How small a coupling can be told apart from plain T1 decay in 1 us?"""

import numpy as np

from phasecoupler import figure_params, run_min_coupling_study

out = run_min_coupling_study([0.1e6, 0.2e6, 0.5e6], figure_params(), t_grid=np.linspace(0, 1e-6, 101))
for case in out["cases"]:
    print(f"{case['omega_c_hz'] / 1e6:.1f} MHz: F = {case['fratio']:7.2f}  {case['verdict']}")
print(f"resolution floor ~ {out['resolution_floor_hz'] / 1e6:.3f} MHz")
