"""Swap chevron: excite qubit A, pulse the coupler on, read P01.

The fitted oscillation frequency tracks sqrt(Delta**2 + Omega_c**2).
"""

import numpy as np

from phasecoupler import bias_for_coupling, figure_params, run_swap_chevron

TWO_PI = 2 * np.pi
params = figure_params()

omega_c = TWO_PI * 27e6
i_on = bias_for_coupling(params, omega_c)
deltas = np.linspace(-80e6, 80e6, 9)
t_swap = np.linspace(0, 200e-9, 161)

res = run_swap_chevron(i_on, deltas, t_swap, params)
for d, f in zip(deltas, res.fits["frequency_hz"]):
    expect = np.hypot(d, 27e6)
    print(f"Delta = {d / 1e6:+6.1f} MHz   fitted {f / 1e6:7.3f} MHz   expected {expect / 1e6:7.3f} MHz")

# a coarse text picture of the chevron: rows are detunings, columns time
p01 = res.probs[..., 1]
shades = " .:-=+*#%@"
for row in p01[:, ::4]:
    print("".join(shades[min(int(p * 10), 9)] for p in row))
