"""Coupling strength across the coupler bias range.

Prints the static coupling, the bias that switches the coupler off, and
how much the junction inductance softens at qubit frequencies.
"""

import numpy as np

from phasecoupler import (coupling_strength, effective_inductance, figure_params,
                          junction_inductance, off_bias, paper_params)

TWO_PI = 2 * np.pi

params = paper_params()
for frac in np.linspace(-0.9, 0.9, 7):
    w = coupling_strength(params, frac * params.i_c0)
    print(f"i_cb = {frac:+.2f} i_c0   Omega_c/2pi = {w / TWO_PI / 1e6:9.3f} MHz")

# with the printed values the coupling never crosses zero; the figure
# parameter set adds a stray inductance so that it does
fig = figure_params()
i_off = off_bias(fig)
print(f"\noff bias (figure set): {i_off * 1e6:.4f} uA = {i_off / fig.i_c0:.4f} i_c0")

# frequency-dependent inductance at the qubit frequency
l0 = junction_inductance(params, 0.0)
l6 = effective_inductance(params, 0.0, TWO_PI * 6e9)
print(f"L_c(0) = {l0 * 1e12:.2f} pH, at 6 GHz {l6 * 1e12:.2f} pH ({100 * (1 - l6 / l0):.1f}% lower)")
