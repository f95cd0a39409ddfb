"""Static spectroscopy of the avoided crossing at one coupler bias."""

import numpy as np

from phasecoupler import bias_for_coupling, figure_params, run_spectroscopy

TWO_PI = 2 * np.pi
params = figure_params()

for target in (0.0, 17e6, 40e6):
    i_cb = bias_for_coupling(params, TWO_PI * target)
    res = run_spectroscopy(i_cb, np.linspace(-60e6, 60e6, 13), np.arange(-100e6, 60e6, 0.5e6), params)
    fit = res.fits["crossing"]
    print(f"target {target / 1e6:5.1f} MHz -> fitted splitting {fit['omega_c'] / 1e6:6.3f} MHz")
