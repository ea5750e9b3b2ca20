"""
The smooth bump behind the Lyapunov construction
================================================

chi is 0 inside the ball of radius R, 1 outside radius R + 1, and climbs
monotonically on the shell. The plot shows the radial profile and its
derivative; the table checks the polynomial facts the construction needs.
"""
import math
from pathlib import Path

import numpy as np

from gibbslab.harness import render_svg
from gibbslab.io import atomic_write
from gibbslab.lyapunov_certificates import poly_checks, profile, profile_derivative

t = np.linspace(-0.25, 1.25, 301)
chi = profile(t)
dchi = profile_derivative(t)
print(f"chi range [{chi.min()}, {chi.max()}], max slope {dchi.max():.4f} at t={t[np.argmax(dchi)]:.3f}")

rep = poly_checks()
print(f"h(1/2) = {rep.h_half!r}, h(1) = {rep.h_one!r}, min h on [1/2,1] = {rep.h_min:.6f}")
print(f"h3 minimizer {rep.h3_argmin:.6f}  vs 1 - sqrt(7/30) = {1 - math.sqrt(7 / 30):.6f}")
print(f"min of the printed profile derivative on (0,1): {rep.p_tilde_min:.3e}")

out = Path(__file__).with_name("out")
atomic_write(out / "bump_profile.svg", render_svg({"chi": (t, chi), "chi'": (t, dchi)}, labels=("r - R", "value")))
print(f"wrote {out / 'bump_profile.svg'}")
