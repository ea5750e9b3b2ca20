"""
Spectral gaps of Gibbs measures on a grid
=========================================

The Poincare constant of mu_beta ~ exp(-beta F) is the inverse of the
smallest nonzero eigenvalue of the Langevin generator. On a fine grid it
can be computed to many digits, which makes it a good yardstick.
"""
import math

from gibbslab import catalogue, generator_spectral_gap, grid_measure
from gibbslab.harness import auto_bounds

# For F(w) = w^2/2 the measure is Gaussian with variance 1/beta and the
# constant is exactly 1/beta.
ou = catalogue("quadratic", {"c": 1.0})
for beta in (1, 4, 16, 64):
    s = 8 / math.sqrt(beta)
    r = generator_spectral_gap(grid_measure(ou, beta, [[-s, s]], 4096))
    print(f"quadratic  beta={beta:>3}  C_PI={r.c_pi:.8f}  1/beta={1 / beta:.8f}  residual={r.residual:.1e}")

# A PL landscape that is not convex still gets C_PI ~ 1/beta at low temperature.
pl = catalogue("pl_sine")
print()
for beta in (1, 10, 100, 1000):
    r = generator_spectral_gap(grid_measure(pl, beta, auto_bounds(pl, beta), 4096))
    print(f"pl_sine    beta={beta:>4}  C_PI={r.c_pi:.6g}  beta*C_PI={beta * r.c_pi:.4f}")

# Two wells separated by a barrier: the constant grows like exp(beta * barrier).
dw = catalogue("double_well")
print()
for beta in (2, 5, 10, 20, 30):
    r = generator_spectral_gap(grid_measure(dw, beta, auto_bounds(dw, beta), 4096))
    print(f"double_well beta={beta:>3}  C_PI={r.c_pi:.4g}  log(C_PI)/beta={math.log(r.c_pi) / beta:.3f}")
