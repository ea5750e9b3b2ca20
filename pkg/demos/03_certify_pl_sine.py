"""
A certified Poincare constant next to the measured one
======================================================

Above a temperature threshold a PL landscape has

    C_PI <= (2/beta)(1 + L/(lambda l_b)) + 2 C_local,

with C_local the Poincare constant of mu_beta restricted to the sublevel
ball {F <= l_b}. Below, the bound is compared with the grid spectral gap.
"""
from gibbslab import catalogue, generator_spectral_gap, grid_measure, local_poincare
from gibbslab.harness import auto_bounds
from gibbslab.lyapunov_certificates import cert_pi_pl, recompute

p = catalogue("pl_sine")
lam, L = p.pl_lambda, p.smoothness_L
print(f"pl_sine: lambda={lam}, L={L}")

for l_b in (1.0, 10.0):
    radius = p.sublevel_radius(l_b)
    threshold = 2 * (p.dim + 2 / lam) * (1 + L / (lam * l_b))
    for factor in (1.1, 4.0):
        beta = factor * threshold
        bounds = auto_bounds(p, beta)
        bounds = [[min(bounds[0][0], -1.2 * radius), max(bounds[0][1], 1.2 * radius)]]
        gm = grid_measure(p, beta, bounds, 4096)
        C_local = local_poincare(gm, p.minimizer, radius).c_pi
        cert = cert_pi_pl(lam, L, l_b, C_local, p.dim, beta)
        measured = generator_spectral_gap(gm).c_pi
        assert recompute(cert).bound == cert.bound
        print(f"l_b={l_b:<4g} beta={beta:8.2f}  C_local={C_local:.3e}  certified={cert.bound:.4e}"
              f"  measured={measured:.4e}  slack x{cert.bound / measured:.0f}")

print()
print(cert_pi_pl(4, 2, 1, 0.1, 1, 100).to_json())
