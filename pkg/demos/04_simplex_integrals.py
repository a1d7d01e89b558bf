"""Singular integrals over the time simplex and the factorial bound.

Nested integrals with (s - r)^(-alpha) singularities have a closed form
telescoping in Gamma functions.  The double series of the resulting
bounds J_{n,m} converges; its partial sums are shown shell by shell.
"""
from stratlim import simplex

prof = simplex.ExponentProfile((0.5, 0.0, 0.5, 0.5), 0.5)
exact = simplex.simplex_closed_form(1.0, prof)
quad = simplex.simplex_quadrature(1.0, prof)
print(f"profile {prof.alphas}: closed form {exact:.12f}, quadrature {quad:.12f}")

shells = simplex.jnm_shells(120, 1.0, 0.5, 2.0)
partial = shells.cumsum()
for K in (10, 20, 40, 60, 80, 100):
    print(f"K={K:>3}: partial sum {partial[K]:.6f}, remainder {shells[K + 1:].sum():.2e}")

for nmax in (20, 40, 80):
    print(f"calibrated Gamma-ratio constant up to {nmax}: "
          f"{simplex.calibrate_bound_constant(0.5, nmax):.4f}")
print(f"large-index limit: {simplex.stirling_bound_constant(0.5):.4f}")
