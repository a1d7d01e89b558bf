"""Wick pairings and the Stratonovich to Ito conversion on a grid.

Gaussian moments are sums over perfect matchings.  On a grid the
Stratonovich integral is the plain multilinear sum and the Ito integral
uses Hermite (Wick) products, so the Hu-Meyer expansion holds exactly
realization by realization.
"""
import numpy as np

from stratlim import chaos
from stratlim.grid import GridSpec
from stratlim.random_field import sample_white_noise

for n in range(1, 6):
    print(f"2n={2 * n:>2}: {len(chaos.enumerate_pairings(2 * n)):>4} pairings, "
          f"(2n-1)!! = {chaos.double_factorial_odd(n)}")

p = chaos.enumerate_pairings(4)[1]
c = chaos.classify_pairing(p, 2, 2)
print(f"pairing {p.pair_map} of n=m=2: crossings={c.crossings}, n0={c.n0}, m0={c.m0}")

grid = GridSpec(1, 1.0, 8)
rng = np.random.default_rng(0)
f = chaos.random_symmetric_function(3, grid, rng)
for r in range(3):
    strat, ito = chaos.hu_meyer_residual(f, sample_white_noise(grid, 0, r))
    print(f"noise {r}: Stratonovich {strat:+.12f}  sum of Ito terms {ito:+.12f}")
