# Convergence of the cut finite element method for a smooth solution.
#
# The disk of radius 0.7 sits inside the box [-1, 1]^2 and is never aligned
# with the background grid, so every level has elements cut arbitrarily by the
# boundary.  The Dirichlet condition is imposed weakly on the whole boundary
# and the manufactured solution sin(pi x) cos(pi y) is smooth, so the energy
# error should decrease at first order and the L2 error at second order.

import math

import numpy as np

from cutpoisson import LevelSetDomain
from cutpoisson.study import manufactured_smooth, run_convergence

domain = LevelSetDomain(center=(0.0, 0.0), radius=0.7, dirichlet_arcs=((0.0, 2.0 * math.pi),))
problem = manufactured_smooth(domain)

report = run_convergence(problem, levels=[8, 16, 32, 64], beta=10.0, sigma=0.1)

print("smooth solution, pure Dirichlet boundary")
print(f"{'n':>4} {'h':>9} {'ndof':>6} {'energy err':>12} {'EOC':>6} {'L2 err':>11} {'EOC':>6}")
for i, lvl in enumerate(report.levels):
    eoc_e = f"{report.eoc_energy[i - 1]:6.3f}" if i else "     -"
    eoc_l = f"{report.eoc_l2[i - 1]:6.3f}" if i else "     -"
    print(
        f"{lvl.n:4d} {lvl.h:9.5f} {lvl.ndof:6d} {lvl.energy:12.5e} {eoc_e} "
        f"{lvl.l2:11.4e} {eoc_l}"
    )

# The face-jump stabilizer seminorm of the discrete solution decays as well;
# for a smooth solution it follows the interpolation bound with rate one.
sh_slope = np.polyfit(
    np.log([lvl.h for lvl in report.levels]), np.log([lvl.sh for lvl in report.levels]), 1
)[0]
print(f"\nstabilizer seminorm decay slope: {sh_slope:.3f} (expected about 1 or better)")
