"""Critical mass of the 3D Newton (boson-star) problem.

With a Coulomb kernel in 3D and no power term, the energy is bounded below
only for small mass.  Bisection on the mass, classifying each run as a
converged ground state or a collapse, brackets the threshold.  The bracket
is a lattice quantity: it moves upward as the grid is refined.
"""

from __future__ import annotations

import dataclasses

from relgs.hamiltonian import Problem
from relgs.minimizer import scan_mass
from relgs.potentials import PowerLaw
from relgs.spectral import make_grid
from relgs.verify import coercivity_threshold

pb = Problem(N=3, m=1.0, eta=0.0, sigma=1.0, p=3.0, W=PowerLaw(1.0), M=1.0)

for n in (48, 64):
    res = scan_mass(pb, make_grid(3, 8.0, n), 1.6, 3.2)
    lo, hi = res.bracket
    print(f"n = {n}: critical mass in [{lo:.4f}, {hi:.4f}] (width {100 * res.relative_width:.1f}%)")
    for e in res.entries:
        print(f"    M = {e.M:.4f}  {e.classification:12s}  I = {e.report.I_value:.4g}")

    # %% Compare with the coercivity threshold of each endpoint's own field (a sufficient condition).
    by_m = {e.M: e for e in res.entries}
    for M in (lo, hi):
        c = coercivity_threshold(dataclasses.replace(pb, M=M), [by_m[M].report.w])
        print(f"    M = {M:.4f}: coercive = {c.coercive} (field threshold {c.M_threshold:.4f})")
