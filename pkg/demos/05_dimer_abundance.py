"""
How often is there a dimer next to an NV?
=========================================

Populate a diamond lattice with 13C at natural abundance and count the
realisations holding a nearest-neighbour pair parallel to the NV axis
between 1 and 1.5 nm away.
"""

from nvsinglet import LatticeSpec, dimer_abundance
from nvsinglet.geometry import NM

for abundance in (0.0055, 0.011, 0.03):
    res = dimer_abundance(LatticeSpec(abundance=abundance), r_min=1.0 * NM, r_max=1.5 * NM, trials=50_000, seed=1)
    print(f"abundance {abundance:.4f}: p = {res.probability:.4f} +- {res.stderr:.4f}  ({res.n_candidate_bonds} candidate bonds)")
