"""Diagnose IMF validity failures on the random-walk corpus."""

import numpy as np
from collections import Counter

from emdtrade.emd import EmdConfig, decompose, imf_extrema_crossing_gap, count_interior_extrema, count_zero_crossings

fail_by_index = Counter()
total_by_index = Counter()
gap_values = Counter()

for s in range(100):
    rng = np.random.default_rng(s)
    sig = np.cumsum(rng.standard_normal(512))
    dec = decompose(sig)
    J = dec.n_imfs
    for imf in dec.imfs:
        total_by_index[imf.index] += 1
        gap = imf_extrema_crossing_gap(imf.values)
        if gap > 1:
            fail_by_index[imf.index] += 1
            gap_values[gap] += 1
            if s < 5:
                y = imf.values
                skip = int(len(y) * 0.05)
                core = y[skip:-skip]
                print(f"seed {s} imf {imf.index}/{J}: gap={gap} extrema={count_interior_extrema(core)} "
                      f"zc={count_zero_crossings(core)} mean={core.mean():.4f} range={core.max()-core.min():.3f}")

print("fails by imf index:", dict(sorted(fail_by_index.items())))
print("totals by imf index:", dict(sorted(total_by_index.items())))
print("gap value distribution:", dict(sorted(gap_values.items())))
