"""Where does sifting bail: at entry (input not envelope-able) or mid-sift?"""

import numpy as np

from emdtrade.emd import EmdConfig, local_extrema, mean_envelope, count_interior_extrema, decompose, imf_extrema_crossing_gap

cfg = EmdConfig()

entry_fail = 0
mid_fail = 0
sd_stop = 0
cap_stop = 0

def traced_sift(signal, cfg):
    global entry_fail, mid_fail, sd_stop, cap_stop
    x = np.asarray(signal, float)
    if count_interior_extrema(x) < 2:
        return None
    h = x.copy()
    first = True
    for i in range(cfg.max_sift_iters):
        m = mean_envelope(h, cfg.boundary_pad_extrema)
        if m is None:
            if first:
                entry_fail += 1
            else:
                mid_fail += 1
            break
        first = False
        h_next = h - m
        nz = h != 0
        sd = float(np.sum((h[nz] - h_next[nz]) ** 2 / h[nz] ** 2))
        h = h_next
        if sd <= cfg.sd_stop:
            sd_stop += 1
            break
    else:
        cap_stop += 1
    return h, x - h

for s in range(100):
    rng = np.random.default_rng(s)
    sig = np.cumsum(rng.standard_normal(512))
    residual = sig.copy()
    imfs = []
    while len(imfs) < cfg.max_imfs and count_interior_extrema(residual) >= 2:
        out = traced_sift(residual, cfg)
        if out is None:
            break
        imf, residual = out
        imfs.append(imf)

print(f"entry envelope failures: {entry_fail}")
print(f"mid-sift envelope failures: {mid_fail}")
print(f"SD-threshold stops: {sd_stop}")
print(f"iteration-cap stops: {cap_stop}")

# if entry failures dominate: how does validity look when entry failure => residual?
fail = 0
total = 0
last_has_few = 0
for s in range(100):
    rng = np.random.default_rng(s)
    sig = np.cumsum(rng.standard_normal(512))
    residual = sig.copy()
    imfs = []
    while len(imfs) < cfg.max_imfs and count_interior_extrema(residual) >= 2:
        if mean_envelope(residual, cfg.boundary_pad_extrema) is None:
            last_has_few += 1
            break
        out = traced_sift(residual, cfg)
        if out is None:
            break
        imf, residual = out
        imfs.append(imf)
    for imf in imfs:
        total += 1
        fail += imf_extrema_crossing_gap(imf) > 1
print(f"with entry-failure=>residual: invalid {fail}/{total} ({100*(1-fail/total):.1f}% valid); stopped-with-extrema {last_has_few}")
