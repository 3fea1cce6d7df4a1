"""Build-time validation scratchpad (not shipped): independent EMD reference,
GMM monotonicity probes, and planted-signal learnability checks."""

import numpy as np
from scipy.interpolate import splev, splrep
from scipy.signal import argrelmax, argrelmin

from emdtrade.emd import EmdConfig, decompose, mean_envelope, imf_extrema_crossing_gap, count_zero_crossings


def reference_sift(signal, n_imfs=4, sift_passes=12):
    """Crude independent EMD: fixed sifting passes, splrep/splev envelopes,
    no boundary handling. Only for cross-checking IMF1 shape."""
    residual = np.asarray(signal, float).copy()
    imfs = []
    for _ in range(n_imfs):
        h = residual.copy()
        for _ in range(sift_passes):
            pk = argrelmax(h)[0]
            tr = argrelmin(h)[0]
            if len(pk) < 4 or len(tr) < 4:
                break
            t = np.arange(len(h), dtype=float)
            up = splev(t, splrep(pk, h[pk]))
            lo = splev(t, splrep(tr, h[tr]))
            h = h - 0.5 * (up + lo)
        imfs.append(h)
        residual = residual - h
        if len(argrelmax(residual)[0]) + len(argrelmin(residual)[0]) < 2:
            break
    return imfs, residual


def interior(x, frac=0.8):
    n = len(x)
    k = int(n * (1 - frac) / 2)
    return x[k : n - k]


def corr(a, b):
    return float(np.corrcoef(a, b)[0, 1])


k = np.arange(512)
fast = np.sin(2 * np.pi * 8 * k / 512)
slow = 0.5 * np.sin(2 * np.pi * 1 * k / 512)
two_tone = fast + slow

d = decompose(two_tone)
print(f"two-tone: J={d.n_imfs}")
c_mine = corr(interior(d.imfs[0].values), interior(fast))
print(f"  corr(my IMF1, fast tone) = {c_mine:.5f}")

ref_imfs, _ = reference_sift(two_tone)
c_ref = corr(interior(ref_imfs[0]), interior(fast))
print(f"  corr(ref IMF1, fast tone) = {c_ref:.5f}")
print(f"  corr(my IMF1, ref IMF1)  = {corr(interior(d.imfs[0].values), interior(ref_imfs[0])):.5f}")

# envelope of a pure sine
sine = np.sin(2 * np.pi * 4 * np.arange(256) / 256)
m = mean_envelope(sine)
print(f"pure sine mean envelope, interior 80% max |m| = {np.max(np.abs(interior(m))):.5f}")

# reconstruction + IMF validity + frequency ordering on 100 random walks
rng_fail = 0
gap_ok = 0
gap_total = 0
order_ok = 0
order_total = 0
import time

t0 = time.monotonic()
for s in range(100):
    rng = np.random.default_rng(s)
    sig = np.cumsum(rng.standard_normal(512))
    dec = decompose(sig)
    recon = dec.reconstruct()
    err = np.max(np.abs(recon - sig))
    rng_range = sig.max() - sig.min()
    if err > 1e-8 * rng_range:
        rng_fail += 1
    for imf in dec.imfs:
        gap_total += 1
        if imf_extrema_crossing_gap(imf.values) <= 1:
            gap_ok += 1
    zc = [count_zero_crossings(imf.values) for imf in dec.imfs]
    for a, b in zip(zc[:-1], zc[1:]):
        order_total += 1
        if a >= b:
            order_ok += 1
elapsed = time.monotonic() - t0
print(f"random-walk corpus: recon failures={rng_fail}/100, IMF gap ok={gap_ok}/{gap_total} "
      f"({100*gap_ok/max(gap_total,1):.1f}%), freq order ok={order_ok}/{order_total} "
      f"({100*order_ok/max(order_total,1):.1f}%), elapsed={elapsed:.1f}s")

# monotone ramp
ramp = np.linspace(0, 1, 64)
dr = decompose(ramp)
print(f"ramp: J={dr.n_imfs} (expect 0)")

# GMM monotonicity probe
from emdtrade.gmm import GmmConfig, fit_gmm, select_g_bic

worst = 0.0
for seed in range(20):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(-3, 1, (300, 2)), rng.normal(3, 1, (300, 2))])
    model = fit_gmm(X, 2, GmmConfig(seed=seed))
    for hist in model.restart_ll_histories:
        for a, b in zip(hist[:-1], hist[1:]):
            worst = min(worst, b - a)
print(f"GMM worst ll delta over 20 two-blob fits: {worst:.3e}")

hits1 = 0
hits2 = 0
for seed in range(20):
    rng = np.random.default_rng(1000 + seed)
    X1 = rng.normal(0, 1, (600, 2))
    best1, _ = select_g_bic(X1, GmmConfig(seed=seed))
    hits1 += best1.n_components == 1
    X2 = np.vstack([rng.normal(-3, 1, (300, 2)), rng.normal(3, 1, (300, 2))])
    best2, _ = select_g_bic(X2, GmmConfig(seed=seed))
    hits2 += best2.n_components == 2
print(f"BIC: picks G=1 {hits1}/20, picks G=2 {hits2}/20")
