"""Time BIC selection quality under a lighter acceptance-test config."""

import time

import numpy as np

from emdtrade.gmm import GmmConfig, select_g_bic

cfg_light = GmmConfig(restarts=4, max_iters=200, tol=1e-5)

t0 = time.monotonic()
hits1 = hits2 = 0
worst_delta = 0.0
for seed in range(20):
    rng = np.random.default_rng(1000 + seed)
    X1 = rng.normal(0, 1, (600, 2))
    cfg = GmmConfig(restarts=4, max_iters=200, tol=1e-5, seed=seed)
    best1, _ = select_g_bic(X1, cfg)
    hits1 += best1.n_components == 1
    X2 = np.vstack([rng.normal(-3, 1, (300, 2)), rng.normal(3, 1, (300, 2))])
    best2, _ = select_g_bic(X2, cfg)
    hits2 += best2.n_components == 2
    for m in (best1, best2):
        for hist in m.restart_ll_histories:
            for a, b in zip(hist[:-1], hist[1:]):
                worst_delta = min(worst_delta, b - a)
print(f"light cfg: G=1 {hits1}/20, G=2 {hits2}/20, worst ll delta {worst_delta:.3e}, elapsed {time.monotonic()-t0:.1f}s")
