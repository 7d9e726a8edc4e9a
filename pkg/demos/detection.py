"""Probability of detection versus SNR with estimated covariances.

One training set of K = 40 snapshots feeds every estimator; thresholds
are set empirically for P_fa = 1e-2. All curves share the same noise
and target-phase draws, so differences come from the estimates alone.

    python3 demos/detection.py [NMF|AMF|GLRT]
"""

import sys

import numpy as np

from stapcov import expected_likelihood as el
from stapcov.evaluation import pd_curves
from stapcov.simulation import get_preset

kind = sys.argv[1].upper() if len(sys.argv) > 1 else "NMF"
sc = get_preset("fig-sinr-model")
ref = el.calibrate_lr0(sc.dim, 40, 2000, seed=0)
snr = np.arange(-10, 17, 2.0)
ests = [{"tag": t} for t in ("truth", "smi", "fml", "rcml", "eastr", "rcml_el")]
res = pd_curves(sc, ests, 40, snr, pfa=1e-2, trials=5000, calibration_trials=50_000,
                seed=1, kind=kind, azimuth_deg=0.0, reference=lambda n, k: ref)

print(f"{kind} detection probability, P_fa = 1e-2")
print(f"{'SNR [dB]':>10}" + "".join(f"{r.estimator:>9}" for r in res))
for i, x in enumerate(snr):
    print(f"{x:10.0f}" + "".join(f"{r.mean[i]:9.3f}" for r in res))
