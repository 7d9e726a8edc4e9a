"""Picking rank, noise power and condition number by expected likelihood.

The log-LR of the true covariance against a sample covariance has a
distribution that depends only on (N, K). Its median is the target: a
good estimate should look as likely as the truth would, not more.

    python3 demos/expected_likelihood.py
"""

import numpy as np

from stapcov import expected_likelihood as el
from stapcov.core import eig_hermitian, sample_covariance
from stapcov.estimators import rcml
from stapcov.simulation import get_preset, sample_training, truth_covariance

sc = get_preset("lowrank-el")  # N = 20, clutter eigenvalues 100, 50, 30, 20, 10
n, k = sc.dim, 40
ref = el.calibrate_lr0(n, k, trials=2000, seed=0)
print(f"N={n} K={k}: median log-LR of the truth = {ref.log_lr0:.3f}")
print("deciles:", " ".join(f"{q:.2f}" for _, q in ref.quantiles))

truth = truth_covariance(sc)
s = sample_covariance(sample_training(truth, k, 7))
d = eig_hermitian(s).values
print("\nsample eigenvalues:", np.array2string(d[:8], precision=1), "...")

# rank, with the noise power known
print("\nlog-LR of RCML(r) against S:")
for r in range(9):
    print(f"  r={r}: {el.rcml_log_lr(d, 1.0, r):9.3f}")
sel = el.select_rank_el(s, 1.0, 1, ref)
print(f"selected rank {sel.rank} (log-LR {sel.log_lr_achieved:.3f}); true rank {sc.rank}")

# rank and noise power together
sel2 = el.select_rank_noise_el(s, 1, ref)
print(f"\njoint selection: rank {sel2.rank}, noise {sel2.noise:.3f} (true 1.0)")
for name, sigma2, lr in sel2.candidates_considered[1:]:
    print(f"  {name:>3}: sigma^2 = {sigma2:.3f}, log-LR = {lr:.3f}")

# condition number
sel3 = el.select_condition_number_el(s, 1.0, ref)
print(f"\ncondition number: {sel3.condition_number:.1f} "
      f"(unconstrained {d[0]:.1f}, true {np.linalg.cond(truth):.1f})")

# an over-fitted estimate sits above the target, an under-fitted one below
for r in (2, sel.rank, 15):
    print(f"log-LR of RCML(r={r:2d}) = {el.likelihood_ratio_log(rcml(s, 1.0, r), s):8.3f}")
