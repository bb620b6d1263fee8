"""
Noise covariances at finite record length
=========================================

The DFT of a filtered white sequence over one period has a covariance that
is the true spectrum smeared by the Fejer kernel. We compute it from a lag
sum and compare with the spectrum itself as N grows.
"""

# %%
import numpy as np

from clfreqid import lti
from clfreqid import variance as var

sys = lti.benchmark_system()
SH = sys.transfer("SH")

for n in (31, 127, 1016):
    rho = var.filtered_autocovariance(SH, n)
    smeared = var.fejer_covariance(rho, n).real
    w = 2 * np.pi * np.arange(n) / n
    true = np.abs(lti.evaluate(SH, w)) ** 2
    print(f"N={n:5d}  max relative smear {np.max(np.abs(smeared / true - 1)):.3f}")

# %%
# All three covariances of the closed-loop noise DFTs at N = 127. The
# cross term is close to -|SH|^2 conj(C).
cov = var.noise_covariances(sys, 127)
w = cov.omega
C = lti.evaluate(sys.controller, w)
sh2 = np.abs(lti.loop_response(sys, "SH", w)) ** 2
for k in (3, 12, 30, 60):
    print(f"w={w[k]:.3f}  s_y={cov.sigma_y[k]:8.4f}  s_u={cov.sigma_u[k]:8.4f}  "
          f"s_yu={cov.sigma_yu[k]:.4f}  leak-free {-sh2[k] * np.conj(C[k]):.4f}")
