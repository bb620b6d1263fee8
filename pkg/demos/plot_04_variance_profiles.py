"""
Which estimator has the smaller variance?
=========================================

Small-noise variance profiles for the direct, indirect and two-experiment
estimators. The two-experiment estimator wins exactly where
Re[G* s_yu] < 0, which in the leakage-free limit is where Re[CG] > 0.
"""

# %%
import numpy as np
from scipy.optimize import brentq

from clfreqid import lti, signals
from clfreqid import variance as var

sys = lti.benchmark_system()
R = signals.dft(signals.prbs(7).samples)
cov = var.noise_covariances(sys, R.n)
prof = {k: var.asymptotic_variance(sys, R, cov, k).values for k in ("dir", "ind", "io2")}
pred = var.ordering_predicate(sys, cov)

w = cov.omega
for k in range(1, 64, 6):
    print(f"w={w[k]:.3f}  dir={prof['dir'][k]:9.4f}  ind={prof['ind'][k]:9.4f}  "
          f"io2={prof['io2'][k]:9.4f}  io2<dir: {bool(pred.exact[k])}")

# %%
# Where does the loop gain change sign?
f = lambda x: lti.loop_response(sys, "GC", np.array([x])).real[0]
lo, hi = var.first_sign_change(w, pred.re_cg)
print(f"Re[CG] turns negative at w = {brentq(f, lo, hi):.4f}, between grid points {lo:.4f} and {hi:.4f}")
print("exact and leakage-free predicates agree at", f"{np.mean(pred.exact == pred.approximate):.1%}", "of bins")

# %%
# The leakage-free closed forms approach the exact profiles as N grows.
for periods in (1, 8):
    Rp = signals.dft(np.tile(signals.prbs(7).samples, periods))
    cp = var.noise_covariances(sys, Rp.n)
    ex = var.asymptotic_variance(sys, Rp, cp, "dir").values[::periods]
    nl = var.no_leakage_variance(sys, Rp, "dir").values[::periods]
    print(f"N={Rp.n:5d}  max |exact/leak-free - 1| = {np.max(np.abs(ex / nl - 1)):.4f}")
