"""
The benchmark loop and its excitation
=====================================

A second-order resonant plant under a PD-like controller, disturbed by
coloured noise. We build the loop, check that it is stable, and generate
the period-127 PRBS used to excite it.
"""

# %%
import numpy as np

from clfreqid import lti, signals

sys = lti.benchmark_system()
print("plant poles     ", np.round(sys.plant.poles(), 4))
print("noise poles     ", np.round(sys.noise_model.poles(), 4))
print("closed loop     ", np.round(lti.polyroots(sys.char_poly()), 4))
print("stable:", sys.is_stable())

# %%
# The sensitivity dips where the loop gain is large. That band is where
# the noise is rejected, and also where identification is hardest.
w = signals.grid(127)
S = lti.loop_response(sys, "S", w)
H = lti.evaluate(sys.noise_model, w)
half = w <= np.pi
for k in np.flatnonzero(half)[::8]:
    print(f"w={w[k]:.3f}  |S|={abs(S[k]):7.4f}  |H|^2={abs(H[k])**2:9.3f}")

# %%
# A maximal-length PRBS: +/-1, period 2^7 - 1, nearly flat spectrum.
exc = signals.prbs(7)
R = signals.dft(exc.samples)
print("period", exc.n, "mean", exc.samples.mean())
print("|R|^2 at DC", abs(R.values[0]) ** 2, " elsewhere", np.unique(np.round(abs(R.values[1:]) ** 2, 8)))
