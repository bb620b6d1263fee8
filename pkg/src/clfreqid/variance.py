"""Finite-N noise DFT covariances and small-noise asymptotic variances.

Sign convention: the noise terms are defined by the DFT relations

    Y = S G R + V_y,        U = S R + V_u,

so ``V_y`` is the DFT of ``S H e`` and ``V_u`` the DFT of ``-S C H e``. With
this choice the asymptotic variance of ``Y/U`` is
``(s_y + |G|^2 s_u - 2 Re[G* s_yu]) / |S R|^2``, and the leakage-free
cross-covariance is ``s_yu = -|S H|^2 C*``. All profiles are per unit
innovation variance; multiply by sigma^2 to compare with data.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import signal as sps

from . import lti
from .estimators import dft_floor
from .lti import ClosedLoopSystem, TransferFunction, loop_response
from .signals import Spectrum, grid

TAIL_TOL = 1e-12
PER_UNIT_SIGMA2 = "per unit sigma^2"


@dataclass(frozen=True, eq=False)
class NoiseCovariances:
    """``E[Vy Vy*]``, ``E[Vu Vu*]`` and ``E[Vy Vu*]`` for unit-variance innovations."""

    sigma_y: np.ndarray
    sigma_u: np.ndarray
    sigma_yu: np.ndarray
    n: int

    @property
    def omega(self) -> np.ndarray:
        return grid(self.n)


@dataclass(frozen=True, eq=False)
class VarianceProfile:
    values: np.ndarray
    kind: str
    scale: str = PER_UNIT_SIGMA2
    valid: np.ndarray | None = None

    def __post_init__(self):
        if self.valid is None:
            object.__setattr__(self, "valid", np.isfinite(self.values))

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def omega(self) -> np.ndarray:
        return grid(self.n)

    def scaled(self, factor: float, label: str | None = None) -> VarianceProfile:
        label = label or f"{factor!r} x {self.scale}"
        return replace(self, values=self.values * factor, scale=label)

    def to_csv(self, path=None, header: dict | None = None) -> str:
        lines = [f"# {k}: {v}" for k, v in (header or {}).items()]
        lines.append(f"# scale: {self.scale}")
        lines.append("omega,value,kind")
        for w, v in zip(self.omega, self.values):
            lines.append(f"{float(w)!r},{float(v)!r},{self.kind}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def filtered_autocovariance(tf: TransferFunction, n: int, tail_tol: float = TAIL_TOL) -> np.ndarray:
    """Autocovariance ``rho(0..n-1)`` of ``tf`` driven by unit-variance white noise."""
    return filtered_crosscovariance(tf, tf, n, tail_tol)[n - 1:].real


def filtered_crosscovariance(tf_a: TransferFunction, tf_b: TransferFunction, n: int,
                             tail_tol: float = TAIL_TOL) -> np.ndarray:
    """``rho_ab(k) = E[a(t+k) b(t)]`` for lags ``k = -(n-1)..(n-1)``.

    ``a`` and ``b`` are the outputs of the two filters driven by the same
    unit-variance white sequence.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    ha = lti.impulse_response(tf_a, tail_tol)
    hb = lti.impulse_response(tf_b, tail_tol)
    # correlate(ha, hb)[j] = sum_i ha[i + k] hb[i] with k = j - (len(hb) - 1)
    full = sps.correlate(ha, hb, mode="full", method="direct" if len(ha) * len(hb) < 1 << 20 else "fft")
    zero = len(hb) - 1
    out = np.zeros(2 * n - 1)
    for k in range(-(n - 1), n):
        j = zero + k
        if 0 <= j < len(full):
            out[k + n - 1] = full[j]
    return out


def fejer_weights(n: int) -> np.ndarray:
    """Triangular lag window ``(n - |k|) / n`` for ``k = -(n-1)..(n-1)``."""
    k = np.arange(-(n - 1), n)
    return (n - np.abs(k)) / n


def fejer_covariance(rho, n: int) -> np.ndarray:
    """``sum_{|k|<n} (n-|k|)/n rho(k) exp(-j w_l k)`` on the n-point grid.

    ``rho`` is either one-sided (length ``n``, lags ``0..n-1``, treated as an
    even autocovariance) or two-sided (length ``2n-1``, lags ``-(n-1)..n-1``).
    Lags shorter than required are zero padded.
    """
    rho = np.asarray(rho)
    if len(rho) == 2 * n - 1:
        two = rho
    else:
        one = np.zeros(n, dtype=rho.dtype)
        m = min(n, len(rho))
        one[:m] = rho[:m]
        two = np.concatenate([one[:0:-1], one])
    c = fejer_weights(n) * two
    # lags k and k - n alias onto the same DFT bin
    folded = c[n - 1:].astype(complex)
    folded[1:] += c[: n - 1]
    return np.fft.fft(folded)


def noise_covariances(sys: ClosedLoopSystem, n: int, tail_tol: float = TAIL_TOL) -> NoiseCovariances:
    sys.check()
    ty = sys.transfer("SH")
    tu = -sys.transfer("SCH")
    sy = fejer_covariance(filtered_autocovariance(ty, n, tail_tol), n).real
    su = fejer_covariance(filtered_autocovariance(tu, n, tail_tol), n).real
    syu = fejer_covariance(filtered_crosscovariance(ty, tu, n, tail_tol), n)
    return NoiseCovariances(np.maximum(sy, 0.0), np.maximum(su, 0.0), syu, n)


def _r_values(R, n: int) -> np.ndarray:
    vals = R.values if isinstance(R, Spectrum) else np.asarray(R, dtype=complex)
    if len(vals) != n:
        raise ValueError(f"R has {len(vals)} bins, covariances have {n}")
    return vals


def _masked(values, ok, kind) -> VarianceProfile:
    out = np.where(ok, values, np.nan)
    return VarianceProfile(out, kind, PER_UNIT_SIGMA2, ok)


def asymptotic_variance(sys: ClosedLoopSystem, R, cov: NoiseCovariances, which: str) -> VarianceProfile:
    """Small-noise variance of the direct (``dir``), indirect (``ind``) or
    two-experiment joint input-output (``io2``) estimator."""
    n = cov.n
    r = _r_values(R, n)
    w = grid(n)
    g = lti.evaluate(sys.plant, w)
    s = loop_response(sys, "S", w)
    ok = np.abs(r) >= dft_floor(n)
    sr2 = np.abs(s * np.where(ok, r, 1.0)) ** 2
    if which == "dir":
        vals = (cov.sigma_y + np.abs(g) ** 2 * cov.sigma_u - 2 * np.real(np.conj(g) * cov.sigma_yu)) / sr2
    elif which == "ind":
        vals = cov.sigma_y / (np.abs(s) ** 2 * sr2)
    elif which == "io2":
        vals = (cov.sigma_y + np.abs(g) ** 2 * cov.sigma_u) / sr2
    else:
        raise ValueError("which must be 'dir', 'ind' or 'io2'")
    return _masked(np.maximum(vals, 0.0), ok, f"asymptotic_{which}")


def no_leakage_variance(sys: ClosedLoopSystem, R, which: str) -> VarianceProfile:
    """Closed forms obtained by replacing the Fejer kernel with a delta."""
    r = np.asarray(R.values if isinstance(R, Spectrum) else R, dtype=complex)
    n = len(r)
    w = grid(n)
    h2 = np.abs(lti.evaluate(sys.noise_model, w)) ** 2
    ok = np.abs(r) >= dft_floor(n)
    r2 = np.abs(np.where(ok, r, 1.0)) ** 2
    if which == "dir":
        vals = h2 / (np.abs(loop_response(sys, "S", w)) ** 2 * r2)
    elif which == "io2":
        vals = (1.0 + np.abs(loop_response(sys, "GC", w)) ** 2) * h2 / r2
    else:
        raise ValueError("which must be 'dir' or 'io2'")
    return _masked(vals, ok, f"no_leakage_{which}")


@dataclass(frozen=True, eq=False)
class OrderingPredicate:
    """Where the two-experiment estimator beats the single-experiment ones.

    ``exact`` is ``Re[G* s_yu] < 0``; ``approximate`` is its leakage-free
    counterpart, which reduces to ``Re[C G] > 0``. ``re_cg`` is kept for
    locating the sign change of the loop gain.
    """

    exact: np.ndarray
    approximate: np.ndarray
    re_g_syu: np.ndarray
    re_cg: np.ndarray
    n: int

    @property
    def omega(self) -> np.ndarray:
        return grid(self.n)


def ordering_predicate(sys: ClosedLoopSystem, cov: NoiseCovariances) -> OrderingPredicate:
    w = grid(cov.n)
    g = lti.evaluate(sys.plant, w)
    re_g_syu = np.real(np.conj(g) * cov.sigma_yu)
    gc = loop_response(sys, "GC", w)
    sh2 = np.abs(loop_response(sys, "SH", w)) ** 2
    # leakage-free: s_yu -> -|SH|^2 C*, so Re[G* s_yu] -> -|SH|^2 Re[G C]
    approx_val = -sh2 * np.real(gc)
    return OrderingPredicate(re_g_syu < 0, approx_val < 0, re_g_syu, np.real(gc), cov.n)


def first_sign_change(omega, values) -> tuple[float, float]:
    """Bracketing grid frequencies around the first positive-to-negative switch of ``values``."""
    neg = np.flatnonzero((values[1:] < 0) & (values[:-1] >= 0))
    if not len(neg):
        raise ValueError("no sign change")
    i = neg[0]
    return float(omega[i]), float(omega[i + 1])
