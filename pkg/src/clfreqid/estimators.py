"""Non-parametric plant estimates on the DFT grid.

Every estimator is a per-frequency ratio of DFTs. Frequencies where a
denominator falls below the floor are masked (``valid=False``, value NaN)
instead of being returned as huge numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lti
from .signals import grid

METHODS = ("etfe_yr", "etfe_ur", "direct", "indirect", "joint_io", "joint_io_two_exp", "geo_avg")
RATIO_FLOOR = 1e-12


def dft_floor(n: int) -> float:
    return 1e-12 * np.sqrt(n)


@dataclass(frozen=True, eq=False)
class PlantEstimate:
    values: np.ndarray
    valid: np.ndarray
    method: str
    source_ids: tuple = ()

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def omega(self) -> np.ndarray:
        return grid(self.n)

    def to_csv(self, path=None, header: dict | None = None) -> str:
        lines = [f"# {k}: {v}" for k, v in (header or {}).items()]
        lines.append("omega,re,im,valid,method")
        for w, g, ok in zip(self.omega, self.values, self.valid):
            lines.append(f"{float(w)!r},{float(g.real)!r},{float(g.imag)!r},{int(ok)},{self.method}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _spectra(rec):
    return (np.fft.fft(rec.r, norm="ortho"), np.fft.fft(rec.u, norm="ortho"),
            np.fft.fft(rec.y, norm="ortho"))


def _ratio(num, den, ok, method, ids) -> PlantEstimate:
    vals = np.full(num.shape, np.nan + 1j * np.nan)
    vals[ok] = num[ok] / den[ok]
    return PlantEstimate(vals, ok, method, tuple(ids))


def etfe(rec, channel: str = "y", floor: float | None = None) -> PlantEstimate:
    """Closed-loop ETFE: ``Y/R`` (channel ``"y"``) or ``U/R`` (channel ``"u"``)."""
    if channel not in ("y", "u"):
        raise ValueError("channel must be 'y' or 'u'")
    floor = dft_floor(rec.n) if floor is None else floor
    R, U, Y = _spectra(rec)
    num = Y if channel == "y" else U
    return _ratio(num, R, np.abs(R) >= floor, f"etfe_{channel}r", [rec.experiment_id])


def direct(rec, floor: float | None = None) -> PlantEstimate:
    floor = dft_floor(rec.n) if floor is None else floor
    _, U, Y = _spectra(rec)
    return _ratio(Y, U, np.abs(U) >= floor, "direct", [rec.experiment_id])


def joint_io(rec, floor: float | None = None) -> PlantEstimate:
    """``T_yr / T_ur``. The shared R cancels, so this is evaluated as ``Y/U``."""
    floor = dft_floor(rec.n) if floor is None else floor
    R, U, Y = _spectra(rec)
    ok = (np.abs(U) >= floor) & (np.abs(R) >= floor)
    return _ratio(Y, U, ok, "joint_io", [rec.experiment_id])


def indirect(rec, controller: lti.TransferFunction, floor: float | None = None) -> PlantEstimate:
    """``T_yr / (1 - T_yr C)`` with C evaluated analytically on the grid."""
    floor = dft_floor(rec.n) if floor is None else floor
    R, _, Y = _spectra(rec)
    c = lti.evaluate(controller, grid(rec.n))
    ok = np.abs(R) >= floor
    t_yr = np.where(ok, Y / np.where(ok, R, 1.0), 0.0)
    den = 1.0 - t_yr * c
    ok &= np.abs(den) >= RATIO_FLOOR
    return _ratio(t_yr, den, ok, "indirect", [rec.experiment_id])


def _check_same_excitation(rec_a, rec_b) -> None:
    if rec_a.n != rec_b.n or not np.array_equal(rec_a.r, rec_b.r):
        raise ValueError("two-experiment estimators need identical excitation r in both records")


def joint_io_two_experiments(rec_a, rec_b, floor: float | None = None) -> PlantEstimate:
    """``(Y_a/R) / (U_b/R)``: numerator and denominator from independent experiments."""
    _check_same_excitation(rec_a, rec_b)
    floor = dft_floor(rec_a.n) if floor is None else floor
    R, _, Ya = _spectra(rec_a)
    _, Ub, _ = _spectra(rec_b)
    ok = (np.abs(Ub) >= floor) & (np.abs(R) >= floor)
    return _ratio(Ya, Ub, ok, "joint_io_two_exp", [rec_a.experiment_id, rec_b.experiment_id])


def geometric_root(a, b):
    """Square root of ``a*b`` on the branch nearest to ``(a+b)/2``.

    Returns ``(root, ambiguous)``; ``ambiguous`` marks points where both
    roots are equidistant from the mean, in which case the principal root
    is kept.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    root = np.sqrt(a * b)
    mean = 0.5 * (a + b)
    # |root - mean| < |-root - mean|  <=>  Re[root * conj(mean)] > 0
    side = np.real(root * np.conj(mean))
    return np.where(side < 0, -root, root), side == 0


def geometric_average(est_a: PlantEstimate, est_b: PlantEstimate) -> PlantEstimate:
    if est_a.method != est_b.method:
        raise ValueError(f"cannot average {est_a.method} with {est_b.method}")
    if est_a.n != est_b.n:
        raise ValueError("estimates live on different grids")
    ok = est_a.valid & est_b.valid
    a = np.where(ok, est_a.values, 0.0)
    b = np.where(ok, est_b.values, 0.0)
    root, ambiguous = geometric_root(a, b)
    vals = np.where(ok, root, np.nan + 1j * np.nan)
    return PlantEstimate(vals, ok & ~ambiguous, "geo_avg", est_a.source_ids + est_b.source_ids)
