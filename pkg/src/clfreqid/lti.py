"""Discrete-time SISO rational transfer functions in the backward shift.

Coefficients are stored in ascending powers of q^-1, so ``num=[b0, b1, b2]``
is ``b0 + b1 q^-1 + b2 q^-2``. This is the same ordering used by
:func:`scipy.signal.lfilter`, which makes the difference equation direct.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import signal as sps

STABILITY_MARGIN = 1e-9
_POLE_TOL = 1e-13

LoopQuantity = Literal["S", "SG", "SC", "SH", "SCH", "GC"]


class PoleOnCircleError(ArithmeticError):
    """Raised when a denominator vanishes on the unit circle."""


class UnstableLoopError(ArithmeticError):
    """Raised when a closed loop (or a filter that must be stable) is not."""


def _as_coeffs(c, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(c, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D coefficient list")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite coefficients")
    return arr


def polyadd(a, b) -> np.ndarray:
    """Add two coefficient arrays in ascending q^-1 powers (zero padded)."""
    n = max(len(a), len(b))
    out = np.zeros(n)
    out[: len(a)] += a
    out[: len(b)] += b
    return out


@dataclass(frozen=True, eq=False)
class TransferFunction:
    """``num(q^-1) / den(q^-1)`` with ``den[0] != 0``."""

    num: np.ndarray
    den: np.ndarray

    def __init__(self, num, den=(1.0,)):
        num = _as_coeffs(num, "num")
        den = _as_coeffs(den, "den")
        if den[0] == 0.0:
            raise ValueError("den[0] must be nonzero (causal difference equation)")
        num.setflags(write=False)
        den.setflags(write=False)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __repr__(self) -> str:
        return f"TransferFunction(num={self.num.tolist()}, den={self.den.tolist()})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, TransferFunction):
            return NotImplemented
        return np.array_equal(self.num, other.num) and np.array_equal(self.den, other.den)

    __hash__ = None

    # Composition never cancels common factors on purpose.
    def __mul__(self, other) -> TransferFunction:
        if isinstance(other, (int, float)):
            return TransferFunction(self.num * other, self.den)
        return TransferFunction(np.convolve(self.num, other.num), np.convolve(self.den, other.den))

    __rmul__ = __mul__

    def __neg__(self) -> TransferFunction:
        return TransferFunction(-self.num, self.den)

    def __add__(self, other) -> TransferFunction:
        if isinstance(other, (int, float)):
            other = TransferFunction([other])
        num = polyadd(np.convolve(self.num, other.den), np.convolve(other.num, self.den))
        return TransferFunction(num, np.convolve(self.den, other.den))

    __radd__ = __add__

    @property
    def is_zero(self) -> bool:
        return not np.any(self.num)

    def poles(self) -> np.ndarray:
        return polyroots(self.den)

    def zeros(self) -> np.ndarray:
        return polyroots(self.num)


def polyroots(coeffs) -> np.ndarray:
    """Roots in z of ``c0 + c1 z^-1 + ... + cn z^-n``.

    Multiplying through by z^n gives the ordinary polynomial with the same
    coefficient order, whose roots are the eigenvalues of its companion
    matrix. Trailing zeros are roots at the origin.
    """
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if c.size == 0:
        raise ValueError("zero polynomial has no well-defined roots")
    n_origin = len(c) - len(np.trim_zeros(c, "b"))
    c = np.trim_zeros(c, "b")
    if len(c) == 1:
        roots = np.zeros(0, dtype=complex)
    else:
        companion = np.zeros((len(c) - 1, len(c) - 1))
        companion[0, :] = -c[1:] / c[0]
        companion[1:, :-1] = np.eye(len(c) - 2)
        try:
            roots = np.linalg.eigvals(companion).astype(complex)
        except np.linalg.LinAlgError as exc:
            raise ArithmeticError("companion eigenvalue solver did not converge") from exc
    return np.concatenate([roots, np.zeros(n_origin, dtype=complex)])


def evaluate(tf: TransferFunction, omega):
    """Frequency response ``num(e^{-jw}) / den(e^{-jw})``.

    Accepts a scalar or an array of frequencies in rad/sample and returns
    a complex value of matching shape.
    """
    w = np.asarray(omega, dtype=float)
    z_inv = np.exp(-1j * w)
    num = np.polynomial.polynomial.polyval(z_inv, tf.num)
    den = np.polynomial.polynomial.polyval(z_inv, tf.den)
    scale = np.sum(np.abs(tf.den))
    if np.any(np.abs(den) <= _POLE_TOL * scale):
        raise PoleOnCircleError(f"denominator of {tf!r} vanishes on the unit circle")
    out = num / den
    return complex(out) if out.ndim == 0 else out


def filter(tf: TransferFunction, x, initial_state=None) -> np.ndarray:
    """Run ``den * y = num * x`` over the last axis of ``x``.

    ``initial_state`` uses the transposed direct-form II convention of
    :func:`scipy.signal.lfilter` (length ``max(len(num), len(den)) - 1``);
    ``None`` means rest.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] == 0:
        raise ValueError("input must be non-empty")
    if initial_state is None:
        return sps.lfilter(tf.num, tf.den, x)
    y, _ = sps.lfilter(tf.num, tf.den, x, zi=np.asarray(initial_state, dtype=float))
    return y


def is_stable(tf: TransferFunction, margin: float = STABILITY_MARGIN) -> bool:
    return bool(np.all(np.abs(tf.poles()) < 1.0 - margin))


def impulse_response(tf: TransferFunction, tail_tol: float = 1e-12, min_length: int = 64,
                     max_length: int = 1 << 22) -> np.ndarray:
    """Impulse response truncated once the trailing half holds < tail_tol of the energy.

    Raises :class:`UnstableLoopError` if the response has not decayed by
    ``max_length`` samples.
    """
    length = max(min_length, 2 * max(len(tf.num), len(tf.den)))
    while length <= max_length:
        imp = np.zeros(length)
        imp[0] = 1.0
        h = sps.lfilter(tf.num, tf.den, imp)
        total = float(np.dot(h, h))
        if not np.isfinite(total):
            break
        tail = float(np.dot(h[length // 2:], h[length // 2:]))
        if tail <= tail_tol * total:
            return h
        length *= 2
    raise UnstableLoopError(f"impulse response of {tf!r} does not decay")


@dataclass(frozen=True)
class ClosedLoopSystem:
    """Plant G, controller C and noise model H in the standard feedback loop

    ``u = C (r1 - y) + r2``, ``y = G u + v``, ``v = H e``.
    """

    plant: TransferFunction
    controller: TransferFunction
    noise_model: TransferFunction

    def char_poly(self) -> np.ndarray:
        return closed_loop_char_poly(self)

    def is_stable(self, margin: float = STABILITY_MARGIN) -> bool:
        cp = self.char_poly()
        if abs(cp[0]) <= 1e-12 * max(1.0, np.max(np.abs(cp))):
            return False
        if not np.all(np.abs(polyroots(cp)) < 1.0 - margin):
            return False
        return is_stable(self.noise_model, margin)

    def check(self) -> None:
        """Raise :class:`UnstableLoopError` unless the loop and H are stable."""
        cp = self.char_poly()
        if abs(cp[0]) <= 1e-12 * max(1.0, np.max(np.abs(cp))):
            raise UnstableLoopError("ill-posed loop: 1 + G C vanishes at q^-1 = 0 (algebraic loop)")
        rho = np.max(np.abs(polyroots(cp)), initial=0.0)
        if rho >= 1.0 - STABILITY_MARGIN:
            raise UnstableLoopError(f"closed loop is unstable (max pole modulus {rho:.6g})")
        if not is_stable(self.noise_model):
            raise UnstableLoopError("noise model H is unstable; v would not be stationary")

    def transfer(self, which: LoopQuantity) -> TransferFunction:
        """Closed-loop map as a rational function, without cancellations."""
        g, c, h = self.plant, self.controller, self.noise_model
        cp = self.char_poly()
        base = {
            "S": (np.convolve(g.den, c.den), cp),
            "SG": (np.convolve(g.num, c.den), cp),
            "SC": (np.convolve(g.den, c.num), cp),
            "GC": (np.convolve(g.num, c.num), np.convolve(g.den, c.den)),
        }
        if which in base:
            return TransferFunction(*base[which])
        if which == "SH":
            return TransferFunction(base["S"][0], cp) * h
        if which == "SCH":
            return TransferFunction(base["SC"][0], cp) * h
        raise ValueError(f"unknown loop quantity {which!r}")


def closed_loop_char_poly(sys: ClosedLoopSystem) -> np.ndarray:
    """``den_G * den_C + num_G * num_C`` in ascending q^-1 powers."""
    g, c = sys.plant, sys.controller
    return polyadd(np.convolve(g.den, c.den), np.convolve(g.num, c.num))


def loop_response(sys: ClosedLoopSystem, which: LoopQuantity, omega):
    """Pointwise closed-loop quantity built from ``evaluate`` of G, C and H."""
    g = evaluate(sys.plant, omega)
    c = evaluate(sys.controller, omega)
    gc = g * c
    if which == "GC":
        return gc
    rd = 1.0 + gc
    if np.any(np.abs(rd) <= _POLE_TOL):
        raise PoleOnCircleError("1 + G C vanishes on the unit circle")
    s = 1.0 / rd
    if which == "S":
        return s
    if which == "SG":
        return s * g
    if which == "SC":
        return s * c
    h = evaluate(sys.noise_model, omega)
    if which == "SH":
        return s * h
    if which == "SCH":
        return s * c * h
    raise ValueError(f"unknown loop quantity {which!r}")


def benchmark_system() -> ClosedLoopSystem:
    """Benchmark loop used throughout the numerical study (second-order plant, FIR controller)."""
    return ClosedLoopSystem(
        plant=TransferFunction([1.0], [1.0, -1.6, 0.89]),
        controller=TransferFunction([0.0, 1.0, -0.8]),
        noise_model=TransferFunction([1.0, -1.56, 1.045, -0.3338], [1.0, -2.35, 2.09, -0.6675]),
    )
