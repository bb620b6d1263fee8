"""Excitation signals, the unitary DFT and spectra on the uniform grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Primitive feedback polynomials x^n + ... + 1 (Fibonacci taps, 1-indexed).
PRBS_TAPS = {
    2: (2, 1),
    3: (3, 2),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 11, 10, 4),
    13: (13, 12, 11, 8),
    14: (14, 13, 12, 2),
    15: (15, 14),
    16: (16, 15, 13, 4),
}


def grid(n: int) -> np.ndarray:
    """DFT frequencies ``2 pi l / n`` for ``l = 0..n-1``."""
    return 2.0 * np.pi * np.arange(n) / n


@dataclass(frozen=True, eq=False)
class Spectrum:
    values: np.ndarray

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def omega(self) -> np.ndarray:
        return grid(self.n)

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True, eq=False)
class ExcitationSignal:
    samples: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("excitation must be a non-empty 1-D period")
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return len(self.samples)


def dft(x) -> Spectrum:
    """Unitary DFT, ``X[l] = N^-1/2 sum_k x_k exp(-j 2 pi l k / N)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("dft needs a non-empty 1-D sequence")
    return Spectrum(np.fft.fft(x, norm="ortho"))


def idft(spec) -> np.ndarray:
    values = spec.values if isinstance(spec, Spectrum) else np.asarray(spec)
    return np.fft.ifft(values, norm="ortho")


def prbs(register_length: int = 7, amplitude: float = 1.0, seed: int = 1) -> ExcitationSignal:
    """One period of a maximal-length LFSR sequence mapped to +/- amplitude."""
    if register_length not in PRBS_TAPS:
        raise ValueError(f"register_length must be in 2..16, got {register_length}")
    mask = (1 << register_length) - 1
    state = int(seed) & mask
    if state == 0:
        raise ValueError("seed must have a nonzero bit pattern (all-zero state locks the LFSR)")
    taps = PRBS_TAPS[register_length]
    period = mask
    bits = np.empty(period, dtype=np.int8)
    for i in range(period):
        bits[i] = (state >> (register_length - 1)) & 1
        fb = 0
        for t in taps:
            fb ^= (state >> (t - 1)) & 1
        state = ((state << 1) & mask) | fb
    return ExcitationSignal(amplitude * (2.0 * bits - 1.0), kind="prbs")


def periodic_extend(sig, periods: int) -> np.ndarray:
    if periods < 1:
        raise ValueError("periods must be >= 1")
    samples = sig.samples if isinstance(sig, ExcitationSignal) else np.asarray(sig, dtype=float)
    return np.tile(samples, periods)


def write_signal_csv(sig, path) -> None:
    samples = sig.samples if isinstance(sig, ExcitationSignal) else np.asarray(sig)
    with open(path, "w", newline="") as fh:
        fh.write("sample\n")
        for v in samples:
            fh.write(f"{float(v)!r}\n")


def read_signal_csv(path) -> ExcitationSignal:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["sample"]:
        raise ValueError(f"{path}: expected header 'sample'")
    return ExcitationSignal(np.array([float(r[0]) for r in rows[1:] if r]))
