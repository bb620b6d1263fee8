"""Steady-state simulation of the feedback loop

    u(k) = C(q) (r1(k) - y(k)) + r2(k)
    y(k) = G(q) u(k) + v(k),      v = sigma H(q) e

stepped sample by sample so that ``y = S G r + S v`` and ``u = S r - S C v``
come out of the block diagram rather than being imposed.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import lti
from .lti import ClosedLoopSystem, TransferFunction
from .signals import ExcitationSignal, periodic_extend

DEFAULT_SETTLE_PERIODS = 50
DISTRIBUTIONS = ("gaussian", "uniform", "laplace")


@dataclass(frozen=True)
class NoiseConfig:
    sigma: float = 0.0
    distribution: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0.0:
            raise ValueError("sigma must be >= 0")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")

    def innovations(self, length: int) -> np.ndarray:
        """Zero-mean, unit-variance white sequence (not yet scaled by sigma)."""
        rng = np.random.default_rng(self.seed)
        if self.distribution == "gaussian":
            return rng.standard_normal(length)
        if self.distribution == "uniform":
            return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), length)
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0), length)


@dataclass(frozen=True, eq=False)
class ExperimentRecord:
    r: np.ndarray
    u: np.ndarray
    y: np.ndarray
    sigma: float = 0.0
    seed: int = 0
    experiment_id: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        r, u, y = (np.asarray(a, dtype=float) for a in (self.r, self.u, self.y))
        if not (r.shape == u.shape == y.shape) or r.ndim != 1:
            raise ValueError("r, u, y must be 1-D arrays of equal length")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return len(self.r)


class _Stepper:
    """Transposed direct-form II state for a batch of identical filters."""

    def __init__(self, tf: TransferFunction, batch: int):
        order = max(len(tf.num), len(tf.den))
        self.b = np.zeros(order)
        self.a = np.zeros(order)
        self.b[: len(tf.num)] = tf.num / tf.den[0]
        self.a[: len(tf.den)] = tf.den / tf.den[0]
        self.z = np.zeros((order - 1, batch))

    @property
    def feedthrough(self) -> float:
        return self.b[0]

    def free(self):
        """Part of the current output that does not depend on the current input."""
        return self.z[0] if len(self.z) else 0.0

    def update(self, x, out) -> None:
        if not len(self.z):
            return
        z = self.z
        z[:-1] = z[1:]
        z[-1] = 0.0
        z += np.outer(self.b[1:], x) - np.outer(self.a[1:], out)


def simulate_loop(sys: ClosedLoopSystem, r1, r2, v):
    """Run the loop from rest over full-length signals.

    ``r1`` and ``r2`` have shape ``(T,)``; ``v`` has shape ``(T,)`` or
    ``(batch, T)``. Returns ``(u, y)`` shaped like ``v``.
    """
    v = np.asarray(v, dtype=float)
    squeeze = v.ndim == 1
    v2 = np.atleast_2d(v)
    batch, length = v2.shape
    g = _Stepper(sys.plant, batch)
    c = _Stepper(sys.controller, batch)
    g0, c0 = g.feedthrough, c.feedthrough
    denom = 1.0 + c0 * g0
    if abs(denom) < 1e-12:
        raise lti.UnstableLoopError("ill-posed loop: 1 + g0 c0 = 0")
    u = np.empty((length, batch))
    y = np.empty((length, batch))
    vt = np.ascontiguousarray(v2.T)
    for k in range(length):
        gp = g.free()
        cp = c.free()
        # u = c0 (r1 - g0 u - gp - v) + cp + r2, solved for u
        uk = (c0 * (r1[k] - gp - vt[k]) + cp + r2[k]) / denom
        yk = g0 * uk + gp + vt[k]
        g.update(uk, yk - vt[k])
        c.update(r1[k] - yk, uk - r2[k])
        u[k] = uk
        y[k] = yk
    u, y = u.T, y.T
    return (u[0], y[0]) if squeeze else (u, y)


def _period_samples(sig, n: int | None) -> np.ndarray | None:
    if sig is None:
        return None
    if isinstance(sig, ExcitationSignal):
        return sig.samples
    return np.asarray(sig, dtype=float)


def _prepare(sys, r1, r2, settle_periods):
    sys.check()
    if settle_periods < 1:
        raise ValueError("settle_periods must be >= 1")
    p1, p2 = _period_samples(r1, None), _period_samples(r2, None)
    if p1 is None and p2 is None:
        raise ValueError("at least one of r1, r2 must be given")
    n = len(p1) if p1 is not None else len(p2)
    if n == 0:
        raise ValueError("zero-length excitation")
    if p1 is None:
        p1 = np.zeros(n)
    if p2 is None:
        p2 = np.zeros(n)
    if len(p1) != len(p2):
        raise ValueError("r1 and r2 must share the period N")
    periods = settle_periods + 1
    r1e = periodic_extend(p1, periods)
    r2e = periodic_extend(p2, periods)
    r_full = r2e + lti.filter(sys.controller, r1e)
    return n, r1e, r2e, r_full[-n:]


def noise_realisations(sys: ClosedLoopSystem, noises, length: int) -> np.ndarray:
    """``sigma H e`` for each NoiseConfig, stacked as ``(len(noises), length)``."""
    e = np.stack([nc.sigma * nc.innovations(length) for nc in noises])
    return lti.filter(sys.noise_model, e)


def run_batch(sys: ClosedLoopSystem, r1, r2, noises, settle_periods=DEFAULT_SETTLE_PERIODS,
              experiment_ids=None) -> list[ExperimentRecord]:
    """Simulate several experiments sharing the excitation in one vectorised pass."""
    n, r1e, r2e, r_last = _prepare(sys, r1, r2, settle_periods)
    v = noise_realisations(sys, noises, len(r1e))
    u, y = simulate_loop(sys, r1e, r2e, v)
    if experiment_ids is None:
        experiment_ids = range(len(noises))
    return [
        ExperimentRecord(r_last.copy(), u[i, -n:], y[i, -n:], sigma=nc.sigma, seed=nc.seed,
                         experiment_id=int(eid),
                         meta={"distribution": nc.distribution, "settle_periods": settle_periods})
        for i, (nc, eid) in enumerate(zip(noises, experiment_ids))
    ]


def run_experiment(sys: ClosedLoopSystem, r1, r2, noise: NoiseConfig,
                   settle_periods: int = DEFAULT_SETTLE_PERIODS, experiment_id: int = 0) -> ExperimentRecord:
    """One steady-state period of ``(r, u, y)`` after ``settle_periods`` warm-up periods."""
    return run_batch(sys, r1, r2, [noise], settle_periods, [experiment_id])[0]


def run_paired_experiments(sys, r1, r2, noise_a: NoiseConfig, noise_b: NoiseConfig,
                           settle_periods: int = DEFAULT_SETTLE_PERIODS):
    """Two experiments with the same excitation and independent noise streams."""
    if noise_a.seed == noise_b.seed:
        raise ValueError("paired experiments need distinct noise seeds")
    a, b = run_batch(sys, r1, r2, [noise_a, noise_b], settle_periods, [0, 1])
    return a, b


def record_to_csv(rec: ExperimentRecord, path=None, extra_meta: dict | None = None) -> str:
    """CSV with a ``# key: value`` metadata block and columns ``k,r,u,y``."""
    buf = io.StringIO()
    meta = {"N": rec.n, "sigma": repr(float(rec.sigma)), "seed": rec.seed,
            "experiment_id": rec.experiment_id}
    meta.update(rec.meta)
    meta.update(extra_meta or {})
    for key, val in meta.items():
        buf.write(f"# {key}: {val}\n")
    buf.write("k,r,u,y\n")
    for k in range(rec.n):
        buf.write(f"{k},{float(rec.r[k])!r},{float(rec.u[k])!r},{float(rec.y[k])!r}\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def record_from_csv(path) -> ExperimentRecord:
    meta: dict[str, str] = {}
    rows = []
    with open(path) as fh:
        header_seen = False
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
            elif not header_seen:
                if line != "k,r,u,y":
                    raise ValueError(f"{path}: expected header 'k,r,u,y', got {line!r}")
                header_seen = True
            else:
                rows.append([float(x) for x in line.split(",")])
    data = np.array(rows).reshape(-1, 4)
    if "N" in meta and int(meta["N"]) != len(data):
        raise ValueError(f"{path}: metadata N={meta['N']} but {len(data)} rows")
    known = {"N", "sigma", "seed", "experiment_id"}
    return ExperimentRecord(
        data[:, 1], data[:, 2], data[:, 3],
        sigma=float(meta.get("sigma", 0.0)),
        seed=int(meta.get("seed", 0)),
        experiment_id=int(meta.get("experiment_id", 0)),
        meta={k: v for k, v in meta.items() if k not in known},
    )
