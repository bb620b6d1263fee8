"""Monte Carlo harness for the closed-loop estimators.

Each run simulates 1, 2 or 4 experiments that share the excitation and have
independent innovations. Per-frequency statistics are accumulated over the
runs that survive the denominator floor at that frequency.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import estimators as est
from . import sim
from .lti import ClosedLoopSystem
from .signals import grid

PAIRING_SIZE = {"single": 1, "paired": 2, "quad": 4}

# estimator tag -> experiments it needs
ESTIMATOR_EXPERIMENTS = {
    "etfe_yr": 1,
    "etfe_ur": 1,
    "direct": 1,
    "indirect": 1,
    "joint_io": 1,
    "joint_io_two_exp": 2,
    "geo_direct": 2,
    "geo_joint_io_two_exp": 4,
}

SEED_SCHEME = "numpy.SeedSequence([base_seed, run, experiment]).generate_state(1, uint64)"


def derive_seed(base_seed: int, run: int, experiment: int) -> int:
    ss = np.random.SeedSequence([int(base_seed), int(run), int(experiment)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class McConfig:
    runs: int
    sigma: float
    base_seed: int = 0
    estimators: tuple = ("direct", "joint_io_two_exp")
    pairing: str = "paired"
    distribution: str = "gaussian"
    chunk_size: int = 250
    workers: int = 1

    def __post_init__(self):
        if self.runs < 2:
            raise ValueError("runs must be >= 2")
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if self.pairing not in PAIRING_SIZE:
            raise ValueError(f"pairing must be one of {sorted(PAIRING_SIZE)}")
        for name in self.estimators:
            if name not in ESTIMATOR_EXPERIMENTS:
                raise ValueError(f"unknown estimator {name!r}")
            if ESTIMATOR_EXPERIMENTS[name] > self.experiments:
                raise ValueError(f"estimator {name!r} needs pairing with "
                                 f"{ESTIMATOR_EXPERIMENTS[name]} experiments per run")
        object.__setattr__(self, "estimators", tuple(self.estimators))

    @property
    def experiments(self) -> int:
        return PAIRING_SIZE[self.pairing]


def estimate_run(records, name: str, controller=None) -> est.PlantEstimate:
    """Apply estimator ``name`` to the records of one Monte Carlo run."""
    if name == "etfe_yr":
        return est.etfe(records[0], "y")
    if name == "etfe_ur":
        return est.etfe(records[0], "u")
    if name == "direct":
        return est.direct(records[0])
    if name == "joint_io":
        return est.joint_io(records[0])
    if name == "indirect":
        return est.indirect(records[0], controller)
    if name == "joint_io_two_exp":
        return est.joint_io_two_experiments(records[0], records[1])
    if name == "geo_direct":
        return est.geometric_average(est.direct(records[0]), est.direct(records[1]))
    if name == "geo_joint_io_two_exp":
        return est.geometric_average(est.joint_io_two_experiments(records[0], records[2]),
                                     est.joint_io_two_experiments(records[1], records[3]))
    raise ValueError(f"unknown estimator {name!r}")


@dataclass
class _Moments:
    """Per-frequency count, mean and sum of squared deviations over valid runs."""

    count: np.ndarray
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def from_samples(cls, values: np.ndarray, valid: np.ndarray) -> _Moments:
        count = valid.sum(axis=0)
        x = np.where(valid, values, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(count > 0, x.sum(axis=0) / np.maximum(count, 1), 0.0)
        dev = np.where(valid, np.abs(values - mean) ** 2, 0.0)
        return cls(count, mean, dev.sum(axis=0))

    def merge(self, other: _Moments) -> _Moments:
        # Chan et al. pairwise update
        n = self.count + other.count
        safe = np.maximum(n, 1)
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / safe
        m2 = self.m2 + other.m2 + np.abs(delta) ** 2 * self.count * other.count / safe
        return _Moments(n, np.where(n > 0, mean, 0.0), m2)


@dataclass(frozen=True, eq=False)
class EstimatorStats:
    mean: np.ndarray
    var: np.ndarray
    validity: np.ndarray


@dataclass(frozen=True, eq=False)
class McResult:
    n: int
    runs: int
    sigma: float
    stats: dict
    meta: dict = field(default_factory=dict)

    @property
    def omega(self) -> np.ndarray:
        return grid(self.n)

    def __getitem__(self, name: str) -> EstimatorStats:
        return self.stats[name]


def _seeds(mc: McConfig) -> np.ndarray:
    seeds = np.array([[derive_seed(mc.base_seed, i, j) for j in range(mc.experiments)]
                      for i in range(mc.runs)], dtype=np.uint64)
    if len(np.unique(seeds)) != seeds.size:
        raise ValueError("derived seeds collide; choose another base_seed")
    return seeds


def _chunk_moments(sys, r1, r2, mc, seeds, settle_periods):
    runs, n_exp = seeds.shape
    noises = [sim.NoiseConfig(mc.sigma, mc.distribution, int(s)) for s in seeds.ravel()]
    records = sim.run_batch(sys, r1, r2, noises, settle_periods,
                            experiment_ids=range(len(noises)))
    out = {}
    for name in mc.estimators:
        ests = [estimate_run(records[i * n_exp:(i + 1) * n_exp], name, sys.controller)
                for i in range(runs)]
        values = np.stack([e.values for e in ests])
        valid = np.stack([e.valid for e in ests])
        out[name] = _Moments.from_samples(values, valid)
    return out


def run_mc(sys: ClosedLoopSystem, excitation, mc: McConfig,
           settle_periods: int = sim.DEFAULT_SETTLE_PERIODS, route: str = "r2") -> McResult:
    """Sample mean and variance (``1/(count-1)``) of each estimator per frequency."""
    sys.check()
    if route not in ("r1", "r2"):
        raise ValueError("route must be 'r1' or 'r2'")
    r1, r2 = (excitation, None) if route == "r1" else (None, excitation)
    n = excitation.n
    seeds = _seeds(mc)
    chunks = [seeds[i:i + mc.chunk_size] for i in range(0, mc.runs, mc.chunk_size)]

    def work(chunk):
        return _chunk_moments(sys, r1, r2, mc, chunk, settle_periods)

    if mc.workers > 1:
        with ThreadPoolExecutor(mc.workers) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]

    stats = {}
    for name in mc.estimators:
        acc = parts[0][name]
        for p in parts[1:]:
            acc = acc.merge(p[name])
        with np.errstate(invalid="ignore", divide="ignore"):
            v = np.where(acc.count > 1, acc.m2 / np.maximum(acc.count - 1, 1), np.nan)
        stats[name] = EstimatorStats(np.where(acc.count > 0, acc.mean, np.nan + 0j), v, acc.count)
    meta = {"runs": mc.runs, "sigma": repr(float(mc.sigma)), "base_seed": mc.base_seed,
            "seed_scheme": SEED_SCHEME, "pairing": mc.pairing, "distribution": mc.distribution,
            "settle_periods": settle_periods, "variance_normalisation": "1/(valid_runs-1)"}
    return McResult(n, mc.runs, float(mc.sigma), stats, meta)


@dataclass(frozen=True, eq=False)
class ProfileComparison:
    omega: np.ndarray
    estimator: str
    mc_var: np.ndarray
    theory_var: np.ndarray
    abs_diff: np.ndarray
    rel_diff: np.ndarray
    validity: np.ndarray
    flagged: np.ndarray

    def rows(self):
        for i in range(len(self.omega)):
            yield (self.omega[i], self.estimator, self.mc_var[i], self.theory_var[i],
                   self.abs_diff[i], self.rel_diff[i], int(self.validity[i]))


def compare_profiles(result: McResult, theory, sigma: float, estimator: str | None = None,
                     threshold: float = 0.25) -> ProfileComparison:
    """MC sample variance against ``sigma^2 * theory`` per frequency.

    ``theory`` is a :class:`~clfreqid.variance.VarianceProfile` (per unit
    sigma^2) or a plain array.
    """
    if estimator is None:
        if len(result.stats) != 1:
            raise ValueError("result holds several estimators; name one")
        estimator = next(iter(result.stats))
    values = getattr(theory, "values", theory)
    values = np.asarray(values, dtype=float)
    if len(values) != result.n:
        raise ValueError(f"grid mismatch: result has {result.n} bins, theory has {len(values)}")
    st = result[estimator]
    th = sigma ** 2 * values
    abs_diff = np.abs(st.var - th)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = abs_diff / np.abs(th)
    flagged = ~(rel <= threshold)
    return ProfileComparison(result.omega, estimator, st.var, th, abs_diff, rel, st.validity, flagged)


def comparison_csv(comparisons, path=None, header: dict | None = None) -> str:
    lines = [f"# {k}: {v}" for k, v in (header or {}).items()]
    lines.append("omega,estimator,mc_var,theory_var,abs_diff,rel_diff,validity")
    for comp in comparisons:
        for w, name, m, t, a, r, c in comp.rows():
            lines.append(f"{float(w)!r},{name},{float(m)!r},{float(t)!r},{float(a)!r},{float(r)!r},{c}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
