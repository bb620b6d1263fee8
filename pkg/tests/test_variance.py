import numpy as np
import pytest
from scipy.optimize import brentq

from clfreqid import lti, variance as var
from clfreqid.lti import ClosedLoopSystem, TransferFunction
from clfreqid.signals import dft, prbs

from oracles import dft_covariance_oracle, dft_matrix, random_stable_loop

ONE = TransferFunction([1.0])
ZERO = TransferFunction([0.0])


def test_autocovariance_white():
    rho = var.filtered_autocovariance(ONE, 5)
    assert np.allclose(rho, [1, 0, 0, 0, 0])


def test_autocovariance_fir():
    rho = var.filtered_autocovariance(TransferFunction([1.0, 0.5]), 6)
    assert np.allclose(rho, [1.25, 0.5, 0, 0, 0, 0])


def test_autocovariance_ar1_closed_form():
    a = 0.7
    rho = var.filtered_autocovariance(TransferFunction([1.0], [1.0, -a]), 10)
    assert np.allclose(rho, a ** np.arange(10) / (1 - a ** 2), rtol=1e-10)


def test_autocovariance_peak_at_lag_zero(bench_sys):
    rho = var.filtered_autocovariance(bench_sys.transfer("SH"), 127)
    assert np.all(rho[0] >= np.abs(rho))


def test_autocovariance_rejects_unstable():
    with pytest.raises(lti.UnstableLoopError):
        var.filtered_autocovariance(TransferFunction([1.0], [1.0, -1.0]), 4)


def test_crosscovariance_lag_convention():
    # b = a delayed by one sample -> E[a(t+k) b(t)] peaks at k = -1
    x = var.filtered_crosscovariance(ONE, TransferFunction([0.0, 1.0]), 3)
    assert np.allclose(x, [0, 1, 0, 0, 0])


@pytest.mark.parametrize("n", [1, 4, 127])
def test_fejer_white_noise_is_flat(n):
    rho = np.zeros(n)
    rho[0] = 1.0
    assert np.allclose(var.fejer_covariance(rho, n), 1.0)


def test_fejer_matches_matrix_oracle_fir():
    n = 8
    rho = var.filtered_autocovariance(TransferFunction([1.0, 0.5]), n)
    cov = np.array([[rho[abs(i - j)] for j in range(n)] for i in range(n)])
    F = dft_matrix(n)
    oracle = np.real(np.diag(F @ cov @ F.conj().T))
    assert np.max(np.abs(var.fejer_covariance(rho, n) - oracle)) < 1e-12


def test_fejer_matches_lag_sum_definition(rng):
    n = 9
    two = rng.normal(size=2 * n - 1)
    k = np.arange(-(n - 1), n)
    w = 2 * np.pi * np.arange(n) / n
    direct = np.array([np.sum((n - np.abs(k)) / n * two * np.exp(-1j * wl * k)) for wl in w])
    assert np.allclose(var.fejer_covariance(two, n), direct, atol=1e-12)


def test_fejer_converges_to_spectrum():
    tf = TransferFunction([1.0, -0.3], [1.0, -0.8])
    errs = []
    for n in (127, 1016):
        rho = var.filtered_autocovariance(tf, n)
        f = var.fejer_covariance(rho, n)
        w = 2 * np.pi * np.arange(n) / n
        spec = np.abs(lti.evaluate(tf, w)) ** 2
        step = n // 127
        errs.append(np.max(np.abs(f[::step] - spec[::step])))
    assert errs[1] < errs[0] / 4


def test_noise_covariances_open_loop():
    sys = ClosedLoopSystem(TransferFunction([1.0], [1, -0.5]), ZERO, TransferFunction([1.0, 0.4]))
    cov = var.noise_covariances(sys, 16)
    assert np.all(cov.sigma_u == 0) and np.all(cov.sigma_yu == 0)


def test_noise_covariances_benchmark_matrix_oracle(bench_sys):
    cov = var.noise_covariances(bench_sys, 16)
    sy, su, syu = dft_covariance_oracle(bench_sys, 16)
    assert np.max(np.abs(cov.sigma_y - sy)) < 1e-10
    assert np.max(np.abs(cov.sigma_u - su)) < 1e-10
    assert np.max(np.abs(cov.sigma_yu - syu)) < 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_noise_covariances_random_loops(seed):
    sys = random_stable_loop(np.random.default_rng(seed))
    for n in (5, 12):
        cov = var.noise_covariances(sys, n)
        sy, su, syu = dft_covariance_oracle(sys, n, history=600)
        assert np.allclose(cov.sigma_y, sy, atol=1e-10)
        assert np.allclose(cov.sigma_u, su, atol=1e-10)
        assert np.allclose(cov.sigma_yu, syu, atol=1e-10)


def test_cauchy_schwarz_and_nonnegativity(bench_sys):
    cov = var.noise_covariances(bench_sys, 127)
    assert np.all(cov.sigma_y >= 0) and np.all(cov.sigma_u >= 0)
    assert np.all(np.abs(cov.sigma_yu) ** 2 <= cov.sigma_y * cov.sigma_u * (1 + 1e-12))


def test_leakage_free_limits(bench_sys):
    """Large N: covariances approach |SH|^2, |SCH|^2 and -|SH|^2 C*."""
    n = 127 * 16
    cov = var.noise_covariances(bench_sys, n)
    w = cov.omega
    sh2 = np.abs(lti.loop_response(bench_sys, "SH", w)) ** 2
    sch2 = np.abs(lti.loop_response(bench_sys, "SCH", w)) ** 2
    c = lti.evaluate(bench_sys.controller, w)
    assert np.max(np.abs(cov.sigma_y / sh2 - 1)) < 0.02
    assert np.max(np.abs(cov.sigma_u / sch2 - 1)) < 0.02
    assert np.max(np.abs(cov.sigma_yu + sh2 * np.conj(c)) / sh2) < 0.02


@pytest.fixture(scope="module")
def bench_profiles(bench_sys):
    R = dft(prbs(7).samples)
    cov = var.noise_covariances(bench_sys, 127)
    prof = {w: var.asymptotic_variance(bench_sys, R, cov, w) for w in ("dir", "ind", "io2")}
    nl = {w: var.no_leakage_variance(bench_sys, R, w) for w in ("dir", "io2")}
    return R, cov, prof, nl


def test_profiles_open_loop_collapse(rng):
    sys = ClosedLoopSystem(TransferFunction([1.0], [1, -0.5]), ZERO, TransferFunction([1.0, 0.4]))
    R = dft(prbs(5).samples)
    cov = var.noise_covariances(sys, 31)
    vals = [var.asymptotic_variance(sys, R, cov, w).values for w in ("dir", "ind", "io2")]
    expected = cov.sigma_y / np.abs(R.values) ** 2
    for v in vals:
        assert np.allclose(v, expected, rtol=1e-12)


def test_io2_minus_dir_identity(bench_sys, bench_profiles):
    R, cov, prof, _ = bench_profiles
    w = cov.omega
    g = lti.evaluate(bench_sys.plant, w)
    sr2 = np.abs(lti.loop_response(bench_sys, "S", w) * R.values) ** 2
    lhs = prof["io2"].values - prof["dir"].values
    rhs = 2 * np.real(np.conj(g) * cov.sigma_yu) / sr2
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_io2_beats_indirect_where_exact_holds(bench_sys, bench_profiles):
    _, cov, prof, _ = bench_profiles
    pred = var.ordering_predicate(bench_sys, cov)
    assert pred.exact.any() and (~pred.exact).any()
    assert np.all(prof["io2"].values[pred.exact] < prof["ind"].values[pred.exact])
    # contrapositive of the per-frequency identity
    assert np.all((prof["io2"].values >= prof["dir"].values) == ~pred.exact)


def test_approximate_predicate_tracks_exact(bench_sys, bench_profiles):
    _, cov, _, _ = bench_profiles
    pred = var.ordering_predicate(bench_sys, cov)
    assert np.mean(pred.exact == pred.approximate) > 0.95
    assert np.array_equal(pred.approximate, pred.re_cg > 0)


def test_re_gc_switches_sign_between_grid_points(bench_sys, bench_profiles):
    _, cov, _, _ = bench_profiles
    pred = var.ordering_predicate(bench_sys, cov)
    lo, hi = var.first_sign_change(pred.omega, pred.re_cg)
    f = lambda w: lti.loop_response(bench_sys, "GC", np.array([w])).real[0]
    assert lo < brentq(f, lo, hi) < hi


def test_predicates_open_loop():
    sys = ClosedLoopSystem(TransferFunction([1.0], [1, -0.5]), ZERO, ONE)
    pred = var.ordering_predicate(sys, var.noise_covariances(sys, 16))
    assert not pred.exact.any() and not pred.approximate.any()
    assert not (pred.re_cg < 0).any()


def test_no_leakage_ratio(bench_sys, bench_profiles):
    _, cov, _, nl = bench_profiles
    w = cov.omega
    s2 = np.abs(lti.loop_response(bench_sys, "S", w)) ** 2
    cg2 = np.abs(lti.loop_response(bench_sys, "GC", w)) ** 2
    assert np.allclose(nl["io2"].values / nl["dir"].values, s2 * (1 + cg2), rtol=1e-12)


def test_no_leakage_open_loop_etfe():
    sys = ClosedLoopSystem(TransferFunction([1.0], [1, -0.5]), ZERO, ONE)
    R = dft(prbs(4).samples)
    assert np.allclose(var.no_leakage_variance(sys, R, "dir").values, 1 / np.abs(R.values) ** 2)


def test_no_leakage_close_to_exact(bench_profiles):
    _, _, prof, nl = bench_profiles
    for w in ("dir", "io2"):
        gap = np.abs(prof[w].values / nl[w].values - 1)
        assert gap.max() < 0.10


def test_profiles_nonnegative_and_labelled(bench_profiles):
    _, _, prof, nl = bench_profiles
    for p in list(prof.values()) + list(nl.values()):
        assert np.all(p.values >= 0)
        assert p.scale == var.PER_UNIT_SIGMA2
    assert prof["dir"].kind == "asymptotic_dir" and nl["io2"].kind == "no_leakage_io2"


def test_profile_masks_zero_reference(bench_sys):
    R = dft(np.tile(prbs(3).samples, 2))  # odd bins vanish
    cov = var.noise_covariances(bench_sys, 14)
    p = var.asymptotic_variance(bench_sys, R, cov, "dir")
    assert p.valid[::2].all() and not p.valid[1::2].any()
    assert np.isnan(p.values[1::2]).all()


def test_profile_scaling_and_csv(tmp_path, bench_profiles):
    _, _, prof, _ = bench_profiles
    half = prof["dir"].scaled(0.5)
    assert np.allclose(half.values, 0.5 * prof["dir"].values)
    path = tmp_path / "p.csv"
    prof["dir"].to_csv(path)
    lines = path.read_text().splitlines()
    assert "omega,value,kind" in lines and lines[-1].endswith(",asymptotic_dir")


def test_bad_which(bench_sys, bench_profiles):
    R, cov, _, _ = bench_profiles
    with pytest.raises(ValueError):
        var.asymptotic_variance(bench_sys, R, cov, "foo")
    with pytest.raises(ValueError):
        var.no_leakage_variance(bench_sys, R, "ind")
