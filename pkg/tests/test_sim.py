import numpy as np
import pytest

from clfreqid import lti, sim
from clfreqid.lti import ClosedLoopSystem, TransferFunction
from clfreqid.signals import dft, prbs
from clfreqid.sim import NoiseConfig, run_experiment, run_paired_experiments


def test_noise_free_record_matches_closed_loop_response(clean_record, bench_sys, omega127):
    R = dft(clean_record.r).values
    assert np.max(np.abs(dft(clean_record.y).values / R - lti.loop_response(bench_sys, "SG", omega127))) < 1e-6
    assert np.max(np.abs(dft(clean_record.u).values / R - lti.loop_response(bench_sys, "S", omega127))) < 1e-6


def test_record_shape_and_metadata(bench_sys, excitation):
    rec = run_experiment(bench_sys, None, excitation, NoiseConfig(0.1, seed=5), settle_periods=3,
                         experiment_id=7)
    assert rec.n == 127 and rec.u.shape == rec.y.shape == rec.r.shape
    assert rec.sigma == 0.1 and rec.seed == 5 and rec.experiment_id == 7
    assert np.array_equal(rec.r, excitation.samples)


def test_no_plant_breaks_loop(excitation):
    sys = ClosedLoopSystem(TransferFunction([0.0]), TransferFunction([0.0, 1.0, -0.8]), TransferFunction([1.0]))
    rec = run_experiment(sys, None, excitation, NoiseConfig(0.0))
    assert np.all(rec.y == 0.0)
    assert np.array_equal(rec.u, excitation.samples)


def test_determinism(bench_sys, excitation):
    a = run_experiment(bench_sys, None, excitation, NoiseConfig(0.1, seed=3), settle_periods=5)
    b = run_experiment(bench_sys, None, excitation, NoiseConfig(0.1, seed=3), settle_periods=5)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.u, b.u)


def test_r1_routing_stores_filtered_reference(bench_sys, excitation):
    rec = run_experiment(bench_sys, excitation, None, NoiseConfig(0.0), settle_periods=30)
    c_r1 = lti.filter(bench_sys.controller, np.tile(excitation.samples, 31))[-127:]
    assert np.allclose(rec.r, c_r1)
    # r = C r1 drives the same closed-loop maps
    w = 2 * np.pi * np.arange(127) / 127
    ratio = dft(rec.u).values / dft(rec.r).values
    assert np.max(np.abs(ratio - lti.loop_response(bench_sys, "S", w))) < 1e-6


def test_loop_equations_hold_with_noise(bench_sys, excitation):
    """y - S G r and u - S r are S v and -S C v, the block-diagram noise paths."""
    noise = NoiseConfig(0.1, seed=9)
    settle = 40
    rec = run_experiment(bench_sys, None, excitation, noise, settle_periods=settle)
    total = (settle + 1) * 127
    v = 0.1 * lti.filter(bench_sys.noise_model, noise.innovations(total))
    vy = lti.filter(bench_sys.transfer("SH"), 0.1 * noise.innovations(total))[-127:]
    vu = lti.filter(-bench_sys.transfer("SCH"), 0.1 * noise.innovations(total))[-127:]
    clean = run_experiment(bench_sys, None, excitation, NoiseConfig(0.0), settle_periods=settle)
    assert np.allclose(rec.y - clean.y, vy, atol=1e-10)
    assert np.allclose(rec.u - clean.u, vu, atol=1e-10)
    assert v.shape == (total,)


def test_noise_path_is_linear_in_sigma(bench_sys, excitation):
    clean = run_experiment(bench_sys, None, excitation, NoiseConfig(0.0, seed=4), settle_periods=5)
    d1 = run_experiment(bench_sys, None, excitation, NoiseConfig(0.1, seed=4), settle_periods=5).y - clean.y
    d2 = run_experiment(bench_sys, None, excitation, NoiseConfig(0.3, seed=4), settle_periods=5).y - clean.y
    assert np.allclose(d2, 3.0 * d1, rtol=1e-9, atol=1e-12)


def test_settling_improves_geometrically(bench_sys, excitation, omega127):
    sg = lti.loop_response(bench_sys, "SG", omega127)
    errs = []
    for settle in (1, 2, 3):
        rec = run_experiment(bench_sys, None, excitation, NoiseConfig(0.0), settle_periods=settle)
        errs.append(np.max(np.abs(dft(rec.y).values / dft(rec.r).values - sg)))
    pole = np.max(np.abs(lti.polyroots(bench_sys.char_poly())))
    for a, b in zip(errs, errs[1:]):
        assert b <= a * max(pole, 0.0) ** 127 * 10 or b < 1e-12


@pytest.mark.parametrize("dist", sim.DISTRIBUTIONS)
def test_innovations_unit_variance(dist):
    e = NoiseConfig(1.0, dist, seed=1).innovations(200_000)
    assert abs(e.mean()) < 0.01
    assert e.std() == pytest.approx(1.0, rel=0.01)


def test_noise_config_validation():
    with pytest.raises(ValueError):
        NoiseConfig(-1.0)
    with pytest.raises(ValueError):
        NoiseConfig(1.0, "cauchy")


def test_unstable_loop_rejected(excitation):
    sys = ClosedLoopSystem(TransferFunction([0.0, 2.0]), TransferFunction([-1.0]), TransferFunction([1.0]))
    with pytest.raises(lti.UnstableLoopError):
        run_experiment(sys, None, excitation, NoiseConfig(0.0))


def test_errors_on_bad_excitation(bench_sys):
    with pytest.raises(ValueError):
        run_experiment(bench_sys, None, None, NoiseConfig(0.0))
    with pytest.raises(ValueError):
        run_experiment(bench_sys, prbs(3), prbs(4), NoiseConfig(0.0))
    with pytest.raises(ValueError):
        run_experiment(bench_sys, None, prbs(3), NoiseConfig(0.0), settle_periods=0)


def test_paired_experiments(bench_sys, excitation):
    a, b = run_paired_experiments(bench_sys, None, excitation, NoiseConfig(0.0, seed=1), NoiseConfig(0.0, seed=2))
    assert np.array_equal(a.y, b.y) and np.array_equal(a.u, b.u)
    a, b = run_paired_experiments(bench_sys, None, excitation, NoiseConfig(0.1, seed=1), NoiseConfig(0.1, seed=2))
    assert np.array_equal(a.r, b.r)
    assert not np.array_equal(a.y, b.y)
    with pytest.raises(ValueError):
        run_paired_experiments(bench_sys, None, excitation, NoiseConfig(0.1, seed=1), NoiseConfig(0.1, seed=1))


def test_paired_noise_is_independent(bench_sys, excitation):
    noises = []
    for i in range(500):
        noises += [NoiseConfig(0.1, seed=2 * i + 1000), NoiseConfig(0.1, seed=2 * i + 1001)]
    recs = sim.run_batch(bench_sys, None, excitation, noises, settle_periods=5)
    clean = run_experiment(bench_sys, None, excitation, NoiseConfig(0.0), settle_periods=5)
    ya = np.array([r.y - clean.y for r in recs[0::2]])
    yb = np.array([r.y - clean.y for r in recs[1::2]])
    for k in (0, 60, 126):
        assert abs(np.corrcoef(ya[:, k], yb[:, k])[0, 1]) < 0.1


def test_record_csv_round_trip(tmp_path, bench_sys, excitation):
    rec = run_experiment(bench_sys, None, excitation, NoiseConfig(0.1, seed=42), settle_periods=3,
                         experiment_id=3)
    path = tmp_path / "e.csv"
    sim.record_to_csv(rec, path)
    text = path.read_text().splitlines()
    assert "# N: 127" in text and "k,r,u,y" in text
    back = sim.record_from_csv(path)
    assert np.array_equal(back.y, rec.y) and np.array_equal(back.u, rec.u) and np.array_equal(back.r, rec.r)
    assert (back.sigma, back.seed, back.experiment_id) == (0.1, 42, 3)


def test_record_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# N: 1\nk,y\n0,1\n")
    with pytest.raises(ValueError):
        sim.record_from_csv(path)
