"""Command-line front end.

    python -m clfreqid simulate --config paper.cfg --out out/
    python -m clfreqid estimate --config paper.cfg out/experiment_0.csv out/experiment_1.csv
    python -m clfreqid theory   --config paper.cfg
    python -m clfreqid mc       --config paper.cfg --runs 2000
    python -m clfreqid report   --config paper.cfg

Exit status: 0 success, 1 configuration or input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import estimators as est
from . import lti, mc, sim, variance
from .config import ConfigError, RunConfig, load_config
from .signals import dft, grid, write_signal_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class NumericalFailure(ArithmeticError):
    pass


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, header: dict, columns: list[str], rows) -> Path:
    lines = [f"# {k}: {v}" for k, v in header.items()]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _routes(cfg: RunConfig):
    exc = cfg.excitation()
    return (exc, None) if cfg.route == "r1" else (None, exc)


def _checked_system(cfg: RunConfig) -> lti.ClosedLoopSystem:
    system = cfg.system()
    system.check()
    return system


def cmd_simulate(cfg: RunConfig) -> list[Path]:
    """One CSV per experiment of a single run (``pairing`` decides how many)."""
    system = _checked_system(cfg)
    out = _out(cfg)
    n_exp = mc.PAIRING_SIZE[cfg.pairing]
    noises = [sim.NoiseConfig(cfg.sigma, cfg.distribution, mc.derive_seed(cfg.base_seed, 0, j))
              for j in range(n_exp)]
    r1, r2 = _routes(cfg)
    records = sim.run_batch(system, r1, r2, noises, cfg.settle_periods, range(n_exp))
    header = cfg.header()
    paths = []
    for rec in records:
        p = out / f"experiment_{rec.experiment_id}.csv"
        sim.record_to_csv(rec, p, {"config_sha256": header["config_sha256"]})
        paths.append(p)
    exc_path = out / "excitation.csv"
    write_signal_csv(cfg.excitation(), exc_path)
    return paths + [exc_path]


def _estimates(cfg: RunConfig, records, system) -> dict:
    names = ["etfe_yr", "etfe_ur", "direct", "indirect", "joint_io"]
    names += [n for n in ("joint_io_two_exp", "geo_direct") if len(records) >= 2]
    names += ["geo_joint_io_two_exp"] if len(records) >= 4 else []
    return {name: mc.estimate_run(records, name, system.controller) for name in names}


def cmd_estimate(cfg: RunConfig, files) -> list[Path]:
    """Every estimator computable from the given experiment files."""
    system = cfg.system()
    out = _out(cfg)
    if not files:
        files = sorted(out.glob("experiment_*.csv"), key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        raise FileNotFoundError("no experiment files given or found in the output directory")
    records = [sim.record_from_csv(f) for f in files]
    for rec in records[1:]:
        if rec.n != records[0].n or not np.array_equal(rec.r, records[0].r):
            raise ValueError("experiment files disagree on the excitation r")
    header = dict(cfg.header())
    header["inputs"] = ",".join(Path(f).name for f in files)
    paths = []
    for name, g in _estimates(cfg, records, system).items():
        p = out / f"estimate_{name}.csv"
        g = est.PlantEstimate(g.values, g.valid, name, g.source_ids)
        g.to_csv(p, header)
        paths.append(p)
    return paths


def _theory(cfg: RunConfig, system, n=None):
    exc = cfg.excitation()
    if cfg.route == "r1":
        R = dft(np.asarray(lti.filter(system.controller, np.tile(exc.samples, cfg.settle_periods + 1)))[-exc.n:])
    else:
        R = dft(exc.samples)
    cov = variance.noise_covariances(system, R.n)
    profiles = {w: variance.asymptotic_variance(system, R, cov, w) for w in ("dir", "ind", "io2")}
    no_leak = {w: variance.no_leakage_variance(system, R, w) for w in ("dir", "io2")}
    return R, cov, profiles, no_leak


def cmd_theory(cfg: RunConfig) -> list[Path]:
    system = _checked_system(cfg)
    out = _out(cfg)
    header = cfg.header()
    _, cov, profiles, no_leak = _theory(cfg, system)
    paths = []
    for prof in list(profiles.values()) + list(no_leak.values()):
        p = out / f"{prof.kind}.csv"
        prof.to_csv(p, header)
        paths.append(p)
    pred = variance.ordering_predicate(system, cov)
    rows = zip(pred.omega, pred.exact, pred.approximate, pred.re_g_syu, pred.re_cg)
    paths.append(_write(out / "ordering.csv", header,
                        ["omega", "exact", "approximate", "re_g_conj_sigma_yu", "re_gc"], rows))
    return paths


def _theory_for(name: str, profiles, R, cov):
    """Per-unit-sigma^2 small-noise variance matching an MC estimator tag."""
    r2 = np.abs(R.values) ** 2
    table = {
        "etfe_yr": cov.sigma_y / r2,
        "etfe_ur": cov.sigma_u / r2,
        "direct": profiles["dir"].values,
        "joint_io": profiles["dir"].values,
        "indirect": profiles["ind"].values,
        "joint_io_two_exp": profiles["io2"].values,
        "geo_direct": 0.5 * profiles["dir"].values,
        "geo_joint_io_two_exp": 0.5 * profiles["io2"].values,
    }
    return table[name]


def _run_mc(cfg: RunConfig, system) -> mc.McResult:
    result = mc.run_mc(system, cfg.excitation(), cfg.mc_config(), cfg.settle_periods, cfg.route)
    for name, st in result.stats.items():
        if not np.any(st.validity):
            raise NumericalFailure(f"estimator {name} masked at every frequency in every run")
    return result


def cmd_mc(cfg: RunConfig) -> list[Path]:
    system = _checked_system(cfg)
    out = _out(cfg)
    R, cov, profiles, _ = _theory(cfg, system)
    result = _run_mc(cfg, system)
    comps = [mc.compare_profiles(result, _theory_for(name, profiles, R, cov), cfg.sigma, name,
                                 cfg.threshold) for name in cfg.estimators]
    header = dict(cfg.header())
    header.update({f"mc_{k}": v for k, v in result.meta.items()})
    p = out / "mc.csv"
    mc.comparison_csv(comps, p, header)
    return [p]


def cmd_report(cfg: RunConfig) -> list[Path]:
    """Figure data: variances (fig2), absolute errors (fig3) and Re[GC] (fig4)."""
    needed = ("geo_direct", "geo_joint_io_two_exp")
    if cfg.pairing != "quad":
        raise ConfigError("report needs [mc] pairing = quad for the geometric two-experiment estimator")
    cfg_run = cfg if set(needed) <= set(cfg.estimators) else \
        replace(cfg, estimators=tuple(dict.fromkeys(cfg.estimators + needed)))
    system = _checked_system(cfg_run)
    out = _out(cfg_run)
    header = dict(cfg_run.header())
    R, cov, profiles, no_leak = _theory(cfg_run, system)
    result = _run_mc(cfg_run, system)
    header.update({f"mc_{k}": v for k, v in result.meta.items()})
    w = grid(R.n)
    s2 = cfg_run.sigma ** 2
    abs_g = np.abs(lti.evaluate(system.plant, w))
    abs_s = np.abs(lti.loop_response(system, "S", w))
    h2 = np.abs(lti.evaluate(system.noise_model, w)) ** 2
    mc_dir = result["geo_direct"].var
    mc_io2 = result["geo_joint_io_two_exp"].var
    half_dir = 0.5 * s2 * profiles["dir"].values
    half_io2 = 0.5 * s2 * profiles["io2"].values
    nl_dir = 0.5 * s2 * no_leak["dir"].values
    nl_io2 = 0.5 * s2 * no_leak["io2"].values
    paths = [
        _write(out / "fig2.csv", header,
               ["omega", "abs_G", "abs_S", "noise_spectrum", "mc_var_geo_direct", "mc_var_geo_io2",
                "half_asym_dir", "half_asym_io2", "half_noleak_dir", "half_noleak_io2",
                "validity_geo_direct", "validity_geo_io2"],
               zip(w, abs_g, abs_s, h2, mc_dir, mc_io2, half_dir, half_io2, nl_dir, nl_io2,
                   result["geo_direct"].validity, result["geo_joint_io_two_exp"].validity)),
        _write(out / "fig3.csv", header,
               ["omega", "absdiff_geo_direct", "absdiff_geo_io2", "absdiff_noleak_geo_direct",
                "absdiff_noleak_geo_io2", "noise_spectrum"],
               zip(w, np.abs(mc_dir - half_dir), np.abs(mc_io2 - half_io2),
                   np.abs(mc_dir - nl_dir), np.abs(mc_io2 - nl_io2), h2)),
    ]
    wf = np.linspace(0.0, np.pi, cfg_run.fig4_points)
    re_gc = np.real(lti.loop_response(system, "GC", wf))
    paths.append(_write(out / "fig4.csv", header, ["omega", "re_GC"], zip(wf, re_gc)))
    return paths


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clfreqid", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "estimate", "theory", "report", "mc"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="run configuration (INI); 'paper.cfg' is bundled")
        sp.add_argument("--out", help="output directory (overrides [output] directory)")
        sp.add_argument("--runs", type=int, help="override [mc] runs")
        sp.add_argument("--sigma", type=float, help="override [noise] sigma")
        sp.add_argument("--seed", type=int, help="override [noise] base_seed")
        if name == "estimate":
            sp.add_argument("files", nargs="*", help="experiment CSVs (default: experiment_*.csv in --out)")
    return p


COMMANDS = {"simulate": cmd_simulate, "theory": cmd_theory, "report": cmd_report, "mc": cmd_mc}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(args.runs, args.sigma, args.seed, args.out)
        if args.command == "estimate":
            paths = cmd_estimate(cfg, [Path(f) for f in args.files])
        else:
            paths = COMMANDS[args.command](cfg)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (lti.UnstableLoopError, lti.PoleOnCircleError, NumericalFailure, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
