"""INI-style run configuration.

Example (see ``configs/paper.cfg``)::

    [plant]
    num = 1
    den = 1, -1.6, 0.89

    [noise]
    sigma = 0.1
"""

from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

from . import mc as mc_mod
from .lti import ClosedLoopSystem, TransferFunction
from .sim import DISTRIBUTIONS
from .signals import PRBS_TAPS, ExcitationSignal, prbs, read_signal_csv

KNOWN = {
    "plant": {"num", "den"},
    "controller": {"num", "den"},
    "noise_model": {"num", "den"},
    "excitation": {"kind", "register_length", "amplitude", "seed", "route", "file"},
    "noise": {"sigma", "distribution", "base_seed"},
    "mc": {"runs", "pairing", "chunk_size", "workers"},
    "estimators": {"list"},
    "simulation": {"settle_periods"},
    "output": {"directory"},
    "report": {"fig4_points", "threshold"},
}


class ConfigError(ValueError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    plant: tuple = ((1.0,), (1.0, -1.6, 0.89))
    controller: tuple = ((0.0, 1.0, -0.8), (1.0,))
    noise_model: tuple = ((1.0, -1.56, 1.045, -0.3338), (1.0, -2.35, 2.09, -0.6675))
    excitation_kind: str = "prbs"
    register_length: int = 7
    amplitude: float = 1.0
    prbs_seed: int = 1
    route: str = "r2"
    excitation_file: str = ""
    sigma: float = 0.1
    distribution: str = "gaussian"
    base_seed: int = 0
    runs: int = 10000
    pairing: str = "quad"
    chunk_size: int = 500
    workers: int = 1
    estimators: tuple = ("geo_direct", "geo_joint_io_two_exp")
    settle_periods: int = 50
    output_dir: str = "out"
    fig4_points: int = 2048
    threshold: float = 0.25
    source: str = field(default="", compare=False)

    def system(self) -> ClosedLoopSystem:
        return ClosedLoopSystem(TransferFunction(*self.plant), TransferFunction(*self.controller),
                                TransferFunction(*self.noise_model))

    def excitation(self) -> ExcitationSignal:
        if self.excitation_kind == "prbs":
            return prbs(self.register_length, self.amplitude, self.prbs_seed)
        return read_signal_csv(self.excitation_file)

    def mc_config(self) -> mc_mod.McConfig:
        return mc_mod.McConfig(self.runs, self.sigma, self.base_seed, self.estimators, self.pairing,
                               self.distribution, self.chunk_size, self.workers)

    def settings(self) -> dict:
        d = asdict(self)
        d.pop("source")
        d.pop("output_dir")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.settings(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def header(self) -> dict:
        """Metadata block written at the top of every output CSV."""
        h = {"config_sha256": self.digest()}
        for k, v in self.settings().items():
            h[k] = json.dumps(v) if isinstance(v, (tuple, list)) else v
        return h

    def with_overrides(self, runs=None, sigma=None, seed=None, output_dir=None) -> RunConfig:
        kw = {}
        if runs is not None:
            kw["runs"] = runs
        if sigma is not None:
            kw["sigma"] = sigma
        if seed is not None:
            kw["base_seed"] = seed
        if output_dir is not None:
            kw["output_dir"] = str(output_dir)
        cfg = replace(self, **kw)
        _validate(cfg, None, {})
        return cfg


def bundled_config(name: str = "paper.cfg") -> Path:
    return Path(str(resources.files("clfreqid") / "configs" / name))


def _line_index(text: str) -> dict:
    """(section, key) -> 1-based line number; (section, None) for headers."""
    index = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            index[(section, None)] = i
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            index[(section, m.group(1).strip().lower())] = i
    return index


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        bundled = bundled_config(path.name)
        if bundled.exists() and path.parent == Path("."):
            path = bundled
        else:
            raise ConfigError("file not found", path)
    text = path.read_text()
    return parse_config(text, str(path))


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], source, line) from None
    lines = _line_index(text)

    def fail(msg, section, key=None):
        raise ConfigError(msg, source, lines.get((section, key)) or lines.get((section, None)))

    for section in parser.sections():
        if section not in KNOWN:
            fail(f"unknown section [{section}]", section)
        for key in parser[section]:
            if key not in KNOWN[section]:
                fail(f"unknown key '{key}' in [{section}]", section, key)

    def get(section, key, conv, default):
        if not parser.has_option(section, key):
            return default
        raw = parser.get(section, key)
        try:
            return conv(raw)
        except (TypeError, ValueError):
            fail(f"[{section}] {key} = {raw!r} is not a valid {conv.__name__}", section, key)

    def coeffs(raw):
        vals = tuple(float(x) for x in raw.replace(";", ",").split(",") if x.strip())
        if not vals:
            raise ValueError
        return vals

    coeffs.__name__ = "coefficient list"

    def names(raw):
        return tuple(x.strip() for x in raw.split(",") if x.strip())

    names.__name__ = "name list"

    base = RunConfig()
    kw = {"source": source}
    for tf in ("plant", "controller", "noise_model"):
        d_num, d_den = getattr(base, tf)
        num = get(tf, "num", coeffs, d_num)
        den = get(tf, "den", coeffs, d_den)
        if den[0] == 0.0:
            fail(f"[{tf}] den[0] must be nonzero", tf, "den")
        kw[tf] = (num, den)
    kw["excitation_kind"] = get("excitation", "kind", str, base.excitation_kind)
    kw["register_length"] = get("excitation", "register_length", int, base.register_length)
    kw["amplitude"] = get("excitation", "amplitude", float, base.amplitude)
    kw["prbs_seed"] = get("excitation", "seed", int, base.prbs_seed)
    kw["route"] = get("excitation", "route", str, base.route)
    kw["excitation_file"] = get("excitation", "file", str, base.excitation_file)
    kw["sigma"] = get("noise", "sigma", float, base.sigma)
    kw["distribution"] = get("noise", "distribution", str, base.distribution)
    kw["base_seed"] = get("noise", "base_seed", int, base.base_seed)
    kw["runs"] = get("mc", "runs", int, base.runs)
    kw["pairing"] = get("mc", "pairing", str, base.pairing)
    kw["chunk_size"] = get("mc", "chunk_size", int, base.chunk_size)
    kw["workers"] = get("mc", "workers", int, base.workers)
    kw["estimators"] = get("estimators", "list", names, base.estimators)
    kw["settle_periods"] = get("simulation", "settle_periods", int, base.settle_periods)
    kw["output_dir"] = get("output", "directory", str, base.output_dir)
    kw["fig4_points"] = get("report", "fig4_points", int, base.fig4_points)
    kw["threshold"] = get("report", "threshold", float, base.threshold)
    cfg = RunConfig(**kw)
    _validate(cfg, fail, lines)
    return cfg


_FIELD_LOCATION = {
    "excitation_kind": ("excitation", "kind"), "register_length": ("excitation", "register_length"),
    "amplitude": ("excitation", "amplitude"), "prbs_seed": ("excitation", "seed"),
    "route": ("excitation", "route"), "excitation_file": ("excitation", "file"),
    "sigma": ("noise", "sigma"), "distribution": ("noise", "distribution"),
    "runs": ("mc", "runs"), "pairing": ("mc", "pairing"), "chunk_size": ("mc", "chunk_size"),
    "workers": ("mc", "workers"), "estimators": ("estimators", "list"),
    "settle_periods": ("simulation", "settle_periods"), "fig4_points": ("report", "fig4_points"),
}


def _validate(cfg: RunConfig, fail, lines) -> None:
    if fail is None:
        def fail(msg, section, key=None):
            raise ConfigError(msg, cfg.source or None)

    def bad(name, msg):
        fail(msg, *_FIELD_LOCATION[name])

    if cfg.excitation_kind not in ("prbs", "csv"):
        bad("excitation_kind", "[excitation] kind must be 'prbs' or 'csv'")
    if cfg.excitation_kind == "prbs" and cfg.register_length not in PRBS_TAPS:
        bad("register_length", "[excitation] register_length must be in 2..16")
    if cfg.excitation_kind == "prbs" and cfg.prbs_seed % (1 << cfg.register_length) == 0:
        bad("prbs_seed", "[excitation] seed must have a nonzero bit pattern")
    if cfg.excitation_kind == "csv" and not cfg.excitation_file:
        bad("excitation_file", "[excitation] file is required when kind = csv")
    if cfg.route not in ("r1", "r2"):
        bad("route", "[excitation] route must be 'r1' or 'r2'")
    if not cfg.sigma >= 0:
        bad("sigma", "[noise] sigma must be >= 0")
    if cfg.distribution not in DISTRIBUTIONS:
        bad("distribution", f"[noise] distribution must be one of {', '.join(DISTRIBUTIONS)}")
    if cfg.runs < 2:
        bad("runs", "[mc] runs must be >= 2")
    if cfg.pairing not in mc_mod.PAIRING_SIZE:
        bad("pairing", "[mc] pairing must be single, paired or quad")
    if cfg.chunk_size < 1:
        bad("chunk_size", "[mc] chunk_size must be >= 1")
    if cfg.workers < 1:
        bad("workers", "[mc] workers must be >= 1")
    for name in cfg.estimators:
        if name not in mc_mod.ESTIMATOR_EXPERIMENTS:
            bad("estimators", f"[estimators] unknown estimator '{name}'")
        if cfg.pairing in mc_mod.PAIRING_SIZE and \
                mc_mod.ESTIMATOR_EXPERIMENTS[name] > mc_mod.PAIRING_SIZE[cfg.pairing]:
            bad("estimators", f"[estimators] '{name}' needs more experiments than pairing '{cfg.pairing}'")
    if cfg.settle_periods < 1:
        bad("settle_periods", "[simulation] settle_periods must be >= 1")
    if cfg.fig4_points < 2:
        bad("fig4_points", "[report] fig4_points must be >= 2")
