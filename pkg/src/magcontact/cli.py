"""Configuration-driven experiment runner.

Usage::

    magcontact --config exp.yaml --command certify --out results/ --seed 0
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
import yaml

from . import __version__
from . import action, dynamics, index, poincare, surface
from .errors import ConfigError, MagContactError

COMMANDS = ("validate", "bounds", "certify", "orbits", "twist", "index", "cover", "profile-gen")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NEGATIVE = 0, 2, 3, 4

CONFIG_HELP = """\
configuration file (YAML); unknown keys are rejected.

  profile:        family mapping (required), e.g. {family: round_sphere},
                  {family: ellipsoid, a: 1, c: 6}, {family: stretched_sphere,
                  a: 0.3, delta: 0.05, C: 30}, {family: dip, delta: 0.1, eps: 0.5}
  strength:       {family: constant|cosine|rigid, ...}     default constant 1
  m_grid:         list of energy parameters                default [1.0]
  i_grid_size:    momentum levels per certificate          default 256
  tolerances:
    action:       indeterminate band of the verdict        default 1e-6
    validate:     profile validation tolerance             default 1e-8
    rtol, atol:   integrator tolerances                    default 1e-11, 1e-13
    crit_frac:    critical-level exclusion (x range)       default 1e-3
  twist:
    u_fractions:  section points u = fraction * ell        default [-0.75,-0.5,-0.25,0.25,0.5]
    m:            decreasing m sequence for the fit        default [0.08,0.04,0.02,0.01]
  index:
    samples:      random states for the generator fit      default 16
  cover:
    samples:      quaternion samples                       default 1000
  out:            output directory                         default out
  seed:           seed for randomized sampling             default 0

exit codes: 0 success, 2 configuration error, 3 numerical precondition
failure, 4 a certificate is Negative.
"""


@dataclass
class Tolerances:
    action: float = 1e-6
    validate: float = 1e-8
    rtol: float = dynamics.RTOL
    atol: float = dynamics.ATOL
    crit_frac: float = 1e-3


@dataclass
class TwistConfig:
    u_fractions: List[float] = field(default_factory=lambda: [-0.75, -0.5, -0.25, 0.25, 0.5])
    m: List[float] = field(default_factory=lambda: [0.08, 0.04, 0.02, 0.01])


@dataclass
class IndexConfig:
    samples: int = 16


@dataclass
class CoverConfig:
    samples: int = 1000


@dataclass
class ExperimentConfig:
    profile: dict
    strength: Optional[dict] = None
    m_grid: List[float] = field(default_factory=lambda: [1.0])
    i_grid_size: int = 256
    tolerances: Tolerances = field(default_factory=Tolerances)
    twist: TwistConfig = field(default_factory=TwistConfig)
    index: IndexConfig = field(default_factory=IndexConfig)
    cover: CoverConfig = field(default_factory=CoverConfig)
    out: str = "out"
    seed: int = 0

    def to_dict(self):
        """Configuration without the output location, which never affects results."""
        d = asdict(self)
        d.pop("out")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_SECTIONS = {"tolerances": Tolerances, "twist": TwistConfig, "index": IndexConfig,
             "cover": CoverConfig}
_TOP = {"profile", "strength", "m_grid", "i_grid_size", "out", "seed"} | set(_SECTIONS)


def _mark(node):
    return node.start_mark.line + 1, node.start_mark.column + 1


def _check_keys(node, allowed, where):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{where} must be a mapping", *_mark(node))
    for k, _ in node.value:
        if k.value not in allowed:
            raise ConfigError(f"unknown key {k.value!r} in {where}", *_mark(k))


def _node_of(root, key):
    for k, v in root.value:
        if k.value == key:
            return v
    return root


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate an experiment configuration."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          *((mark.line + 1, mark.column + 1) if mark else (None, None))) from None
    if root is None:
        raise ConfigError("empty configuration")
    _check_keys(root, _TOP, "config")
    for name, cls in _SECTIONS.items():
        if name in data:
            _check_keys(_node_of(root, name), set(cls.__dataclass_fields__), name)
    if "profile" not in data:
        raise ConfigError("missing required key 'profile'")

    def bad(key, msg):
        return ConfigError(f"{key}: {msg}", *_mark(_node_of(root, key)))

    if not isinstance(data["profile"], dict):
        raise bad("profile", "must be a mapping")
    if data.get("strength") is not None and not isinstance(data["strength"], dict):
        raise bad("strength", "must be a mapping")
    try:
        sections = {n: cls(**(data.get(n) or {})) for n, cls in _SECTIONS.items()}
        cfg = ExperimentConfig(profile=data["profile"], strength=data.get("strength"),
                               m_grid=[float(x) for x in data.get("m_grid", [1.0])],
                               i_grid_size=int(data.get("i_grid_size", 256)),
                               out=str(data.get("out", "out")), seed=int(data.get("seed", 0)),
                               **sections)
        t = cfg.tolerances
        for k in ("action", "validate", "rtol", "atol", "crit_frac"):
            setattr(t, k, float(getattr(t, k)))
        cfg.twist.u_fractions = [float(x) for x in cfg.twist.u_fractions]
        cfg.twist.m = [float(x) for x in cfg.twist.m]
        cfg.index.samples = int(cfg.index.samples)
        cfg.cover.samples = int(cfg.cover.samples)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value: {exc}") from None
    if not cfg.m_grid or any(m <= 0 for m in cfg.m_grid):
        raise bad("m_grid", "must be a nonempty list of positive numbers")
    if cfg.i_grid_size < 1:
        raise bad("i_grid_size", "must be positive")
    if not cfg.twist.u_fractions or any(not 0 < abs(u) < 1 for u in cfg.twist.u_fractions):
        raise bad("twist", "u_fractions must lie in (-1, 1) without 0")
    if len(cfg.twist.m) < 2 or any(np.diff(cfg.twist.m) >= 0):
        raise bad("twist", "m must be strictly decreasing with at least two entries")
    return cfg


# --------------------------------------------------------------------------
# output


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


# --------------------------------------------------------------------------
# commands


@dataclass
class RunResult:
    status: int
    files: dict
    operations: List[str]


def _build(cfg):
    prof = surface.build_profile(cfg.profile)
    return prof, surface.build_strength(cfg.strength, prof)


def _cmd_validate(cfg, prof, st):
    rep = surface.validate(prof, st, cfg.tolerances.validate)
    return EXIT_OK, {"validation.json": rep.to_json() + "\n"}, ["surface.validate"]


def _cmd_bounds(cfg, prof, st):
    cb = surface.contact_bounds(prof)
    row = [cb.m_gamma, "full-ray" if cb.full_ray else "gap",
           "" if cb.full_ray else cb.m_minus, "" if cb.full_ray else cb.m_plus]
    return EXIT_OK, {"bounds.csv": _csv(["m_gamma", "interval", "m_minus", "m_plus"], [row])}, \
        ["surface.m_gamma", "surface.contact_bounds"]


def _cmd_certify(cfg, prof, st):
    t = cfg.tolerances
    certs = [action.certify_contact(m, prof, st, cfg.i_grid_size, t.action, t.crit_frac, t.rtol,
                                    t.atol) for m in cfg.m_grid]
    csv_text = "".join(c.to_csv() if i == 0 else c.to_csv().split("\n", 1)[1]
                       for i, c in enumerate(certs))
    files = {"certificate.json": _json({"schema": "certificates/1",
                                        "certificates": [c.to_dict() for c in certs]}),
             "certificate.csv": csv_text}
    status = EXIT_NEGATIVE if any(c.verdict == "Negative" for c in certs) else EXIT_OK
    return status, files, ["action.certify_contact"]


def _cmd_orbits(cfg, prof, st):
    out = []
    for m in cfg.m_grid:
        out.append({"m": m, "orbits": [o.__dict__ for o in dynamics.latitude_orbits(m, prof, st)]})
    return EXIT_OK, {"latitudes.json": _json({"schema": "latitudes/1", "tables": out})}, \
        ["dynamics.latitude_orbits"]


def _cmd_twist(cfg, prof, st):
    rows, fits = [], []
    for fr in cfg.twist.u_fractions:
        u = fr * prof.ell
        fit = poincare.twist_fit(prof, st, u, cfg.twist.m, variable="m")
        om = float(poincare.omega_f(prof, st, abs(u)))
        for m, r in zip(fit.ms, fit.ratios):
            th = r * m * m
            rows.append([u, m, th, th + np.pi, r])
        fits.append({"u": u, "limit": fit.limit, "order": fit.order,
                     "expected": 0.5 * np.pi * om})
    files = {"twist.csv": _csv(["u", "m", "theta_m", "psi_m", "fit"], rows),
             "twist_fit.json": _json({"schema": "twist/1", "fits": fits})}
    return EXIT_OK, files, ["poincare.theta_m", "poincare.twist_fit", "poincare.omega_f"]


def _cmd_index(cfg, prof, st):
    rep = index.dynconvex_report(cfg.m_grid, prof, st, cfg.index.samples, cfg.seed)
    return EXIT_OK, {"index.json": rep.to_json() + "\n"}, ["index.dynconvex_report"]


def _cmd_cover(cfg, prof, st):
    r = index.quaternion_cover_check(cfg.cover.samples, cfg.seed)
    tau, lam = index.cover_base_point(1.0, 0.0)
    return EXIT_OK, {"cover.json": _json({"schema": "cover/1", "samples": cfg.cover.samples,
                                          "seed": cfg.seed, "max_residual": r,
                                          "base_point": {"tau": tau, "lambda": lam}})}, \
        ["index.quaternion_cover_check", "index.cover_base_point"]


def _cmd_profile_gen(cfg, prof, st):
    text = surface.profile_to_text(prof) + surface.strength_to_text(st)
    rep = surface.validate(prof, st, cfg.tolerances.validate)
    return EXIT_OK, {"profile.yaml": text, "validation.json": rep.to_json() + "\n"}, \
        ["surface.build_profile", "surface.validate"]


_HANDLERS = {"validate": _cmd_validate, "bounds": _cmd_bounds, "certify": _cmd_certify,
             "orbits": _cmd_orbits, "twist": _cmd_twist, "index": _cmd_index,
             "cover": _cmd_cover, "profile-gen": _cmd_profile_gen}


def _manifest(cfg, command, status, files, ops):
    import numba
    import scipy
    return _json({"schema": "manifest/1", "command": command, "status": status,
                  "config_sha256": cfg.digest(), "config": cfg.to_dict(),
                  "tolerances": asdict(cfg.tolerances), "operations": ops,
                  "outputs": sorted(files),
                  "versions": {"magcontact": __version__, "numpy": np.__version__,
                               "scipy": scipy.__version__, "numba": numba.__version__,
                               "python": platform.python_version()}})


def run(cfg: ExperimentConfig, command: str) -> RunResult:
    """Execute ``command`` and write its artifacts and a manifest atomically."""
    if command not in _HANDLERS:
        raise ConfigError(f"unknown command {command!r}")
    prof, st = _build(cfg)
    status, files, ops = _HANDLERS[command](cfg, prof, st)
    for name, text in files.items():
        _atomic_write(os.path.join(cfg.out, name), text)
    _atomic_write(os.path.join(cfg.out, "manifest.json"), _manifest(cfg, command, status, files, ops))
    return RunResult(status, files, ops)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="magcontact", description=__doc__.splitlines()[0],
                                 formatter_class=argparse.RawDescriptionHelpFormatter,
                                 epilog=CONFIG_HELP)
    ap.add_argument("--config", required=True, help="path to the YAML configuration")
    ap.add_argument("--command", required=True, choices=COMMANDS)
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--seed", type=int, help="random seed (overrides the config)")
    args = ap.parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
        if args.out is not None:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        res = run(cfg, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MagContactError as exc:
        print(f"numerical precondition failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for name in sorted(res.files):
        print(os.path.join(cfg.out, name))
    return res.status


if __name__ == "__main__":
    sys.exit(main())
