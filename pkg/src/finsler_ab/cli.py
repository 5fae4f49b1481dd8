"""Command-line front end: ``finsler-ab {verify,classify,construct,curvature-dump}``."""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classify import INDETERMINATE, GridSpec, classify_metric, condition_residuals
from .curvature import curvature_report, sample_points
from .geometry import GeometryError, euclidean_conformal
from .phi import (
    BerwaldFamilySpec,
    ExpressionError,
    PhiModel,
    berwald_family_model,
    builtin_model,
    example1,
    example2,
    fit_integration_constants,
    parse_expression,
    phi_partials,
    scalar_pack,
)
from .report import write_csv, write_json
from .rng import SplitMix64

log = logging.getLogger("finsler_ab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INDETERMINATE = 0, 1, 2, 3
MODELS = ("riemannian", "randers", "example1", "example2", "constructed")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str = "riemannian"
    xi: float = 1.0
    mu: float = 1.0
    eps: float = 1.0
    varphi: str | None = None
    theta: str | None = None
    c0: float = 1.0
    d: list[float] | None = None
    dim: int = 3
    grid: tuple[int, int] = (40, 40)
    tol: float | None = None
    samples: int = 20
    seed: int = 0
    out: str = "finsler_out"
    compare: str | None = None
    extra: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        return {
            "model": self.model,
            "xi": self.xi,
            "mu": self.mu,
            "eps": self.eps,
            "varphi": self.varphi,
            "theta": self.theta,
            "c0": self.c0,
            "d": self.d,
            "dim": self.dim,
            "grid": list(self.grid),
            "tol": self.tol,
            "samples": self.samples,
            "seed": self.seed,
        }


# -- config ------------------------------------------------------------------------


def _parse_grid(text) -> tuple[int, int]:
    parts = str(text).lower().replace("*", "x").split("x")
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}; use N or NxM") from None
    if len(vals) == 1:
        vals = vals * 2
    if len(vals) != 2 or min(vals) < 1:
        raise ConfigError(f"bad grid {text!r}; use N or NxM")
    return vals[0], vals[1]


def _parse_vector(text) -> list[float]:
    try:
        return [float(v) for v in str(text).replace("[", "").replace("]", "").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad vector {text!r}") from None


_CASTS = {
    "model": str,
    "xi": float,
    "mu": float,
    "eps": float,
    "varphi": str,
    "theta": str,
    "c0": float,
    "d": _parse_vector,
    "dim": int,
    "grid": _parse_grid,
    "tol": float,
    "samples": int,
    "seed": int,
    "out": str,
    "compare": str,
}


def read_config_file(path) -> dict:
    """Flat ``key = value`` file, optionally under one ``[section]``; quotes are stripped."""
    text = Path(path).read_text(encoding="utf-8")
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        text = "[run]\n" + text
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    out = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            key = key.replace("-", "_")
            if key not in _CASTS:
                raise ConfigError(f"unknown config key {key!r} in {path}")
            out[key] = raw.strip().strip("\"'")
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        try:
            values.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    for key in _CASTS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    cfg = RunConfig()
    for key, raw in values.items():
        try:
            setattr(cfg, key, _CASTS[key](raw) if isinstance(raw, str) or key == "grid" else raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    if cfg.model not in MODELS:
        raise ConfigError(f"unknown model {cfg.model!r}; choose from {', '.join(MODELS)}")
    if cfg.dim < 2:
        raise ConfigError("dim must be at least 2")
    if cfg.samples < 1:
        raise ConfigError("samples must be positive")
    if cfg.d is not None and len(cfg.d) != cfg.dim:
        raise ConfigError(f"d has {len(cfg.d)} entries, expected {cfg.dim}")
    if cfg.compare not in (None, "example1", "example2"):
        raise ConfigError("compare must be example1 or example2")
    return cfg


# -- model assembly ------------------------------------------------------------


def family_spec(cfg: RunConfig) -> BerwaldFamilySpec:
    if cfg.varphi is None or cfg.theta is None:
        raise ConfigError("the constructed family needs --varphi and --theta")
    try:
        vp = parse_expression(cfg.varphi, "t")
        th = parse_expression(cfg.theta, "b2")
    except ExpressionError as exc:
        raise ConfigError(str(exc)) from None
    return BerwaldFamilySpec(vp, th)


def build_phi(cfg: RunConfig) -> PhiModel:
    if cfg.model == "constructed":
        return berwald_family_model(family_spec(cfg))
    params = {"example1": {"xi": cfg.xi}, "example2": {"mu": cfg.mu, "xi": cfg.xi, "eps": cfg.eps}}.get(cfg.model, {})
    try:
        return builtin_model(cfg.model, **params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_manifold(cfg: RunConfig, phi: PhiModel):
    d = cfg.d
    if d is None:
        d = [0.0] * cfg.dim
        if cfg.c0 == 0.0:
            # a parallel one-form has constant b^2; put it mid-range
            lo, hi = phi.domain.b2_range
            d[0] = math.sqrt(0.5 * (lo + hi))
    return euclidean_conformal(cfg.dim, cfg.c0, d, b0=phi.domain.b0)


def _grid(cfg: RunConfig) -> GridSpec:
    return GridSpec(*cfg.grid)


def _outdir(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _header(cfg: RunConfig, command: str) -> dict:
    return {"tool": "finsler-ab", "version": __version__, "command": command, "config": cfg.as_record()}


# -- commands ----------------------------------------------------------------------


def cmd_verify(cfg: RunConfig) -> int:
    tol = cfg.tol if cfg.tol is not None else 1e-7
    phi = build_phi(cfg)
    model = build_manifold(cfg, phi)
    rng = SplitMix64(cfg.seed)
    records, worst, worst_id = [], {}, {}
    for x, y in sample_points(model, phi, cfg.samples, rng):
        rep = curvature_report(model, phi, x, y)
        records.append(
            {"x": x, "y": y, "b2": rep.b2, "s": rep.s, "discrepancies": rep.discrepancies, "identities": rep.identities}
        )
        for k, v in rep.discrepancies.items():
            worst[k] = max(worst.get(k, 0.0), v)
        for k, v in rep.identities.items():
            worst_id[k] = max(worst_id.get(k, 0.0), v)
    failures = sorted(k for k, v in worst.items() if not v <= tol)
    doc = _header(cfg, "verify")
    doc.update({"tol": tol, "max_discrepancy": worst, "max_identity_residual": worst_id, "failures": failures, "points": records})
    path = _outdir(cfg) / "verify.json"
    write_json(path, doc)
    top = max(worst.values(), default=0.0)
    print(f"verify {phi.name}: {len(records)} points, max route discrepancy {top:.3e} (tol {tol:g}) -> {path}")
    if failures:
        for k in failures:
            print(f"  FAIL {k}: {worst[k]:.3e}")
        return EXIT_FAIL
    return EXIT_OK


def _residual_rows(cond):
    for i in range(len(cond.b2)):
        yield [cond.b2[i], cond.s[i], int(cond.valid[i])] + [cond.residuals[k][i] for k in cond.residuals] + [
            int(cond.convex_d1[i]),
            int(cond.convex_d2[i]),
        ]


def cmd_classify(cfg: RunConfig) -> int:
    tol = cfg.tol if cfg.tol is not None else 1e-6
    phi = build_phi(cfg)
    cond = condition_residuals(phi, _grid(cfg))
    cls = classify_metric(phi, _grid(cfg), tol, c0=cfg.c0, cond=cond)
    out = _outdir(cfg)
    doc = _header(cfg, "classify")
    doc.update({"classification": cls, "grid": {"nb": cfg.grid[0], "ns": cfg.grid[1], "b2_range": phi.domain.b2_range, "s_range": phi.domain.s_range}})
    write_json(out / "classification.json", doc)
    write_csv(
        out / "residuals.csv",
        ["b2", "s", "valid", *cond.residuals.keys(), "d1_positive", "d2_positive"],
        _residual_rows(cond),
    )
    print(cls.summary())
    if INDETERMINATE in cls.verdicts.values():
        return EXIT_INDETERMINATE
    return EXIT_OK


def cmd_construct(cfg: RunConfig) -> int:
    spec = family_spec(cfg)
    phi = berwald_family_model(spec)
    cells = _grid(cfg).cells(phi)
    rows, worst = [], 0.0
    for b2, s in cells:
        p = phi_partials(phi, b2, s)
        sp = scalar_pack(phi, b2, s)
        r = max(abs(sp.E - s * sp.E2), abs(sp.H2 - s * sp.H22))
        worst = max(worst, r)
        rows.append([b2, s, p.phi, p.phi1, p.phi2, p.phi12, p.phi22, p.phi222, abs(sp.E - s * sp.E2), abs(sp.H2 - s * sp.H22)])
    out = _outdir(cfg)
    write_csv(
        out / "construct.csv",
        ["b2", "s", "phi", "phi_1", "phi_2", "phi_12", "phi_22", "phi_222", "E_minus_sE2", "H2_minus_sH22"],
        rows,
    )
    doc = _header(cfg, "construct")
    doc["max_berwald_residual"] = worst
    status = EXIT_OK
    tol = cfg.tol if cfg.tol is not None else 1e-7
    if cfg.compare:
        target = example1(cfg.xi) if cfg.compare == "example1" else example2(cfg.mu, cfg.xi, cfg.eps)
        pts = [c for c in cells if target.domain.contains(*c)]
        fitted = fit_integration_constants(spec, target.value, pts[:: max(1, len(pts) // 24)])
        fm = berwald_family_model(fitted)
        dev = max(abs(fm.value(u, s) / target.value(u, s) - 1) for u, s in pts)
        doc["comparison"] = {
            "target": cfg.compare,
            "a_ref": fitted.a_ref,
            "b_ref": fitted.b_ref,
            "c_ref": fitted.c_ref,
            "max_relative_deviation": dev,
        }
        print(f"fitted constants A={fitted.a_ref:.12g} B={fitted.b_ref:.12g} C={fitted.c_ref:.12g} at b2={spec.b2_ref}; max relative deviation from {cfg.compare} {dev:.3e}")
        if not dev <= 1e-6:
            status = EXIT_FAIL
    write_json(out / "construct.json", doc)
    print(f"construct: {len(rows)} cells, max Berwald residual {worst:.3e}")
    if not worst <= tol:
        status = EXIT_FAIL
    return status


def cmd_curvature_dump(cfg: RunConfig) -> int:
    phi = build_phi(cfg)
    model = build_manifold(cfg, phi)
    rng = SplitMix64(cfg.seed)
    points, rows = [], []
    for idx, (x, y) in enumerate(sample_points(model, phi, cfg.samples, rng)):
        rep = curvature_report(model, phi, x, y)
        q = {
            "g": rep.g,
            "g_inv": rep.g_inv,
            "spray": rep.spray,
            "berwald": rep.berwald,
            "landsberg": rep.landsberg,
            "mean_landsberg": rep.mean_landsberg,
        }
        points.append({"x": x, "y": y, "b2": rep.b2, "s": rep.s, "c": rep.c, "det": rep.det, **q, "discrepancies": rep.discrepancies})
        coords = [f"{v:.17g}" for v in x] + [f"{v:.17g}" for v in y]
        for name, routes in q.items():
            for route, arr in routes.items():
                for index in np.ndindex(arr.shape):
                    rows.append([idx, *coords, name, route, ":".join(map(str, index)), float(arr[index])])
    out = _outdir(cfg)
    doc = _header(cfg, "curvature-dump")
    doc["points"] = points
    write_json(out / "curvature.json", doc)
    n = cfg.dim
    header = ["point"] + [f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)] + ["quantity", "route", "index", "value"]
    write_csv(out / "curvature.csv", header, rows)
    print(f"curvature-dump: {len(points)} points -> {out}")
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "classify": cmd_classify, "construct": cmd_construct, "curvature-dump": cmd_curvature_dump}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file; flags override it")
    common.add_argument("--model", choices=MODELS)
    common.add_argument("--xi", type=float)
    common.add_argument("--mu", type=float)
    common.add_argument("--eps", type=float)
    common.add_argument("--varphi", help='generator expression in t, e.g. "1+t"')
    common.add_argument("--theta", help='theta expression in b2, e.g. "1/(1+b2)"')
    common.add_argument("--c0", type=float, help="conformal factor of the Euclidean preset")
    common.add_argument("--d", help="constant part of the one-form, comma separated")
    common.add_argument("--dim", type=int)
    common.add_argument("--grid", help="grid resolution N or NxM")
    common.add_argument("--tol", type=float)
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--compare", choices=("example1", "example2"), help="construct: fit constants against a closed form")
    p = argparse.ArgumentParser(prog="finsler-ab", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def _setup_logging() -> None:
    level = os.environ.get("FINSLER_LOG", "WARNING").upper()
    if level.isdigit():
        lvl = int(level)
    else:
        lvl = getattr(logging, level, None)
        if not isinstance(lvl, int):
            lvl = logging.WARNING
    logging.basicConfig(level=lvl, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"finsler-ab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GeometryError as exc:
        print(f"finsler-ab: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
