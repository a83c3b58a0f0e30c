"""Command-line entry point: simulate, audit, ambiguity, reconstruct.

Experiments are described by a flat config file of ``section.key=value``
lines (``#`` starts a comment); ``--set`` overrides single keys.  Exit
codes: 0 success, 1 numeric failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import ambiguity as amb
from . import io as pio
from . import scan
from .forward import measure
from .grid import GridGeometry
from .metrics import relative_error
from .recon import ReconConfig, am_reconstruct, init_probe
from .synth import make_object, random_phase_probe

log = logging.getLogger("rasterpty")

DEFAULTS = {
    "geometry.n": "64",
    "geometry.m": "16",
    "geometry.boundary": "periodic",
    "geometry.bright_value": "100",
    "pattern.kind": "raster",
    "pattern.tau": "8",
    "pattern.bound": "2",
    "pattern.seed": "0",
    "probe.seed": "100",
    "object.kind": "cib_like",
    "object.seed": "0",
    "forward.os": "2",
    "recon.init_mode": "aligned_random",
    "recon.init_seed": "200",
    "recon.init_margin": "0.05",
    "recon.require_tol": "false",
    "ambiguity.class": "pathology",
    "ambiguity.c": "1",
    "ambiguity.a": "0",
    "ambiguity.b": "0",
    "ambiguity.w1": "0",
    "ambiguity.w2": "0",
    "ambiguity.theta00": "0",
    "ambiguity.r1": "0",
    "ambiguity.r2": "0",
    "ambiguity.psi_seed": "0",
    "ambiguity.tol": "1e-10",
    "output.dir": "out",
}

CSV_COLUMNS = ("epoch", "data_residual", "RE_object", "RE_probe", "wall_ms")


class UsageError(Exception):
    pass


class NumericFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# config


def parse_config(text: str) -> dict:
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if "." not in key:
            raise UsageError(f"config line {lineno}: key {key!r} lacks a section prefix")
        cfg[key] = value
    return cfg


def load_config(path, overrides=()) -> dict:
    cfg = dict(DEFAULTS)
    if path is not None:
        try:
            cfg.update(parse_config(Path(path).read_text()))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
    cfg.update(parse_config("\n".join(overrides)))
    return cfg


def _get(cfg, key, cast=str):
    try:
        return cast(cfg[key])
    except KeyError:
        raise UsageError(f"missing config key {key}") from None
    except ValueError:
        raise UsageError(f"bad value for {key}: {cfg[key]!r}") from None


def _bool(s: str) -> bool:
    s = s.lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def _ints(s: str):
    return [int(v) for v in s.replace(",", " ").split()]


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"file not found: {p}")
    return p


def build_geometry(cfg) -> GridGeometry:
    try:
        return GridGeometry(
            _get(cfg, "geometry.n", int),
            _get(cfg, "geometry.m", int),
            _get(cfg, "geometry.boundary"),
            _get(cfg, "geometry.bright_value", complex),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def build_pattern(cfg, n: int) -> scan.ScanPattern:
    kind = _get(cfg, "pattern.kind")
    try:
        if kind == "file":
            pat = scan.load(_existing(_get(cfg, "pattern.file")))
            if pat.n != n:
                raise UsageError(f"pattern file is for n={pat.n}, geometry has n={n}")
            return pat
        tau = _get(cfg, "pattern.tau", int)
        if kind == "raster":
            return scan.raster(n, tau)
        if kind in ("perturbed", "perturbed_separable", "perturbed_full"):
            full = kind == "perturbed_full"
            if "pattern.delta1" in cfg and not full:
                return scan.perturbed_separable(
                    n, tau, _get(cfg, "pattern.delta1", _ints), _get(cfg, "pattern.delta2", _ints)
                )
            return scan.random_perturbation(
                n, tau, _get(cfg, "pattern.bound", int), _get(cfg, "pattern.seed", int), full=full
            )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    raise UsageError(f"unknown pattern.kind {kind!r}")


def build_object(cfg, n: int) -> np.ndarray:
    if "object.file" in cfg:
        f = pio.read_ptyc(_existing(cfg["object.file"]))
        if f.shape != (n, n):
            raise UsageError(f"object file is {f.shape}, expected {(n, n)}")
        return f
    try:
        return make_object(_get(cfg, "object.kind"), n, _get(cfg, "object.seed", int))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def build_probe(cfg, m: int) -> np.ndarray:
    if "probe.file" in cfg:
        mu = pio.read_ptyc(_existing(cfg["probe.file"]))
        if mu.shape != (m, m):
            raise UsageError(f"probe file is {mu.shape}, expected {(m, m)}")
        return mu
    return random_phase_probe(m, _get(cfg, "probe.seed", int))


def build_recon_config(cfg) -> ReconConfig:
    kwargs = {}
    for fld in dataclasses.fields(ReconConfig):
        key = f"recon.{fld.name}"
        if key not in cfg:
            continue
        if fld.name == "re_window":
            kwargs[fld.name] = None if cfg[key].lower() == "none" else _get(cfg, key, int)
        elif fld.type in ("int", int):
            kwargs[fld.name] = _get(cfg, key, int)
        elif fld.type in ("float", float):
            kwargs[fld.name] = _get(cfg, key, float)
        elif fld.type in ("bool", bool):
            kwargs[fld.name] = _get(cfg, key, _bool)
        else:
            kwargs[fld.name] = cfg[key]
    try:
        return ReconConfig(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _outdir(cfg) -> Path:
    out = Path(_get(cfg, "output.dir"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output dir: {exc}") from exc
    return out


def _write_kv(path: Path, items) -> None:
    path.write_text("".join(f"{k}={v}\n" for k, v in items))


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg) -> int:
    geom = build_geometry(cfg)
    pat = build_pattern(cfg, geom.n)
    f = build_object(cfg, geom.n)
    mu = build_probe(cfg, geom.m)
    data = measure(f, mu, geom, pat, _get(cfg, "forward.os", int))
    out = _outdir(cfg)
    pio.write_ptyc(out / "object.ptyc", f)
    pio.write_ptyc(out / "probe.ptyc", mu)
    pio.write_ptyd(out / "data.ptyd", data)
    scan.save(pat, out / "pattern.txt")
    print(f"patterns={len(data)} size={data.magnitudes.shape[1]} out={out}")
    return 0


def cmd_audit(pattern: scan.ScanPattern, m: int) -> int:
    report = scan.audit(pattern, m)
    for line in report.lines():
        print(line)
    return 0


def cmd_ambiguity(cfg) -> int:
    geom = build_geometry(cfg)
    pat = build_pattern(cfg, geom.n)
    f = build_object(cfg, geom.n)
    mu = build_probe(cfg, geom.m)
    cls = _get(cfg, "ambiguity.class")
    val = lambda k: _get(cfg, f"ambiguity.{k}", float)  # noqa: E731
    r = (val("r1"), val("r2"))
    try:
        if cls == "scaling":
            g, nu = amb.scaling_pair(f, mu, val("c"))
        elif cls == "affine":
            g, nu = amb.affine_phase_pair(f, mu, val("a"), val("b"), (val("w1"), val("w2")))
        elif cls == "progression":
            g, nu = amb.progression_pair(f, mu, pat, val("theta00"), r)
        elif cls == "pathology":
            rng = np.random.default_rng(_get(cfg, "ambiguity.psi_seed", int))
            psi = rng.uniform(-np.pi, np.pi, size=(pat.tau, pat.tau))
            g, nu = amb.pathology_pair(f, mu, pat, psi, val("theta00"), r)
        else:
            raise UsageError(f"unknown ambiguity.class {cls!r}")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    dev = amb.verify_same_data(f, mu, g, nu, geom, pat, _get(cfg, "forward.os", int))
    out = _outdir(cfg)
    pio.write_ptyc(out / "g.ptyc", g)
    pio.write_ptyc(out / "nu.ptyc", nu)
    case = ""
    if cls == "pathology":
        case = "overshift" if 2 * pat.tau > geom.m else "undershift"
    items = [("class", cls), ("case", case or "n/a"), ("max_dev", f"{dev:.3e}")]
    _write_kv(out / "ambiguity_report.txt", items)
    for k, v in items:
        print(f"{k}={v}")
    if dev >= _get(cfg, "ambiguity.tol", float):
        raise NumericFailure(f"data mismatch {dev:.3e}")
    return 0


def cmd_reconstruct(cfg) -> int:
    geom = build_geometry(cfg)
    rcfg = build_recon_config(cfg)
    if "input.data" in cfg:
        try:
            data = pio.read_ptyd(
                _existing(cfg["input.data"]), geom.n, _get(cfg, "pattern.tau", int), cfg.get("pattern.kind")
            )
        except ValueError as exc:
            raise UsageError(f"cannot read data: {exc}") from exc
        if data.m != geom.m:
            raise UsageError(f"data are for m={data.m}, geometry has m={geom.m}")
        f_truth = pio.read_ptyc(_existing(cfg["input.object"])) if "input.object" in cfg else None
        mu_truth = pio.read_ptyc(_existing(cfg["input.probe"])) if "input.probe" in cfg else None
    else:
        pat = build_pattern(cfg, geom.n)
        f_truth = build_object(cfg, geom.n)
        mu_truth = build_probe(cfg, geom.m)
        data = measure(f_truth, mu_truth, geom, pat, rcfg.os)

    mode = _get(cfg, "recon.init_mode")
    if mode == "file":
        mu0 = pio.read_ptyc(_existing(_get(cfg, "recon.init_file")))
    else:
        if mu_truth is None:
            raise UsageError(f"init_mode={mode} needs the true probe (input.probe)")
        try:
            mu0 = init_probe(
                mu_truth, _get(cfg, "recon.init_seed", int), mode, _get(cfg, "recon.init_margin", float)
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    out = _outdir(cfg)
    with open(out / "convergence.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)

        def row(rec):
            writer.writerow(
                [rec.epoch, f"{rec.data_residual:.6e}", f"{rec.re_object:.6e}", f"{rec.re_probe:.6e}",
                 f"{rec.wall_ms:.1f}"]
            )

        state = am_reconstruct(data, geom, mu0, rcfg, f_truth, mu_truth, callback=row)

    pio.write_ptyc(out / "object_est.ptyc", state.f_est)
    pio.write_ptyc(out / "probe_est.ptyc", state.probe_est)
    last = state.history[-1]
    items = [
        ("stop_reason", state.stop_reason),
        ("epochs", last.epoch),
        ("data_residual", f"{last.data_residual:.6e}"),
        ("RE_object", f"{last.re_object:.6e}"),
        ("RE_probe", f"{last.re_probe:.6e}"),
    ]
    if f_truth is not None:
        fit = relative_error(f_truth, state.f_est, period=geom.n)
        items.append(("fitted_slope", f"{int(fit.slope[0])},{int(fit.slope[1])}"))
        if not geom.periodic:
            ref = relative_error(f_truth, state.f_est, period=geom.n, refine=True)
            items.append(("refined_slope", f"{ref.slope[0]:.6g},{ref.slope[1]:.6g}"))
    _write_kv(out / "summary.txt", items)
    for k, v in items:
        print(f"{k}={v}")
    if _get(cfg, "recon.require_tol", _bool) and not state.converged:
        raise NumericFailure(f"no convergence to tol_data={rcfg.tol_data:g} ({state.stop_reason})")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rasterpty", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        p.add_argument("-o", "--out", help="output directory (output.dir)")

    common(sub.add_parser("simulate", help="write truth PTYC files and PTYD data"))
    p = sub.add_parser("audit", help="print the uniqueness audit of a scan pattern")
    p.add_argument("--pattern", help="pattern text file (otherwise built from the config)")
    p.add_argument("--m", type=int, help="probe size (default geometry.m)")
    p.add_argument("--config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p = sub.add_parser("ambiguity", help="construct a data-equivalent (object, probe) pair")
    common(p)
    p.add_argument("--class", dest="cls", choices=("scaling", "affine", "progression", "pathology"))
    common(sub.add_parser("reconstruct", help="run blind reconstruction and log convergence"))
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, args.set)
        if getattr(args, "out", None):
            cfg["output.dir"] = args.out
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "audit":
            if args.pattern:
                try:
                    pat = scan.load(_existing(args.pattern))
                except ValueError as exc:
                    raise UsageError(f"bad pattern file: {exc}") from exc
            else:
                pat = build_pattern(cfg, _get(cfg, "geometry.n", int))
            return cmd_audit(pat, args.m if args.m is not None else _get(cfg, "geometry.m", int))
        if args.command == "ambiguity":
            if args.cls:
                cfg["ambiguity.class"] = args.cls
            return cmd_ambiguity(cfg)
        return cmd_reconstruct(cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        # malformed input files and invalid parameters
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
