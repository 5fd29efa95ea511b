"""Batch front end: one JSON config in, CSV tables and a JSON manifest out.

Usage::

    rmt-kit {validate,kernel,sample,density,scan} --config run.json [--out DIR]
            [--threads K] [--assert-trend]

Exit codes: 0 success, 1 malformed config, 2 invalid parameters, 3 trend
assertion failed, 4 numerical non-convergence.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .ensembles import CoupledParams, ProductParams, WishartParams, sample_spectra, validate
from .errors import (AccuracyError, ConfigError, DomainError, GeometryError, RangeError,
                     RMTKitError, ValidationError)
from .kernels import (FiniteKernel, chi_square_equiprobable, default_contours, density_curve,
                      kernel_grid)
from .limits import (MuSchedule, PerturbationSet, ScalingRegime, bessel_kernel_closed,
                     hard_edge_scan, interpolate_scan, kernel_I, kernel_II,
                     kernel_II_composition, kernel_III, trend_ok)

__all__ = ["main", "load_config", "parse_ensemble", "EXIT"]

EXIT = {"ok": 0, "config": 1, "validation": 2, "assertion": 3, "convergence": 4}
COMMANDS = ("validate", "kernel", "sample", "density", "scan")
DEFAULT_PROBE = ((1.0, 2.0), (0.5, 0.5), (2.0, 1.0))
DEFAULT_LADDER = {"N": [8, 16, 32, 64], "to-I": [1.0, 4.0, 16.0, 64.0],
                  "to-III": [1.0, 0.25, 0.0625, 0.015625]}
DEFAULT_SCHEDULE = {"I": ("constant", 0.5), "III": ("vanishing", 0.1)}

_NUMERICAL = (AccuracyError, GeometryError, RangeError)


class TrendFailure(RMTKitError):
    """A convergence table does not decrease along its ladder."""


# ---------------------------------------------------------------------------
# config parsing


def _reject_constant(name):
    raise ConfigError(f"non-finite number {name} in config")


def load_config(path):
    """Read a JSON config; errors carry the file location."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def _get(block, key, where, default=None, required=True):
    if key in block:
        return block[key]
    if required and default is None:
        raise ConfigError(f"{where}: missing field {key!r}")
    return default


def _num(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    return float(value)


def _int(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _nums(value, where):
    if not isinstance(value, list):
        raise ConfigError(f"{where}: expected a list of numbers")
    return [_num(v, f"{where}[{i}]") for i, v in enumerate(value)]


def _block(cfg, key, where="config"):
    b = _get(cfg, key, where)
    if not isinstance(b, dict):
        raise ConfigError(f"{where}.{key}: expected an object")
    return b


def parse_ensemble(block, where="config.ensemble"):
    """Parameter object for ``{"kind": ..., ...}``; returns ``(kind, params)``."""
    kind = _get(block, "kind", where)
    if kind == "wishart":
        fields = ("N", "M", "q", "sigma")
    elif kind == "product":
        fields = ("N", "M", "L", "alpha", "q")
    elif kind == "coupled":
        fields = ("N", "M", "L", "alpha", "q", "delta")
    else:
        raise ConfigError(f"{where}.kind: unknown ensemble kind {kind!r}")
    vals = {}
    for f in fields:
        raw = _get(block, f, where)
        loc = f"{where}.{f}"
        if f in ("N", "M", "L"):
            vals[f] = _int(raw, loc)
        elif f == "alpha":
            vals[f] = _num(raw, loc)
        else:
            vals[f] = tuple(_nums(raw, loc))
    cls = {"wishart": WishartParams, "product": ProductParams, "coupled": CoupledParams}[kind]
    return kind, cls(**vals)


def _perturbations(block, where):
    if block is None:
        return PerturbationSet()
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object")
    pi = _nums(block.get("pi_hat", []), f"{where}.pi_hat")
    th = _nums(block.get("theta_hat", []), f"{where}.theta_hat")
    return PerturbationSet(tuple(pi), tuple(th))


def _probe(cfg):
    raw = cfg.get("probe", [list(p) for p in DEFAULT_PROBE])
    if not isinstance(raw, list) or not raw:
        raise ConfigError("config.probe: expected a non-empty list of [x, y] pairs")
    out = []
    for i, pt in enumerate(raw):
        if not isinstance(pt, list) or len(pt) != 2:
            raise ConfigError(f"config.probe[{i}]: expected [x, y]")
        out.append((_num(pt[0], f"config.probe[{i}][0]"), _num(pt[1], f"config.probe[{i}][1]")))
    return out


def _threads(arg):
    if arg is not None:
        k = arg
    else:
        env = os.environ.get("RMT_KIT_THREADS")
        if env is None or env == "":
            return 1
        try:
            k = int(env)
        except ValueError:
            raise ConfigError(f"RMT_KIT_THREADS must be an integer, got {env!r}") from None
    if k < 1:
        raise ConfigError("thread count must be at least 1")
    return k


# ---------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % v


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, comment, columns, rows):
    """CSV with a ``#`` line naming units and gauge, a column row, then data."""
    buf = io.StringIO()
    for line in comment:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    _atomic_write(path, buf.getvalue())


def read_csv(path):
    """Inverse of :func:`write_csv`: ``(columns, rows as lists of str)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        return [], []
    return rows[0], rows[1:]


def config_hash(cfg):
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _manifest(ctx, extra):
    m = {"tool": "rmt-kit", "version": __version__, "command": ctx["command"],
         "config": ctx["config"], "config_sha256": config_hash(ctx["config"]),
         "seed": ctx["config"].get("seed"), "threads": ctx["threads"]}
    m.update(extra)
    _atomic_write(os.path.join(ctx["out"], f"{ctx['command']}.json"),
                  json.dumps(m, indent=2, sort_keys=True, default=_json_default) + "\n")
    return m


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if hasattr(o, "as_dict"):
        return o.as_dict()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _params_dict(kind, params):
    d = {k: getattr(params, k) for k in params.__dataclass_fields__}
    d = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
    d["kind"] = kind
    return d


# ---------------------------------------------------------------------------
# commands


def cmd_validate(ctx):
    kind, params = parse_ensemble(_block(ctx["config"], "ensemble"))
    report = {"params": _params_dict(kind, params),
              "kappa": params.kappa if kind != "wishart" else None, "nu": params.nu}
    try:
        validate(params)
    except ValidationError as exc:
        _manifest(ctx, dict(report, status="violated", constraint=exc.constraint,
                            violations=[list(v) if isinstance(v, tuple) else v for v in exc.violations]))
        raise
    print("constraints satisfied")
    _manifest(ctx, dict(report, status="constraints satisfied"))
    return EXIT["ok"]


def _limit_cell(spec, p, x, y, tol):
    which = spec["kernel"]
    if which == "bessel":
        return bessel_kernel_closed(spec["nu"], x, y), 0.0
    if which == "III":
        return kernel_III(p, spec["nu"], x, y, tol=tol, with_error=True)
    if which == "II":
        if spec["route"] == "composition":
            return kernel_II_composition(p, spec["tau"], spec["kappa"], spec["nu"], x, y,
                                         tol=max(tol, 1e-9), with_error=True)
        return kernel_II(p, spec["tau"], spec["kappa"], spec["nu"], x, y, tol=tol,
                         with_error=True)
    return kernel_I(p, spec["kappa"], spec["nu"], x, y, route=spec["route"], tol=tol,
                    with_error=True)


def _limit_spec(block):
    where = "config.limit"
    which = _get(block, "kernel", where)
    if which not in ("I", "II", "III", "bessel"):
        raise ConfigError(f"{where}.kernel: expected one of I, II, III, bessel")
    spec = {"kernel": which,
            "nu": _int(block.get("nu", 0), f"{where}.nu"),
            "kappa": _int(block.get("kappa", 0), f"{where}.kappa"),
            "tau": None,
            "route": block.get("route", "direct" if which == "II" else "hankel")}
    if which == "II":
        spec["tau"] = _num(_get(block, "tau", where), f"{where}.tau")
    p = _perturbations(block.get("perturbations"), f"{where}.perturbations")
    if which in ("I", "II", "III"):
        p.check(which, spec["tau"])
    if spec["nu"] < 0 or spec["kappa"] < 0:
        raise DomainError("nu and kappa must be nonnegative")
    return spec, p


def cmd_kernel(ctx):
    cfg = ctx["config"]
    xs = _nums(_get(cfg, "x", "config"), "config.x")
    ys = _nums(_get(cfg, "y", "config"), "config.y")
    tol = _num(cfg.get("tol", 1e-10), "config.tol")
    rows, failed = [], False
    if "limit" in cfg:
        spec, p = _limit_spec(_block(cfg, "limit"))
        gauge = {"bessel": "symmetric Bessel kernel",
                 "III": "K_III in its square-root variables, (y/x)^{nu/2} relative to symmetric",
                 "II": "K_II with prefactor (x/y)^{kappa/2}",
                 "I": "K_I with prefactor (x/y)^{kappa/2}"}[spec["kernel"]]
        for x in xs:
            for y in ys:
                try:
                    v, e = _limit_cell(spec, p, x, y, tol)
                    rows.append((x, y, float(v), float(e), "ok"))
                except _NUMERICAL as exc:
                    failed = True
                    rows.append((x, y, math.nan, math.nan, f"{type(exc).__name__}: {exc}"))
        extra = {"limit": spec, "perturbations": p.as_dict(), "gauge": gauge,
                 "method": spec["route"] if spec["kernel"] in ("I", "II") else "contour"}
    else:
        kind, params = parse_ensemble(_block(cfg, "ensemble"))
        method = cfg.get("method", "contour-quadrature")
        k = FiniteKernel(kind, params, method, tol)
        gauge = "density gauge: K(x,y) = sum psi_i(x) C_ij phi_j(y), rho_1(x) = K(x,x)"
        try:
            g = kernel_grid(k, xs, ys)
            rows = [(x, y, float(g.values[i, j]), float(g.est_error[i, j]), "ok")
                    for i, x in enumerate(xs) for j, y in enumerate(ys)]
        except _NUMERICAL:
            for x in xs:
                for y in ys:
                    try:
                        g = kernel_grid(k, [x], [y])
                        rows.append((x, y, float(g.values[0, 0]), float(g.est_error[0, 0]), "ok"))
                    except _NUMERICAL as exc:
                        failed = True
                        rows.append((x, y, math.nan, math.nan, f"{type(exc).__name__}: {exc}"))
        try:
            contours = default_contours(kind, params)
            contours = {"inner": contours.inner.as_dict(), "outer": contours.outer.as_dict(),
                        "mode": contours.mode}
        except RMTKitError:
            contours = None
        extra = {"params": _params_dict(kind, params), "gauge": gauge, "method": method,
                 "contours": contours}
    write_csv(os.path.join(ctx["out"], "kernel.csv"),
              ["units: x, y are squared singular values (dimensionless)", f"gauge: {gauge}"],
              ["x", "y", "K", "est_error", "status"], rows)
    _manifest(ctx, extra)
    return EXIT["convergence"] if failed else EXIT["ok"]


def cmd_sample(ctx):
    cfg = ctx["config"]
    kind, params = parse_ensemble(_block(cfg, "ensemble"))
    count = _int(_get(cfg, "count", "config"), "config.count")
    seed = _int(_get(cfg, "seed", "config"), "config.seed")
    if count < 1:
        raise ConfigError("config.count: must be positive")
    validate(params)
    spectra = sample_spectra(params, count, seed, workers=ctx["threads"])
    write_csv(os.path.join(ctx["out"], "sample.csv"),
              ["units: squared singular values (dimensionless), one ascending spectrum per row",
               "gauge: not applicable"],
              [f"x{i + 1}" for i in range(params.N)], spectra.tolist())
    kappa = params.kappa if kind != "wishart" else None
    _manifest(ctx, {"params": _params_dict(kind, params), "count": count,
                    "kappa": kappa, "nu": params.nu})
    return EXIT["ok"]


def _t_grid(cfg):
    raw = _get(cfg, "t", "config")
    if isinstance(raw, list):
        ts = _nums(raw, "config.t")
    elif isinstance(raw, dict):
        lo = _num(_get(raw, "min", "config.t"), "config.t.min")
        hi = _num(_get(raw, "max", "config.t"), "config.t.max")
        n = _int(_get(raw, "points", "config.t"), "config.t.points")
        if not (0 < lo < hi and n >= 2):
            raise ConfigError("config.t: need 0 < min < max and points >= 2")
        ts = np.linspace(lo, hi, n).tolist()
    else:
        raise ConfigError("config.t: expected a list or {min, max, points}")
    if not ts or any(t <= 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ConfigError("config.t: points must be positive and increasing")
    return np.asarray(ts)


def _read_samples(path, N):
    if not os.path.exists(path):
        raise ConfigError(f"config.sample_file: {path} does not exist")
    cols, rows = read_csv(path)
    if not rows:
        return None
    if len(cols) != N or any(len(r) != N for r in rows):
        raise ConfigError(f"config.sample_file: expected {N} columns per spectrum")
    try:
        return np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"config.sample_file: {exc}") from None


def _empirical(ts, values, n_spectra):
    # histogram on cells centred at the grid points, normalised like rho_1
    mids = 0.5 * (ts[1:] + ts[:-1])
    edges = np.concatenate(([max(ts[0] - (mids[0] - ts[0]), 0.0)], mids,
                            [ts[-1] + (ts[-1] - mids[-1])]))
    counts = np.histogram(values.ravel(), bins=edges)[0]
    return counts / (n_spectra * np.diff(edges))


def cmd_density(ctx):
    cfg = ctx["config"]
    kind, params = parse_ensemble(_block(cfg, "ensemble"))
    ts = _t_grid(cfg)
    method = cfg.get("method", "gram-sum")
    k = FiniteKernel(kind, params, method, _num(cfg.get("tol", 1e-10), "config.tol"))
    rho = density_curve(k, ts)
    samples = None
    if cfg.get("sample_file"):
        samples = _read_samples(cfg["sample_file"], params.N)
    extra = {"params": _params_dict(kind, params), "method": method}
    comment = ["units: t is a squared singular value; rho1 and empirical are densities per unit t "
               "normalised to integrate to N",
               "gauge: gauge-free (diagonal of the kernel)"]
    if samples is None:
        rows = [(t, r, "") for t, r in zip(ts, rho)]
    else:
        bins = _int(cfg.get("bins", 25), "config.bins")
        if bins < 2:
            raise ConfigError("config.bins: need at least 2 bins")
        emp = _empirical(ts, samples, samples.shape[0])
        rows = [(t, r, e) for t, r, e in zip(ts, rho, emp)]
        chi2, dof, counts = chi_square_equiprobable(k, samples, bins)
        extra.update({"chi2": chi2, "dof": dof, "bins": bins, "counts": counts.tolist(),
                      "samples": int(samples.shape[0])})
        comment.append(f"chi2 = {chi2:.17g} over {bins} equal-probability bins, dof = {dof}")
        print(f"chi2 = {chi2:.6g}, dof = {dof}")
    write_csv(os.path.join(ctx["out"], "density.csv"), comment, ["t", "rho1", "empirical"], rows)
    _manifest(ctx, extra)
    return EXIT["ok"]


def cmd_scan(ctx):
    cfg = ctx["config"]
    mode = cfg.get("mode", "hard-edge")
    probe = _probe(cfg)
    tol = _num(cfg.get("tol", 1e-9), "config.tol")
    kappa = _int(cfg.get("kappa", 0), "config.kappa")
    nu = _int(cfg.get("nu", 0), "config.nu")
    p = _perturbations(cfg.get("perturbations"), "config.perturbations")
    if mode == "hard-edge":
        regime = cfg.get("regime", "III")
        if regime not in ("I", "II", "III"):
            raise ConfigError("config.regime: expected I, II or III")
        ladder = [_int(v, f"config.N_list[{i}]")
                  for i, v in enumerate(cfg.get("N_list", DEFAULT_LADDER["N"]))]
        tau = None
        if regime == "II":
            tau = _num(cfg.get("tau", 1.0), "config.tau")
            default = ("critical", tau)
        else:
            default = DEFAULT_SCHEDULE[regime]
        sb = cfg.get("schedule", {"rule": default[0], "value": default[1]})
        if not isinstance(sb, dict):
            raise ConfigError("config.schedule: expected {rule, value}")
        schedule = MuSchedule(_get(sb, "rule", "config.schedule"),
                              _num(_get(sb, "value", "config.schedule"), "config.schedule.value"))
        if regime == "II" and (schedule.rule != "critical" or schedule.value != tau):
            raise DomainError("regime II needs the critical schedule with value tau")
        param_name = "N"
    elif mode == "interpolation":
        direction = _get(cfg, "direction", "config")
        if direction not in ("to-I", "to-III"):
            raise ConfigError("config.direction: expected to-I or to-III")
        ladder = _nums(cfg.get("tau_list", DEFAULT_LADDER[direction]), "config.tau_list")
        param_name = "tau"
    else:
        raise ConfigError("config.mode: expected hard-edge or interpolation")
    if not ladder:
        raise ConfigError("config: empty ladder")
    if ctx["assert_trend"] and len(ladder) < 3:
        raise ConfigError("--assert-trend needs at least 3 ladder points")
    if mode == "hard-edge":
        sr = ScalingRegime(regime, p, tau, kappa, nu)
        for N in ladder:
            schedule(N)
        rows = hard_edge_scan(sr, schedule, ladder, probe, tol=tol, workers=ctx["threads"])
        extra = {"mode": mode, "regime": sr.as_dict(), "schedule": schedule.as_dict()}
        gauge = ("finite kernel in the density gauge, rescaled and gauge-corrected to match "
                 "the limit kernel")
    else:
        rows = interpolate_scan(p, kappa, nu, ladder, direction, probe, tol=tol,
                                workers=ctx["threads"])
        extra = {"mode": mode, "direction": direction, "kappa": kappa, "nu": nu,
                 "perturbations": p.as_dict()}
        gauge = "interpolating kernel rescaled and gauge-corrected to match the limit kernel"
    ok = trend_ok(rows)
    failed = [r for r in rows if r.error]
    extra.update({"trend_ok": ok, "failed_cells": len(failed)})
    write_csv(os.path.join(ctx["out"], "scan.csv"),
              ["units: x, y in the limit kernel's scaled variables; rel_error dimensionless",
               f"gauge: {gauge}"],
              [param_name, "x", "y", "finite", "limit", "rel_error", "est_error", "status"],
              [(int(r.param) if param_name == "N" else r.param, r.x, r.y, r.finite, r.limit,
                r.rel_error, r.est_error, r.error or "ok") for r in rows])
    _manifest(ctx, extra)
    for r in failed:
        print(f"cell {param_name}={r.param:g} ({r.x:g}, {r.y:g}) failed: {r.error}",
              file=sys.stderr)
    if failed:
        return EXIT["convergence"]
    if ctx["assert_trend"] and not ok:
        raise TrendFailure("relative error does not decrease monotonically along the ladder")
    return EXIT["ok"]


_HANDLERS = {"validate": cmd_validate, "kernel": cmd_kernel, "sample": cmd_sample,
             "density": cmd_density, "scan": cmd_scan}


def _parser():
    ap = argparse.ArgumentParser(prog="rmt-kit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"rmt-kit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, metavar="PATH", help="JSON run config")
        sp.add_argument("--out", default=".", metavar="DIR", help="output directory")
        sp.add_argument("--threads", type=int, default=None, metavar="K",
                        help="worker threads (default: $RMT_KIT_THREADS or 1)")
        sp.add_argument("--assert-trend", action="store_true",
                        help="exit 3 unless scan errors decrease along the ladder")
    return ap


def main(argv=None):
    """Entry point; returns the process exit code."""
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT["ok"] if exc.code == 0 else EXIT["config"]
    try:
        cfg = load_config(args.config)
        cmd = cfg.get("command", args.command)
        if cmd != args.command:
            raise ConfigError(f"config is for {cmd!r}, not {args.command!r}")
        ctx = {"command": args.command, "config": cfg, "out": args.out,
               "threads": _threads(args.threads), "assert_trend": args.assert_trend}
        return _HANDLERS[args.command](ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT["config"]
    except TrendFailure as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT["assertion"]
    except _NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT["convergence"]
    except RMTKitError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT["validation"]


if __name__ == "__main__":
    sys.exit(main())
