"""Command-line front end.

::

    kreinheat spectrum     --config run.cfg [--out DIR] [--theta 0,inf]
    kreinheat krein-check  --config run.cfg
    kreinheat heat-trace   --config run.cfg
    kreinheat expansion    --config run.cfg --mode predict|fit|compare

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 a checked identity or prediction failed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import random
import sys
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .errors import NumericalError, ScientificCheckError, ValidationError
from .model import ExtensionParam, Potential, ProblemSpec, Tolerances, validate
from .specfun import FnAccuracy

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4
# trace curves carry ~1e-8 absolute error; smaller terms are not fitted
BASIS_NOISE = 1e-7

_DEFAULTS = {
    "nu": None,
    "potential_coeffs": "",
    "trunc_radius": "1",
    "far_cutoff": "30",
    "far_offset": "0",
    "mode": "dirichlet",
    "allow_extreme_nu": "false",
    "tolerances": "",
    "theta": "0",
    "lambda_max": "",
    "t_grid": "1e-3:1:40",
    "z_grid": "100:10000:16",
    "samples": "100",
    "seed": "0",
    "threshold": "1e-8",
    "theta_range": "-1:10",
    "lambda_range": "-50:-2",
    "truncation": "3",
    "max_k": "4",
    "fit_grid": "1e-3:0.05:40",
    "fit_basis": "auto",
    "basis_max": "2.2",
    "free_exponent": "none",
    "compare_terms": "0/0,0/1",
    "compare_tol_const": "0.01",
    "compare_tol_coef": "0.02",
}


@dataclass
class RunConfig:
    spec: ProblemSpec
    thetas: list[ExtensionParam]
    raw: dict
    out: str
    fmt: str = "csv"
    plot: bool = True
    extra: dict = field(default_factory=dict)

    def get(self, key: str) -> str:
        return self.raw[key]

    def num(self, key: str) -> float:
        try:
            return float(self.raw[key])
        except ValueError as exc:
            raise ValidationError(f"config key {key!r} must be a number, got {self.raw[key]!r}") from exc

    def range2(self, key: str) -> tuple[float, float]:
        parts = self.raw[key].split(":")
        if len(parts) != 2:
            raise ValidationError(f"config key {key!r} must be 'lo:hi'")
        lo, hi = (float(p) for p in parts)
        if not lo < hi:
            raise ValidationError(f"config key {key!r} needs lo < hi")
        return lo, hi

    def log_grid(self, key: str) -> np.ndarray:
        text = self.raw[key].strip()
        if not text:
            raise ValidationError(f"config key {key!r} is empty")
        parts = text.split(":")
        if len(parts) == 3:
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1 or not (0 < lo <= hi):
                raise ValidationError(f"config key {key!r}: need 0 < min <= max and n >= 1")
            return np.geomspace(lo, hi, n)
        vals = np.array([float(v) for v in text.split(",") if v.strip()])
        if vals.size == 0:
            raise ValidationError(f"config key {key!r} is empty")
        return np.sort(vals)


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in _DEFAULTS:
            raise ValidationError(f"config line {lineno}: unknown key {k!r}")
        raw[k] = v
    out = {k: v for k, v in _DEFAULTS.items() if v is not None}
    out.update(raw)
    if "nu" not in out:
        raise ValidationError("config must set nu")
    return out


def _parse_tolerances(text: str) -> Tolerances:
    vals = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if ":" not in item:
            raise ValidationError(f"tolerance entry {item!r} must be name:value")
        k, v = (s.strip() for s in item.split(":", 1))
        vals[k] = float(v)
    unknown = set(vals) - {"fn_rel_tol", "ode_rtol", "match_tol"}
    if unknown:
        raise ValidationError(f"unknown tolerance names {sorted(unknown)}")
    fn = FnAccuracy(vals.pop("fn_rel_tol")) if "fn_rel_tol" in vals else FnAccuracy()
    return Tolerances(fn=fn, **vals)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise ValidationError(f"expected a boolean, got {text!r}")


def build_config(raw: dict, out: str, fmt: str, theta_override: str | None, plot: bool) -> RunConfig:
    try:
        coeffs = tuple(float(c) for c in raw["potential_coeffs"].split(",") if c.strip())
        spec = ProblemSpec(
            nu=float(raw["nu"]),
            potential=Potential(coeffs),
            trunc_radius=float(raw["trunc_radius"]),
            far_cutoff=float(raw["far_cutoff"]),
            far_offset=float(raw["far_offset"]),
            mode=raw["mode"],
            tolerances=_parse_tolerances(raw["tolerances"]),
            allow_extreme_nu=_parse_bool(raw["allow_extreme_nu"]),
        )
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed number in config: {exc}") from exc
    spec = validate(spec)
    theta_text = theta_override if theta_override is not None else raw["theta"]
    thetas = [ExtensionParam.parse(s) for s in theta_text.split(",") if s.strip()]
    if not thetas:
        raise ValidationError("theta list is empty")
    if fmt not in ("csv", "json"):
        raise ValidationError(f"format must be csv or json, got {fmt!r}")
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ValidationError(f"output directory {out!r} is not writable")
    return RunConfig(spec, thetas, raw, out, fmt, plot)


def _atomic_write(path: str, text: str) -> str:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
    return path


def _table(cfg: RunConfig, stem: str, header: list[str], rows: list[list]) -> str:
    if cfg.fmt == "json":
        doc = [dict(zip(header, r)) for r in rows]
        return _atomic_write(os.path.join(cfg.out, stem + ".json"), json.dumps(doc, indent=2, sort_keys=True) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return _atomic_write(os.path.join(cfg.out, stem + ".csv"), buf.getvalue())


def _manifest(cfg: RunConfig, command: str, outputs: list[str]):
    import numba
    import scipy

    canon = "\n".join(f"{k}={cfg.raw[k]}" for k in sorted(cfg.raw))
    tol = cfg.spec.tolerances
    doc = {
        "command": command,
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        "config": dict(sorted(cfg.raw.items())),
        "theta": [t.label() for t in cfg.thetas],
        "tolerances": {"fn_rel_tol": tol.fn.rel_tol, "ode_rtol": tol.ode_rtol, "match_tol": tol.match_tol},
        "versions": {
            "kreinheat": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    _atomic_write(os.path.join(cfg.out, "run_manifest.json"), json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("KREINHEAT_THREADS", "1")))
    except ValueError:
        return 1


def _dirichlet(spec: ProblemSpec) -> ProblemSpec:
    return spec if spec.mode == "dirichlet" else replace(spec, mode="dirichlet")


def cmd_spectrum(cfg: RunConfig) -> int:
    from .spectrum import eigenvalues

    spec = _dirichlet(cfg.spec)
    lam_max = cfg.num("lambda_max") if cfg.raw["lambda_max"] else 1000.0
    outputs = []
    for th in cfg.thetas:
        res = eigenvalues(spec, th, lam_max)
        rows = [[i + 1, float(l), float(r)] for i, (l, r) in enumerate(zip(res.eigenvalues, res.residuals))]
        outputs.append(_table(cfg, f"spectrum_{th.label()}", ["n", "lambda", "residual"], rows))
        if cfg.plot:
            from .plotting import plot_spectrum

            outputs.append(plot_spectrum(np.arange(1, len(res) + 1), res.eigenvalues, th.label(),
                                         os.path.join(cfg.out, f"spectrum_{th.label()}.png")))
    _manifest(cfg, "spectrum", outputs)
    return EXIT_OK


def cmd_krein_check(cfg: RunConfig) -> int:
    from .green_krein import krein_residual

    spec = cfg.spec
    n = int(cfg.num("samples"))
    if n < 1:
        raise ValidationError("samples must be >= 1")
    rng = random.Random(int(cfg.num("seed")))
    t_lo, t_hi = cfg.range2("theta_range")
    l_lo, l_hi = cfg.range2("lambda_range")
    if l_hi >= 0:
        raise ValidationError("lambda_range must lie below 0")
    R = spec.trunc_radius
    pts = []
    for i in range(n):
        th = 0.0 if i == 0 else rng.uniform(t_lo, t_hi)
        pts.append((th, rng.uniform(l_lo, l_hi), rng.uniform(0.01 * R, 0.99 * R), rng.uniform(0.01 * R, 0.99 * R)))
    corrupt = cfg.extra.get("corrupt_k", 1.0)

    def one(p):
        return krein_residual(spec, p[0], p[1], p[2], p[3], _corrupt_K=corrupt)

    with ThreadPoolExecutor(max_workers=_threads()) as ex:
        res = list(ex.map(one, pts))
    rows = [[*map(float, p), float(r)] for p, r in zip(pts, res)]
    outputs = [_table(cfg, "krein_residuals", ["theta", "lambda", "x", "x_prime", "residual"], rows)]
    worst = max(abs(r) for r in res)
    threshold = cfg.num("threshold")
    print(f"max_residual={worst:.3e}")
    if cfg.plot:
        from .plotting import plot_residuals

        outputs.append(plot_residuals(res, threshold, os.path.join(cfg.out, "krein_residuals.png")))
    _manifest(cfg, "krein-check", outputs)
    if not worst < threshold:
        raise ScientificCheckError(f"Krein identity violated: max residual {worst:.3e} >= {threshold:.1e}")
    return EXIT_OK


def _trace_curves(cfg: RunConfig, grid_key: str):
    from .heattrace import heat_trace_diff

    spec = _dirichlet(cfg.spec)
    t = cfg.log_grid(grid_key)
    lam_max = cfg.num("lambda_max") if cfg.raw["lambda_max"] else None
    curves = {}
    for th in cfg.thetas:
        if th.is_infinite:
            raise ValidationError("heat traces are taken relative to theta = inf; pass finite theta values")
        curves[th] = heat_trace_diff(spec, th, t, lambda_max=lam_max)
    return curves


def cmd_heat_trace(cfg: RunConfig) -> int:
    curves = _trace_curves(cfg, "t_grid")
    outputs = []
    for th, c in curves.items():
        stem = f"trace_{th.label()}"
        if cfg.fmt == "csv":
            outputs.append(_atomic_write(os.path.join(cfg.out, stem + ".csv"), c.to_csv()))
        else:
            rows = [[float(a), float(b), float(e)] for a, b, e in zip(c.t, c.values, c.tail_bounds)]
            outputs.append(_table(cfg, stem, ["t", "value", "tail_bound"], rows))
        if cfg.plot:
            from .plotting import plot_trace

            outputs.append(plot_trace(c.t, c.values, th.label(), os.path.join(cfg.out, stem + ".png")))
    _manifest(cfg, "heat-trace", outputs)
    return EXIT_OK


def _predict(cfg: RunConfig, theta: float):
    from .asymptotics import extract_base_trace_series, extract_H_series, predict_heat_expansion

    hl = validate(replace(cfg.spec, mode="halfline"))
    z = cfg.log_grid("z_grid")
    max_k = int(cfg.num("max_k"))
    trunc = cfg.num("truncation")
    H = extract_H_series(hl, z, max_k=max_k, truncation=trunc + 1.0)
    B, _ = extract_base_trace_series(hl, z, max_k=max_k, truncation=trunc + 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return predict_heat_expansion(hl.nu, theta, H, B, truncation=trunc)


def _parse_terms(text: str):
    from .series import LatticeExponent

    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        try:
            p, q = item.split("/")
            out.append(LatticeExponent(int(p), int(q)))
        except ValueError as exc:
            raise ValidationError(f"lattice term {item!r} must be 'p/q'") from exc
    return out


def _fit(cfg: RunConfig, theta: ExtensionParam, pred, fixed: bool = False, curve=None):
    from .asymptotics import fit_trace_curve, lattice_basis

    if curve is None:
        curve = _trace_curves(replace(cfg, thetas=[theta]), "fit_grid")[theta]
    bmax = cfg.num("basis_max")
    if cfg.raw["fit_basis"].strip() == "auto":
        basis = lattice_basis(pred, bmax, min_abs=BASIS_NOISE, t_max=float(curve.t[-1]))
    else:
        basis = _parse_terms(cfg.raw["fit_basis"])
    fe = cfg.raw["free_exponent"].strip().lower()
    free = None if (fe == "none" or fixed) else ("auto" if fe == "auto" else float(fe))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return fit_trace_curve(curve, basis, nu=cfg.spec.nu, free_exponent=free), curve


def cmd_expansion(cfg: RunConfig, mode: str) -> int:
    if len(cfg.thetas) != 1 or cfg.thetas[0].is_infinite:
        raise ValidationError("expansion takes exactly one finite theta")
    th = cfg.thetas[0]
    pred = _predict(cfg, th.theta)
    outputs = []
    if mode == "predict":
        outputs.append(_atomic_write(os.path.join(cfg.out, "expansion.json"), pred.to_json() + "\n"))
        _manifest(cfg, "expansion predict", outputs)
        return EXIT_OK
    fit, curve = _fit(cfg, th, pred)
    if mode == "fit":
        outputs.append(_atomic_write(os.path.join(cfg.out, "fit_report.json"), fit.to_json() + "\n"))
        _manifest(cfg, "expansion fit", outputs)
        return EXIT_OK
    if mode != "compare":
        raise ValidationError(f"unknown expansion mode {mode!r}")

    # coefficients are gated against the fit at the known order; a free-exponent
    # fit, when requested, only reports the recovered exponent
    free_fit = fit if fit.free_exponent is not None else None
    if free_fit is not None:
        fit, _ = _fit(cfg, th, pred, fixed=True, curve=curve)
    nu = cfg.spec.nu
    gated = {(e.p, e.q) for e in _parse_terms(cfg.raw["compare_terms"])}
    tol_const, tol_coef = cfg.num("compare_tol_const"), cfg.num("compare_tol_coef")
    rows, breaches = [], []
    exps, pv, fv = [], [], []
    for e, c in pred.collapsed().items():
        val = e.value(nu)
        try:
            f = fit.coefficient_of(e)
        except KeyError:
            continue
        gap = abs(f - c) / abs(c) if c != 0 else math.inf
        rows.append([str(e), float(val), float(c), float(f), float(gap)])
        exps.append(val)
        pv.append(c)
        fv.append(f)
        if (e.p, e.q) in gated:
            tol = tol_const if (e.p, e.q) == (0, 0) else tol_coef
            if not gap <= tol:
                breaches.append(f"{e}: gap {gap:.3e} > {tol}")
    outputs.append(_table(cfg, "compare", ["term", "exponent", "predicted", "fitted", "relative_gap"], rows))
    if free_fit is not None:
        lo, hi = free_fit.free_ci or (math.nan, math.nan)
        print(f"free_exponent={free_fit.free_exponent:.6f} ci=[{lo:.6f},{hi:.6f}]")
    if cfg.plot and exps:
        from .plotting import plot_comparison

        outputs.append(plot_comparison(exps, pv, fv, os.path.join(cfg.out, "compare.png")))
    _manifest(cfg, "expansion compare", outputs)
    if breaches:
        raise ScientificCheckError("prediction and fit disagree: " + "; ".join(breaches))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kreinheat", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="flat key = value configuration file")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--format", default="csv", choices=("csv", "json"))
        p.add_argument("--theta", default=None, help="comma-separated theta list, 'inf' allowed")
        p.add_argument("--no-plot", action="store_true", help="skip PNG figures")

    common(sub.add_parser("spectrum", help="eigenvalues per extension"))
    kc = sub.add_parser("krein-check", help="randomized check of the Krein resolvent identity")
    common(kc)
    kc.add_argument("--corrupt-k", type=float, default=1.0, help=argparse.SUPPRESS)
    common(sub.add_parser("heat-trace", help="trace difference curves"))
    ex = sub.add_parser("expansion", help="predict, fit or compare the small-t expansion")
    common(ex)
    ex.add_argument("--mode", choices=("predict", "fit", "compare"), default="predict")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = parse_config_text(fh.read())
        cfg = build_config(raw, args.out, args.format, args.theta, not args.no_plot)
        if args.command == "spectrum":
            return cmd_spectrum(cfg)
        if args.command == "krein-check":
            cfg.extra["corrupt_k"] = args.corrupt_k
            return cmd_krein_check(cfg)
        if args.command == "heat-trace":
            return cmd_heat_trace(cfg)
        return cmd_expansion(cfg, args.mode)
    except (ValidationError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ScientificCheckError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
