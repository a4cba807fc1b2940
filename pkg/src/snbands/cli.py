"""Command-line front end: ``snbands fit|bands|equiv|simulate``.

All commands read a JSON analysis config (``--config``) and, except
``simulate``, a CSV dataset (``--data`` or the config's ``data`` entry).
Results are written to ``--out`` once the command has finished.

Exit codes: 0 success; 1 an equivalence check failed or another analysis
error; 2 malformed CSV, JSON or config; 3 the ML fit did not converge;
4 ``equiv`` asked for Wald bands only.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import bands as bandmod
from .coverage import CoverageAbortedError, SimDesign, coverage_study
from .errors import DegenerateDataError, DomainError, OptimizationError, SNBandsError
from .intervals import ScalarTarget
from .likelihood import DataFormatError, FitOptions, fit_ml, read_csv
from .models import ModelSpec

log = logging.getLogger("snbands")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NOCONV, EXIT_WALD_EQUIV = 0, 1, 2, 3, 4


class InputError(Exception):
    """Malformed user input (exit code 2)."""


class FitFailed(Exception):
    """The ML fit did not converge or the data cannot be fitted (exit code 3)."""


# -- output helpers ------------------------------------------------------

def _round(obj):
    """Recursively format numbers at 9 significant digits; non-finite -> None."""
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(f"{v:.9g}") if math.isfinite(v) else None
    return obj


def dumps(obj):
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


def write_outputs(out_dir, files):
    """Write ``{name: text}`` into ``out_dir``, each file replaced atomically."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        fd, tmp = tempfile.mkstemp(dir=out, prefix=f".{name}.")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out / name)


# -- input -----------------------------------------------------------------

def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    cfg["_dir"] = str(Path(path).resolve().parent)
    return cfg


def _model(cfg):
    if "model" not in cfg:
        raise InputError("config has no 'model' section")
    try:
        return ModelSpec.from_json(cfg["model"])
    except DomainError as exc:
        raise InputError(f"invalid model: {exc}") from exc


def _data(cfg, override):
    path = override or cfg.get("data")
    if not path:
        raise InputError("no dataset: pass --data or set 'data' in the config")
    path = Path(path)
    if not path.is_absolute() and not override:
        path = Path(cfg["_dir"]) / path
    try:
        return read_csv(path)
    except DataFormatError as exc:
        raise InputError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise InputError(f"cannot read data {path}: {exc}") from exc


def _alpha(cfg, override):
    alpha = override if override is not None else cfg.get("alpha", 0.10)
    try:
        alpha = float(alpha)
    except (TypeError, ValueError):
        raise InputError(f"alpha must be a number, got {alpha!r}") from None
    if not 0.0 < alpha <= 1.0:
        raise InputError("alpha must lie in (0, 1]")
    return alpha


def _methods(cfg, override):
    m = (override or cfg.get("method", "lr")).lower()
    if m not in ("lr", "wald", "both"):
        raise InputError(f"method must be lr, wald or both, got {m!r}")
    return {"lr": ["LR"], "wald": ["Wald"], "both": ["LR", "Wald"]}[m]


def _fit_options(cfg, seed):
    opts = cfg.get("fit", {})
    return FitOptions(starts=int(opts.get("starts", 8)),
                      seed=int(seed if seed is not None else opts.get("seed", 0)))


def _fit(cfg, args, spec, data):
    try:
        return fit_ml(spec, data, _fit_options(cfg, args.seed))
    except DomainError as exc:
        raise InputError(f"data do not fit the model's working domain: {exc}") from exc
    except (OptimizationError, DegenerateDataError) as exc:
        raise FitFailed(str(exc)) from exc


def fit_report(fitted, data):
    cov = fitted.wald_cov
    return {
        "model": fitted.spec.to_json(),
        "theta_hat": list(fitted.theta),
        "loglik_hat": fitted.loglik_hat,
        "wald_cov": None if cov is None else cov.tolist(),
        "standard_errors": None if cov is None else list(fitted.standard_errors),
        "converged": fitted.converged,
        "iterations": fitted.iterations,
        "diagnostics": fitted.diagnostics,
        "data": {"n": data.n, "failures": data.n_failures, "label": data.label},
        "model_hash": bandmod.model_hash(fitted),
    }


# -- commands ----------------------------------------------------------------

def cmd_fit(cfg, args):
    spec = _model(cfg)
    data = _data(cfg, args.data)
    fitted = _fit(cfg, args, spec, data)
    text = dumps(fit_report(fitted, data))
    return EXIT_OK, {"fit.json": text}


def _band_grid(entry, family, spec, data):
    if "grid" in entry:
        try:
            grid = np.array(sorted(float(v) for v in entry["grid"]))
        except (TypeError, ValueError) as exc:
            raise InputError(f"bad grid: {exc}") from exc
        return grid
    n = int(entry.get("n", 25))
    rng = entry.get("range")
    if family.abscissa_kind == "probability":
        lo, hi = rng or (0.01, 0.99)
        return bandmod.probability_grid(spec, n, lo, hi)
    if rng:
        return bandmod.log_grid(rng[0], rng[1], n)
    return (bandmod.cycles_grid(data, n) if family.abscissa_kind == "cycles"
            else bandmod.stress_grid(data, n))


def _band_fixed(entry, family, fitted, data):
    key = family.fixed_name
    if key in entry:
        return float(entry[key])
    stress, cycles = bandmod.default_conditions(fitted, data)
    return {"stress": stress, "cycles": cycles, "p": 0.10}[key]


def cmd_bands(cfg, args):
    from .plotting import band_svg

    spec = _model(cfg)
    data = _data(cfg, args.data)
    alpha = _alpha(cfg, args.alpha)
    methods = _methods(cfg, args.method)
    fitted = _fit(cfg, args, spec, data)
    entries = cfg.get("bands") or [{"family": "life-cdf"}]
    files = {"fit.json": dumps(fit_report(fitted, data))}
    summary = []
    for i, entry in enumerate(entries):
        try:
            family = bandmod.BandFamily(entry["family"])
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"band entry {i}: unknown or missing family ({exc})") from exc
        grid = _band_grid(entry, family, spec, data)
        fixed = _band_fixed(entry, family, fitted, data)
        for method in methods:
            try:
                b = bandmod.band(fitted, data, family, grid, alpha, method, fixed=fixed)
            except DomainError as exc:
                raise InputError(f"band entry {i}: {exc}") from exc
            stem = f"band{i:02d}_{family.value}_{method.lower()}"
            files[f"{stem}.csv"] = b.to_csv()
            files[f"{stem}.json"] = dumps(b.to_json())
            files[f"{stem}.svg"] = band_svg(b, data, spec.error_family)
            summary.append({"file": stem, "family": family.value, "method": method,
                            "failures": len(b.failures)})
            if b.failures:
                log.warning("%s: %d grid points failed", stem, len(b.failures))
    queries = cfg.get("safe_stress", [])
    if queries:
        results = []
        for q in queries:
            try:
                p, cycles = float(q["p"]), float(q["cycles"])
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"safe_stress query needs p and cycles ({exc})") from exc
            r = bandmod.safe_stress(fitted, data, p, cycles, alpha)
            results.append(r)
            print(f"safe stress p={p:g} at {cycles:.9g} cycles "
                  f"(one-sided {100 * r['one_sided_level']:g}% lower bound): "
                  f"cdf route {_fmt(r['cdf_route'])}, life-qf route {_fmt(r['life_qf_route'])}, "
                  f"strength qf {_fmt(r['strength_qf'])}")
        files["safe_stress.json"] = dumps(results)
    files["bands.json"] = dumps({"alpha": alpha, "bands": summary})
    return EXIT_OK, files


def _fmt(v):
    return "n/a" if v is None else f"{v:.9g}"


def cmd_equiv(cfg, args):
    methods = _methods(cfg, args.method)
    if methods == ["Wald"]:
        print("equiv: the band equivalences hold exactly only for likelihood-ratio "
              "bands; Wald bands agree only approximately, so there is nothing exact "
              "to verify. Rerun with --method lr or --method both.", file=sys.stderr)
        return EXIT_WALD_EQUIV, {}
    spec = _model(cfg)
    data = _data(cfg, args.data)
    alpha = _alpha(cfg, args.alpha)
    fitted = _fit(cfg, args, spec, data)
    opts = cfg.get("equiv", {})
    tol = float(opts.get("tol", 1e-3))
    reports = bandmod.equivalence_suite(
        fitted, data, alpha, p=float(opts.get("p", 0.10)), stress=opts.get("stress"),
        cycles=opts.get("cycles"), n_grid=int(opts.get("n_grid", 25)), tol=tol,
    )
    doc = {"alpha": alpha, "orientation": spec.orientation.value,
           "checks": [r.to_json() for r in reports]}
    if "Wald" in methods:
        doc["wald_transpose"] = _wald_transposes(fitted, data, alpha, tol)
    for r in reports:
        print(f"{r.result_id} {'PASS' if r.passed else 'FAIL'} "
              f"max-discrepancy={r.max_discrepancy:.3e} tol={r.tolerance:g}: {r.description}")
    ok = all(r.passed for r in reports)
    return (EXIT_OK if ok else EXIT_FAIL), {"equiv.json": dumps(doc)}


def _wald_transposes(fitted, data, alpha, tol):
    """Wald analogues of the grid transpositions; informational only."""
    stress, cycles = bandmod.default_conditions(fitted, data)
    pgrid = bandmod.probability_grid(fitted.spec, 25, 0.02, 0.98)
    out = []
    for qf_fam, cdf_fam, fixed in (("life-qf", "life-cdf", stress),
                                   ("strength-qf", "strength-cdf", cycles)):
        qb = bandmod.band(fitted, data, qf_fam, pgrid, alpha, "Wald", fixed=fixed)
        cb = bandmod.band(fitted, data, cdf_fam, bandmod.matched_grid(qb), alpha, "Wald",
                          fixed=fixed)
        rep = bandmod.check_inverse_band_transpose(cb, qb, tol, fitted.spec.error_family)
        doc = rep.to_json()
        doc["note"] = "Wald bands: agreement is approximate; a FAIL is expected"
        out.append(doc)
    return out


def cmd_simulate(cfg, args):
    sim = cfg.get("simulation")
    if not isinstance(sim, dict):
        raise InputError("config has no 'simulation' section")
    try:
        design_obj = dict(sim["design"])
        if "model" not in design_obj:
            design_obj["model"] = cfg["model"]
        if args.seed is not None:
            design_obj["seed"] = args.seed
        design = SimDesign.from_json(design_obj)
        target = ScalarTarget.from_json(sim["target"])
        target.validate(design.spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid simulation config: {exc}") from exc
    alpha = _alpha(sim, args.alpha)
    opts = sim.get("fit", {})
    report = coverage_study(design, target, alpha,
                            FitOptions(starts=int(opts.get("starts", 4))),
                            n_jobs=int(sim.get("n_jobs", 1)))
    doc = report.to_json()
    doc["design"] = design.to_json()
    print(f"LR coverage {report.lr_coverage:.4f} (mc-stderr {report.mc_stderr:.4f}), "
          f"Wald coverage {report.wald_coverage:.4f}, nominal {report.nominal:g}, "
          f"failures {report.replicate_failures}")
    return EXIT_OK, {"coverage.json": dumps(doc), "replicates.csv": report.rows_csv()}


COMMANDS = {"fit": cmd_fit, "bands": cmd_bands, "equiv": cmd_equiv, "simulate": cmd_simulate}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="snbands",
        description="Censored S-N regression, LR confidence bands and band-equivalence checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="analysis config (JSON)")
        p.add_argument("--data", help="dataset CSV with header stress,cycles,status")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--alpha", type=float, help="1 - confidence level (two-sided)")
        p.add_argument("--method", choices=("lr", "wald", "both"))
        p.add_argument("--seed", type=int, help="seed for fit starts or simulation (u64)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "simulate"
                        else logging.WARNING, format="%(levelname)s %(message)s",
                        stream=sys.stderr)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_INPUT
    try:
        cfg = load_config(args.config)
        code, files = COMMANDS[args.command](cfg, args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FitFailed as exc:
        print(f"error: fit did not converge: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except CoverageAbortedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except SNBandsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    write_outputs(args.out, files)
    return code


if __name__ == "__main__":
    sys.exit(main())
