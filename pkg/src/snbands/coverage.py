"""Monte Carlo coverage of LR and Wald intervals under a known S-N model.

Each replicate draws a censored dataset from the true model, refits it and
records whether the LR and Wald intervals cover the true target value.
Replicate ``i`` of a study with seed ``s`` uses the generator seeded by
``SeedSequence([s, i])``, so any replicate can be regenerated on its own
and parallel runs aggregate to the same report.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import models
from .dist import ErrorFamily
from .errors import DomainError, RangeError, SNBandsError
from .intervals import ScalarTarget, lr_interval, wald_interval
from .likelihood import FitOptions, SNDataset, fit_ml
from .models import ModelSpec, Orientation, ParamVector

log = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.10


class CoverageAbortedError(SNBandsError, RuntimeError):
    """More than 10% of replicates failed; ``failures`` lists them."""

    def __init__(self, message, failures):
        super().__init__(message)
        self.failures = failures


@dataclass(frozen=True)
class SimDesign:
    """Experimental layout and true parameters of a coverage study.

    Parameters
    ----------
    spec : ModelSpec
    theta_true : ParamVector or sequence of float
    stress_levels : sequence of float
    allocation : sequence of int
        Specimens per stress level.
    censor_time : float
        Test stop in cycles; lives beyond it are recorded as runouts there.
    replicates : int
    seed : int
        Unsigned 64-bit study seed.
    """

    spec: ModelSpec
    theta_true: ParamVector
    stress_levels: tuple
    allocation: tuple
    censor_time: float
    replicates: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.theta_true, ParamVector):
            object.__setattr__(self, "theta_true", ParamVector.from_array(self.theta_true))
        levels = tuple(float(s) for s in self.stress_levels)
        alloc = tuple(int(a) for a in self.allocation)
        if len(levels) != len(alloc) or not levels:
            raise DomainError("stress_levels and allocation must be non-empty and equal length")
        if any(a < 0 for a in alloc) or sum(alloc) == 0:
            raise DomainError("allocation must be non-negative with a positive total")
        self.spec.check_stress(levels, "stress level")
        if not (self.censor_time > 0 and math.isfinite(self.censor_time)):
            raise DomainError("censor_time must be positive")
        if self.replicates < 1:
            raise DomainError("replicates must be at least 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if not self.spec.admissible(self.theta_true.as_array()):
            raise DomainError("theta_true is not admissible for the model")
        object.__setattr__(self, "stress_levels", levels)
        object.__setattr__(self, "allocation", alloc)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n(self):
        return sum(self.allocation)

    def to_json(self):
        return {
            "model": self.spec.to_json(),
            "theta_true": list(self.theta_true.as_array()),
            "stress_levels": list(self.stress_levels),
            "allocation": list(self.allocation),
            "censor_time": self.censor_time,
            "replicates": self.replicates,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj):
        try:
            return cls(
                spec=ModelSpec.from_json(obj["model"]),
                theta_true=obj["theta_true"],
                stress_levels=obj["stress_levels"],
                allocation=obj["allocation"],
                censor_time=float(obj["censor_time"]),
                replicates=int(obj.get("replicates", 1000)),
                seed=int(obj.get("seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed simulation design: {exc}") from exc


def _draw_errors(rng, family, size):
    if family is ErrorFamily.NORMAL:
        return rng.standard_normal(size)
    if family is ErrorFamily.SEV:
        # log of a unit exponential has the smallest extreme value law
        return np.log(rng.standard_exponential(size))
    return rng.logistic(size=size)


def replicate_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def simulate_dataset(design, index):
    """Censored dataset number ``index`` of ``design``.

    Life-specified: ``log N = log g(S) + sigma eps``.  Strength-specified:
    the specimen fails when ``log h(N) + sigma eps`` drops to ``log S``, so
    ``N = h^-1(log S - sigma eps)``; lives beyond the cycles domain are
    placed at its upper edge (and are then runouts whenever the censor time
    lies inside the domain), lives below it at its lower edge.
    """
    spec = design.spec
    rng = replicate_rng(design.seed, index)
    stress = np.repeat(design.stress_levels, design.allocation)
    eps = _draw_errors(rng, spec.error_family, stress.size)
    theta = design.theta_true.as_array()
    beta, sigma = theta[:-1], theta[-1]
    if spec.orientation is Orientation.LIFE:
        log_n = spec.curve.log_curve(beta, np.log(stress)) + sigma * eps
        life = np.exp(log_n)
    else:
        lo, hi = spec.curve_log_domain
        life = np.empty(stress.size)
        for i, (s, e) in enumerate(zip(stress, eps)):
            level = math.log(s) - sigma * e
            try:
                life[i] = models.invert_curve(spec.curve, beta, level, (lo, hi))
            except RangeError as exc:
                bottom, top = exc.attainable
                life[i] = math.exp(lo) if level > top else math.exp(hi)
    failed = life <= design.censor_time
    cycles = np.where(failed, life, design.censor_time)
    return SNDataset(stress, cycles, failed, label=f"replicate {index}")


@dataclass
class CoverageReport:
    target: ScalarTarget
    nominal: float
    true_value: float
    replicates: int
    lr_coverage: float
    wald_coverage: float
    replicate_failures: int
    wald_unavailable: int
    mc_stderr: float
    wald_mc_stderr: float
    rows: list = field(default_factory=list)

    def to_json(self):
        return {
            "target": self.target.to_json(),
            "nominal": self.nominal,
            "true_value": self.true_value,
            "replicates": self.replicates,
            "lr_coverage": self.lr_coverage,
            "wald_coverage": self.wald_coverage,
            "replicate_failures": self.replicate_failures,
            "wald_unavailable": self.wald_unavailable,
            "mc_stderr": self.mc_stderr,
            "wald_mc_stderr": self.wald_mc_stderr,
            "indicators": [r["lr_covered"] for r in self.rows],
        }

    def rows_csv(self):
        cols = ["replicate", "status", "lr_lower", "lr_upper", "lr_covered",
                "wald_lower", "wald_upper", "wald_covered"]
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(cols)
        for r in self.rows:
            w.writerow([_cell(r.get(c)) for c in cols])
        return out.getvalue()


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return f"{v:.9g}"
    return v


def mc_stderr(c, r):
    """Monte Carlo standard error of a coverage proportion ``c`` over ``r`` replicates."""
    return math.sqrt(c * (1.0 - c) / r) if r > 0 else float("nan")


def run_replicate(design, index, target, alpha, fit_options=None):
    """One replicate: simulate, fit, LR and Wald intervals, coverage flags."""
    spec = design.spec
    truth = target.value(spec, design.theta_true.as_array())
    row = {"replicate": index}
    try:
        data = simulate_dataset(design, index)
        fitted = fit_ml(spec, data, fit_options or FitOptions(starts=4))
        lr = lr_interval(fitted, data, target, alpha)
    except SNBandsError as exc:
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        return row
    row.update(status="ok", lr_lower=lr.lower, lr_upper=lr.upper,
               lr_covered=bool(lr.contains(truth)))
    try:
        wd = wald_interval(fitted, target, alpha)
        row.update(wald_lower=wd.lower, wald_upper=wd.upper,
                   wald_covered=bool(wd.contains(truth)))
    except SNBandsError:
        row.update(wald_covered=None)
    return row


def _run_one(args):
    return run_replicate(*args)


def coverage_study(design, target, alpha=0.10, fit_options=None, n_jobs=1,
                   progress_every=100):
    """Estimate LR and Wald coverage of ``target`` under ``design``.

    Replicates whose fit or LR interval fails are excluded and counted;
    more than 10% failures abort the study with
    :class:`CoverageAbortedError`.  A replicate without a Wald covariance
    still counts for LR coverage and is tallied in ``wald_unavailable``.
    The report is the same for any ``n_jobs``.
    """
    spec = design.spec
    target.validate(spec)
    truth = target.value(spec, design.theta_true.as_array())
    R = design.replicates
    limit = MAX_FAILURE_FRACTION * R
    jobs = [(design, i, target, alpha, fit_options) for i in range(R)]
    rows, failures = [], []

    def consume(row):
        rows.append(row)
        if row["status"] != "ok":
            failures.append(row)
            if len(failures) > limit:
                raise CoverageAbortedError(
                    f"{len(failures)} of {R} replicates failed (limit {limit:g})", failures
                )
        if progress_every and len(rows) % progress_every == 0:
            log.info("coverage study: %d/%d replicates, %d failed", len(rows), R, len(failures))

    if n_jobs == 1:
        for job in jobs:
            consume(_run_one(job))
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            for row in pool.map(_run_one, jobs, chunksize=8):
                consume(row)

    ok = [r for r in rows if r["status"] == "ok"]
    lr_hits = [r["lr_covered"] for r in ok]
    wald_hits = [r["wald_covered"] for r in ok if r.get("wald_covered") is not None]
    lr_cov = float(np.mean(lr_hits)) if lr_hits else float("nan")
    wald_cov = float(np.mean(wald_hits)) if wald_hits else float("nan")
    return CoverageReport(
        target=target,
        nominal=1.0 - alpha,
        true_value=float(truth),
        replicates=R,
        lr_coverage=lr_cov,
        wald_coverage=wald_cov,
        replicate_failures=len(failures),
        wald_unavailable=len(ok) - len(wald_hits),
        mc_stderr=mc_stderr(lr_cov, len(lr_hits)),
        wald_mc_stderr=mc_stderr(wald_cov, len(wald_hits)),
        rows=rows,
    )
