"""Pointwise confidence bands and checks of the band-equivalence results.

A band is a grid of pointwise intervals for one of six curve families.
Pointwise LR bands of mutually inverse monotone functions coincide after
transposition; the ``check_*`` functions verify the concrete instances of
that fact numerically and return an :class:`EquivalenceReport`.

Result identifiers used in reports:

====  =====================================================================
R1    general transposition of two bands of mutually inverse functions
R2    life-specified model: cdf/qf band equivalence (life, induced strength)
R3    life-specified model: life-qf vs strength-qf band equivalence
R4    strength-specified model: strength cdf/qf band equivalence
R5    strength-specified model: induced life cdf/qf band equivalence
R6    strength-specified model: strength-qf vs life-qf band equivalence
====  =====================================================================
"""
from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import dist, models
from .errors import DomainError, PreconditionError, SNBandsError
from .intervals import ScalarTarget, lr_interval, wald_interval
from .models import Orientation


class BandFamily(str, enum.Enum):
    LIFE_CDF = "life-cdf"                              # fixed stress, grid over t
    LIFE_QF = "life-qf"                                # fixed stress, grid over p
    LIFE_QF_VS_STRESS = "life-qf-vs-stress"            # fixed p, grid over stress
    STRENGTH_CDF = "strength-cdf"                      # fixed cycles, grid over x
    STRENGTH_QF = "strength-qf"                        # fixed cycles, grid over p
    STRENGTH_QF_VS_CYCLES = "strength-qf-vs-cycles"    # fixed p, grid over cycles

    @property
    def fixed_name(self):
        return {
            "life-cdf": "stress", "life-qf": "stress", "life-qf-vs-stress": "p",
            "strength-cdf": "cycles", "strength-qf": "cycles",
            "strength-qf-vs-cycles": "p",
        }[self.value]

    @property
    def abscissa_kind(self):
        return {
            "life-cdf": "cycles", "life-qf": "probability",
            "life-qf-vs-stress": "stress", "strength-cdf": "stress",
            "strength-qf": "probability", "strength-qf-vs-cycles": "cycles",
        }[self.value]

    @property
    def ordinate_kind(self):
        return {
            "life-cdf": "probability", "life-qf": "cycles",
            "life-qf-vs-stress": "cycles", "strength-cdf": "probability",
            "strength-qf": "stress", "strength-qf-vs-cycles": "stress",
        }[self.value]

    @property
    def increasing(self):
        return self.abscissa_kind == "probability" or self.ordinate_kind == "probability"


def point_target(family, fixed, a):
    """The :class:`ScalarTarget` of ``family`` at abscissa ``a``."""
    family = BandFamily(family)
    if family is BandFamily.LIFE_CDF:
        return ScalarTarget.life_cdf(a, fixed)
    if family is BandFamily.LIFE_QF:
        return ScalarTarget.life_quantile(a, fixed)
    if family is BandFamily.LIFE_QF_VS_STRESS:
        return ScalarTarget.life_quantile(fixed, a)
    if family is BandFamily.STRENGTH_CDF:
        return ScalarTarget.strength_cdf(a, fixed)
    if family is BandFamily.STRENGTH_QF:
        return ScalarTarget.strength_quantile(a, fixed)
    return ScalarTarget.strength_quantile(fixed, a)


@dataclass
class ConfidenceBand:
    family: BandFamily
    fixed: float
    grid: np.ndarray
    estimates: np.ndarray
    lowers: np.ndarray
    uppers: np.ndarray
    level: float
    method: str
    lower_boundary: np.ndarray
    upper_boundary: np.ndarray
    failures: list = field(default_factory=list)
    model_hash: str = ""

    @property
    def has_failures(self):
        return bool(self.failures)

    def to_csv(self):
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["abscissa", "estimate", "lower", "upper"])
        for row in zip(self.grid, self.estimates, self.lowers, self.uppers):
            w.writerow([_fmt(v) for v in row])
        return out.getvalue()

    def to_json(self):
        return {
            "family": self.family.value,
            self.family.fixed_name: self.fixed,
            "level": self.level,
            "method": self.method,
            "model_hash": self.model_hash,
            "abscissa": [_num(v) for v in self.grid],
            "estimate": [_num(v) for v in self.estimates],
            "lower": [_num(v) for v in self.lowers],
            "upper": [_num(v) for v in self.uppers],
            "lower_boundary": [bool(b) for b in self.lower_boundary],
            "upper_boundary": [bool(b) for b in self.upper_boundary],
            "failures": self.failures,
        }


def _fmt(v):
    return "nan" if not np.isfinite(v) else f"{v:.9g}"


def _num(v):
    return None if not np.isfinite(v) else float(f"{v:.9g}")


def model_hash(fitted):
    payload = json.dumps({"model": fitted.spec.to_json(),
                          "theta": [f"{v:.12g}" for v in fitted.theta]}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def band(fitted, data, family, grid, alpha=0.10, method="LR", fixed=None):
    """Pointwise confidence band over ``grid``.

    Parameters
    ----------
    family : BandFamily or str
    grid : array_like
        Sorted abscissae: cycles, stress or probabilities per ``family``.
    fixed : float
        The fixed stress, cycles or probability of the family.
    method : {"LR", "Wald"}

    Per-point failures leave ``nan`` endpoints flagged as boundary and are
    listed in ``failures``.
    """
    family = BandFamily(family)
    method = method.upper() if method.lower() == "lr" else method.capitalize()
    if method not in ("LR", "Wald"):
        raise DomainError(f"unknown band method {method!r}")
    if fixed is None:
        raise DomainError(f"{family.value} band needs the fixed {family.fixed_name}")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("band grid must be a non-empty increasing sequence")
    m = grid.size
    est, lo, hi = np.full(m, np.nan), np.full(m, np.nan), np.full(m, np.nan)
    lob, hib = np.zeros(m, dtype=bool), np.zeros(m, dtype=bool)
    failures = []
    for i, a in enumerate(grid):
        try:
            tg = point_target(family, fixed, float(a))
            if method == "LR":
                iv = lr_interval(fitted, data, tg, alpha)
            else:
                iv = wald_interval(fitted, tg, alpha)
        except SNBandsError as exc:
            failures.append({"index": i, "abscissa": float(a), "error": str(exc)})
            lob[i] = hib[i] = True
            try:
                est[i] = tg.value(fitted.spec, fitted.theta)
            except (SNBandsError, UnboundLocalError):
                pass
            continue
        est[i], lo[i], hi[i] = iv.estimate, iv.lower, iv.upper
        lob[i], hib[i] = iv.lower_boundary, iv.upper_boundary
    return ConfidenceBand(family=family, fixed=float(fixed), grid=grid, estimates=est,
                          lowers=lo, uppers=hi, level=1.0 - alpha, method=method,
                          lower_boundary=lob, upper_boundary=hib, failures=failures,
                          model_hash=model_hash(fitted))


# -- default grids ------------------------------------------------------

def probability_grid(spec, n=25, lo=0.01, hi=0.99):
    """``n`` probabilities equispaced on the error family's quantile scale."""
    fam = spec.error_family
    z = np.linspace(dist.std_quantile(fam, lo), dist.std_quantile(fam, hi), n)
    return np.asarray(dist.std_cdf(fam, z))


def log_grid(lo, hi, n=25):
    """``n`` log-equispaced points from ``lo`` to ``hi``, endpoints exact."""
    grid = np.exp(np.linspace(math.log(lo), math.log(hi), n))
    grid[0] = lo
    if n > 1:
        grid[-1] = hi
    return grid


def stress_grid(data, n=25):
    return log_grid(data.stress.min(), data.stress.max(), n)


def cycles_grid(data, n=25):
    return log_grid(data.cycles.min(), data.cycles.max(), n)


def matched_grid(qf_band):
    """Abscissae for the inverse band that mirror ``qf_band``'s grid.

    The point estimates of a qf band (or a qf-vs-condition band) are the
    abscissae at which the inverse function's estimate takes the qf grid's
    values, so the two bands share their node layout after transposition.
    Non-finite estimates are dropped.
    """
    est = np.asarray(qf_band.estimates, dtype=float)
    est = est[np.isfinite(est)]
    return np.unique(est)


# -- equivalence reports --------------------------------------------------

@dataclass
class EquivalenceReport:
    result_id: str
    description: str
    max_discrepancy: float
    tolerance: float
    grid: list
    checked: int
    skipped: int = 0
    details: list = field(default_factory=list)

    @property
    def passed(self):
        return self.checked > 0 and self.max_discrepancy <= self.tolerance

    def to_json(self):
        return {
            "result_id": self.result_id,
            "description": self.description,
            "max_discrepancy": self.max_discrepancy,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "grid": [float(g) for g in self.grid],
            "checked": self.checked,
            "skipped": self.skipped,
            "details": self.details,
        }


def _report(result_id, description, grid, devs, tol, skipped, details):
    devs = [d for d in devs if d is not None]
    return EquivalenceReport(
        result_id=result_id,
        description=description,
        max_discrepancy=float(max(devs)) if devs else float("nan"),
        tolerance=tol,
        grid=list(grid),
        checked=len(devs),
        skipped=skipped,
        details=details,
    )


def _require_lr(method):
    if method.upper() != "LR":
        raise PreconditionError(
            "band equivalence holds exactly only for likelihood-ratio bands; "
            "Wald bands agree only approximately"
        )


def check_cdf_qf_equivalence(fitted, data, variable, fixed, alpha=0.10, grid_p=None,
                             tol=1e-3, method="LR"):
    """cdf and qf bands of one random variable at a fixed condition coincide.

    For each ``p``: take the qf interval ``[q_lo, q_hi]``, then evaluate the
    cdf interval at those abscissae.  Exact equivalence means the cdf's
    upper endpoint at ``q_lo`` and its lower endpoint at ``q_hi`` both
    equal ``p``.  The deviation is measured on the probability scale.

    Parameters
    ----------
    variable : {"life", "strength"}
        ``life`` checks F_N / t_p at stress ``fixed``; ``strength`` checks
        F_X / x_p at cycles ``fixed``.
    """
    _require_lr(method)
    spec = fitted.spec
    if grid_p is None:
        grid_p = probability_grid(spec, 7, 0.05, 0.95)
    life = variable == "life"
    if variable not in ("life", "strength"):
        raise DomainError("variable must be 'life' or 'strength'")
    if spec.orientation is Orientation.LIFE:
        rid = "R2"
    else:
        rid = "R5" if life else "R4"
    qf = ScalarTarget.life_quantile if life else ScalarTarget.strength_quantile
    cdf = ScalarTarget.life_cdf if life else ScalarTarget.strength_cdf
    devs, details, skipped = [], [], 0
    for p in grid_p:
        iv = lr_interval(fitted, data, qf(p, fixed), alpha)
        row = {"p": float(p), "qf_lower": iv.lower, "qf_upper": iv.upper}
        for end, cdf_side, bnd in (("lower", "upper", iv.lower_boundary),
                                   ("upper", "lower", iv.upper_boundary)):
            a = getattr(iv, end)
            if bnd:
                skipped += 1
                row[f"cdf_{cdf_side}"] = None
                continue
            try:
                civ = lr_interval(fitted, data, cdf(a, fixed), alpha, side=cdf_side)
            except DomainError:
                skipped += 1
                row[f"cdf_{cdf_side}"] = None
                continue
            val = getattr(civ, cdf_side)
            row[f"cdf_{cdf_side}"] = val
            devs.append(abs(val - p))
        details.append(row)
    what = (f"{variable} cdf/qf bands at "
            f"{'stress' if life else 'cycles'} {fixed:g} (alpha={alpha:g})")
    return _report(rid, what, grid_p, devs, tol, skipped, details)


def check_life_strength_qf_equivalence(fitted, data, p, alpha=0.10, grid_S=None,
                                       tol=1e-3, method="LR"):
    """The life-qf band over stress and the strength-qf band over cycles coincide.

    For each stress ``S`` on ``grid_S`` the life-quantile interval
    ``[N_lo, N_hi]`` is computed; the strength-quantile lower endpoint at
    ``N_e = N_lo`` and upper endpoint at ``N_e = N_hi`` must both return
    ``S`` (relative deviation).  The point-estimate identity
    ``x_p(t_p(S)) = S`` is recorded per point as well.
    """
    _require_lr(method)
    spec = fitted.spec
    if grid_S is None:
        grid_S = stress_grid(data, 5)
    rid = "R3" if spec.orientation is Orientation.LIFE else "R6"
    theta = fitted.theta
    devs, details, skipped = [], [], 0
    for s in grid_S:
        row = {"stress": float(s)}
        try:
            t_hat = models.life_quantile(spec, theta, p, s)
            row["estimate_identity"] = abs(models.strength_quantile(spec, theta, p, t_hat) / s - 1)
        except DomainError:
            row["estimate_identity"] = None
        iv = lr_interval(fitted, data, ScalarTarget.life_quantile(p, s), alpha)
        row.update(life_lower=iv.lower, life_upper=iv.upper)
        for end, bnd in (("lower", iv.lower_boundary), ("upper", iv.upper_boundary)):
            n_e = getattr(iv, end)
            if bnd:
                skipped += 1
                continue
            try:
                xiv = lr_interval(fitted, data, ScalarTarget.strength_quantile(p, n_e), alpha,
                                  side=end)
            except DomainError:
                skipped += 1
                continue
            val = getattr(xiv, end)
            row[f"strength_{end}"] = val
            if getattr(xiv, f"{end}_boundary"):
                skipped += 1
                continue
            devs.append(abs(val / s - 1.0))
        details.append(row)
    what = f"life-qf vs strength-qf bands at p={p:g} (alpha={alpha:g})"
    return _report(rid, what, grid_S, devs, tol, skipped, details)


_INVERSE_PAIRS = {
    frozenset({BandFamily.LIFE_CDF, BandFamily.LIFE_QF}),
    frozenset({BandFamily.STRENGTH_CDF, BandFamily.STRENGTH_QF}),
    frozenset({BandFamily.LIFE_QF_VS_STRESS, BandFamily.STRENGTH_QF_VS_CYCLES}),
}


def _to_lin(kind, values, family):
    values = np.asarray(values, dtype=float)
    if kind == "probability":
        with np.errstate(all="ignore"):
            out = np.full(values.shape, np.nan)
            ok = (values > 0) & (values < 1)
            out[ok] = dist.std_quantile(family, values[ok])
            return out
    with np.errstate(all="ignore"):
        return np.log(values)


def _discrepancy(kind, a, b):
    if kind == "probability":
        return abs(a - b)
    return abs(a / b - 1.0)


def _transpose_one_way(src, dst, family):
    """Transpose ``src``'s boundary curves and compare with ``dst``'s envelope."""
    pairs = ((("lowers", "uppers"), ("uppers", "lowers")) if src.family.increasing
             else (("lowers", "lowers"), ("uppers", "uppers")))
    x_kind, y_kind = dst.family.abscissa_kind, dst.family.ordinate_kind
    gx = _to_lin(x_kind, dst.grid, family)
    devs, skipped, rows = [], 0, []
    for src_curve, dst_curve in pairs:
        bnd_src = src.lower_boundary if src_curve == "lowers" else src.upper_boundary
        bnd_dst = dst.lower_boundary if dst_curve == "lowers" else dst.upper_boundary
        ys = getattr(dst, dst_curve)
        ok = np.isfinite(ys) & ~bnd_dst
        gy = _to_lin(y_kind, ys, family)
        ok &= np.isfinite(gy) & np.isfinite(gx)
        if ok.sum() < 2:
            skipped += len(src.grid)
            continue
        for a_src, y_src, b in zip(src.grid, getattr(src, src_curve), bnd_src):
            # transposed point: abscissa = src ordinate, ordinate = src abscissa
            if b or not np.isfinite(y_src):
                skipped += 1
                continue
            xa = _to_lin(x_kind, np.array([y_src]), family)[0]
            gxo, gyo = gx[ok], gy[ok]
            if not (np.isfinite(xa) and gxo[0] <= xa <= gxo[-1]):
                skipped += 1
                continue
            y_lin = np.interp(xa, gxo, gyo)
            y_hat = (float(dist.std_cdf(family, y_lin)) if y_kind == "probability"
                     else math.exp(y_lin))
            devs.append(_discrepancy(y_kind, a_src, y_hat))
            rows.append({"from": src.family.value, "curve": src_curve[:-1],
                         "abscissa": float(a_src), "transposed": float(y_src),
                         "deviation": devs[-1]})
    return devs, skipped, rows


def check_inverse_band_transpose(band_v, band_w, tol=1e-3, error_family="normal"):
    """Transposed band of one function lies on the band of its inverse.

    Each boundary point of ``band_v`` is transposed and compared with the
    interpolated envelope of ``band_w``, and vice versa.  Interpolation is
    piecewise linear on log scales for cycles/stress and on the error
    family's quantile scale for probabilities.  Transposed points outside the
    other band's grid are skipped.  Probability ordinates are compared
    absolutely, cycles/stress ordinates relatively.
    """
    if frozenset({band_v.family, band_w.family}) not in _INVERSE_PAIRS:
        raise PreconditionError(
            f"{band_v.family.value} and {band_w.family.value} are not mutually inverse"
        )
    if band_v.level != band_w.level or band_v.method != band_w.method:
        raise PreconditionError("bands must share level and method")
    if band_v.family.fixed_name == band_w.family.fixed_name:
        if not math.isclose(band_v.fixed, band_w.fixed, rel_tol=1e-12):
            raise PreconditionError("bands are for different fixed conditions")
    elif not math.isclose(band_v.fixed, band_w.fixed, rel_tol=1e-12):
        raise PreconditionError("qf-vs-condition bands must share p")
    family = dist.ErrorFamily.parse(error_family)
    d1, s1, r1 = _transpose_one_way(band_w, band_v, family)
    d2, s2, r2 = _transpose_one_way(band_v, band_w, family)
    what = (f"transpose of {band_v.family.value} vs {band_w.family.value} "
            f"({band_v.method}, level {band_v.level:g})")
    return _report("R1", what, list(band_v.grid), d1 + d2, tol, s1 + s2, r1 + r2)


# -- safe-stress query ----------------------------------------------------

def safe_stress(fitted, data, p, cycles, alpha=0.10, xtol=1e-10):
    """Stress with lower confidence bound ``p`` quantile of strength at ``cycles``.

    Three routes to the same one-sided bound (level ``1 - alpha/2``):

    ``cdf_route``
        the stress ``S`` where the upper bound of ``F_N(cycles; S)`` equals ``p``;
    ``life_qf_route``
        the stress ``S`` where the lower bound of ``t_p(S)`` equals ``cycles``;
    ``strength_qf``
        the lower endpoint of the ``x_p(cycles)`` interval, computed directly.
    """
    spec = fitted.spec
    lo, hi = (math.log(v) for v in spec.stress_domain)
    lc = math.log(cycles)

    def cdf_gap(ls):
        iv = lr_interval(fitted, data, ScalarTarget.life_cdf(cycles, math.exp(ls)), alpha,
                         side="upper")
        return iv.upper - p

    def qf_gap(ls):
        iv = lr_interval(fitted, data, ScalarTarget.life_quantile(p, math.exp(ls)), alpha,
                         side="lower")
        return lc - math.log(iv.lower)

    direct = lr_interval(fitted, data, ScalarTarget.strength_quantile(p, cycles), alpha,
                         side="lower")
    start = math.log(direct.lower) if not direct.lower_boundary else 0.5 * (lo + hi)
    out = {"p": p, "cycles": cycles, "alpha": alpha,
           "one_sided_level": 1.0 - alpha / 2.0,
           "strength_qf": direct.lower,
           "strength_qf_boundary": direct.lower_boundary}
    for name, fn in (("cdf_route", cdf_gap), ("life_qf_route", qf_gap)):
        try:
            a, b = _bracket(fn, start, lo, hi)
            out[name] = math.exp(optimize.brentq(fn, a, b, xtol=xtol))
        except (SNBandsError, ValueError) as exc:
            out[name] = None
            out[f"{name}_error"] = str(exc)
    return out


def _bracket(fn, x0, lo, hi, step=0.02):
    f0 = fn(x0)
    if f0 == 0:
        return x0, x0
    # both gap functions increase with stress
    direction = -1.0 if f0 > 0 else 1.0
    a = x0
    for _ in range(60):
        b = min(max(a + direction * step, lo), hi)
        fb = fn(b)
        if np.sign(fb) != np.sign(f0):
            return (min(a, b), max(a, b))
        if b in (lo, hi):
            break
        a, step = b, step * 2
    raise DomainError("no crossing inside the stress domain")


# -- full suite -------------------------------------------------------------

def default_conditions(fitted, data):
    """Mid-domain stress and the median life there, used as fixed conditions."""
    spec = fitted.spec
    stress = math.sqrt(data.stress.min() * data.stress.max())
    cycles = models.life_quantile(spec, fitted.theta, 0.5, stress)
    if spec.cycles_domain is not None:
        lo, hi = spec.cycles_domain
        cycles = min(max(cycles, lo), hi)
    return stress, float(cycles)


def equivalence_suite(fitted, data, alpha=0.10, p=0.10, stress=None, cycles=None,
                      n_grid=25, tol=1e-3, method="LR"):
    """Run every band-equivalence check that applies to the fitted orientation.

    Returns a list of :class:`EquivalenceReport`: cdf/qf checks for life
    (at ``stress``) and strength (at ``cycles``), the life-qf vs strength-qf
    check at ``p``, and two grid transpositions (life-cdf vs life-qf and
    strength-cdf vs strength-qf bands).  Each cdf band is computed on the
    grid matched to its qf band (see :func:`matched_grid`).
    """
    _require_lr(method)
    s0, c0 = default_conditions(fitted, data)
    stress = s0 if stress is None else stress
    cycles = c0 if cycles is None else cycles
    spec = fitted.spec
    fam = spec.error_family
    gp = probability_grid(spec, 7, 0.05, 0.95)
    reports = [
        check_cdf_qf_equivalence(fitted, data, "life", stress, alpha, gp, tol),
        check_cdf_qf_equivalence(fitted, data, "strength", cycles, alpha, gp, tol),
        check_life_strength_qf_equivalence(fitted, data, p, alpha, stress_grid(data, 5), tol),
    ]
    pgrid = probability_grid(spec, n_grid, 0.02, 0.98)
    for qf_fam, cdf_fam, fixed in ((BandFamily.LIFE_QF, BandFamily.LIFE_CDF, stress),
                                   (BandFamily.STRENGTH_QF, BandFamily.STRENGTH_CDF, cycles)):
        qb = band(fitted, data, qf_fam, pgrid, alpha, fixed=fixed)
        cb = band(fitted, data, cdf_fam, matched_grid(qb), alpha, fixed=fixed)
        reports.append(check_inverse_band_transpose(cb, qb, tol, fam))
    return reports
