"""Censored S-N data, log-likelihood, maximum likelihood fitting and Wald covariance."""
from __future__ import annotations

import csv
import enum
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import optim
from .dist import KERNELS
from .errors import (
    DegenerateDataError,
    DomainError,
    OptimizationError,
    SingularInformationError,
    SNBandsError,
)
from .models import CurveKind, ModelSpec, Orientation, ParamVector, _as_theta


class Status(enum.IntEnum):
    RUNOUT = 0
    FAILURE = 1


@dataclass(frozen=True)
class SNObservation:
    stress: float
    cycles: float
    status: Status

    def __post_init__(self):
        if not (self.stress > 0.0 and math.isfinite(self.stress)):
            raise DomainError(f"stress must be positive, got {self.stress!r}")
        if not (self.cycles > 0.0 and math.isfinite(self.cycles)):
            raise DomainError(f"cycles must be positive, got {self.cycles!r}")
        object.__setattr__(self, "status", Status(self.status))


class DataFormatError(SNBandsError, ValueError):
    """Malformed dataset file; ``row`` is the 1-based data row (None if global)."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class SNDataset:
    """Censored stress/cycles observations.

    Stored column-wise: ``stress``, ``cycles`` and the boolean ``failed``
    (``True`` for a failure, ``False`` for a runout).
    """

    def __init__(self, stress, cycles, failed, label=""):
        self.stress = np.asarray(stress, dtype=float).ravel()
        self.cycles = np.asarray(cycles, dtype=float).ravel()
        self.failed = np.asarray(failed).astype(bool).ravel()
        self.label = label
        if not (self.stress.size == self.cycles.size == self.failed.size):
            raise DomainError("stress, cycles and status must have the same length")
        if self.stress.size == 0:
            raise DegenerateDataError("dataset is empty")
        if not (np.all(self.stress > 0) and np.all(np.isfinite(self.stress))):
            raise DomainError("stresses must be positive and finite")
        if not (np.all(self.cycles > 0) and np.all(np.isfinite(self.cycles))):
            raise DomainError("cycles must be positive and finite")
        for arr in (self.stress, self.cycles, self.failed):
            arr.setflags(write=False)

    @classmethod
    def from_observations(cls, observations, label=""):
        obs = list(observations)
        if not obs:
            raise DegenerateDataError("dataset is empty")
        return cls(
            [o.stress for o in obs],
            [o.cycles for o in obs],
            [o.status == Status.FAILURE for o in obs],
            label=label,
        )

    @property
    def observations(self):
        return [
            SNObservation(float(s), float(n), Status(int(f)))
            for s, n, f in zip(self.stress, self.cycles, self.failed)
        ]

    @property
    def n(self):
        return self.stress.size

    @property
    def n_failures(self):
        return int(self.failed.sum())

    def __len__(self):
        return self.n

    def __repr__(self):
        return (f"SNDataset(n={self.n}, failures={self.n_failures}, "
                f"label={self.label!r})")

    def to_csv(self):
        out = io.StringIO()
        out.write("stress,cycles,status\n")
        for s, n, f in zip(self.stress, self.cycles, self.failed):
            out.write(f"{float(s)!r},{float(n)!r},{int(f)}\n")
        return out.getvalue()


def read_csv(path_or_text, label=None):
    """Read a ``stress,cycles,status`` CSV file.

    Lines starting with ``#`` are ignored.  ``status`` is 1 for a failure
    and 0 for a runout.  Raises :class:`DataFormatError` naming the first
    bad data row.
    """
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        text = path_or_text
        label = label or ""
    else:
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
        label = label if label is not None else os.path.basename(str(path_or_text))
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines())
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise DataFormatError("no header and no data")
    header = [h.strip().lower() for h in next(csv.reader([lines[0][1]]))]
    if header != ["stress", "cycles", "status"]:
        raise DataFormatError(f"expected header 'stress,cycles,status', got {lines[0][1]!r}")
    stress, cycles, failed = [], [], []
    for row, (lineno, ln) in enumerate(lines[1:], start=1):
        fields = [f.strip() for f in next(csv.reader([ln]))]
        where = f"row {row} (line {lineno})"
        if len(fields) != 3:
            raise DataFormatError(f"{where}: expected 3 fields, got {len(fields)}", row)
        try:
            s, n = float(fields[0]), float(fields[1])
        except ValueError:
            raise DataFormatError(f"{where}: non-numeric stress or cycles", row) from None
        if not (s > 0 and math.isfinite(s) and n > 0 and math.isfinite(n)):
            raise DataFormatError(f"{where}: stress and cycles must be positive", row)
        if fields[2] not in ("0", "1"):
            raise DataFormatError(f"{where}: status must be 0 or 1, got {fields[2]!r}", row)
        stress.append(s)
        cycles.append(n)
        failed.append(fields[2] == "1")
    if not stress:
        raise DataFormatError("file has a header but no data rows")
    return SNDataset(stress, cycles, failed, label=label)


def check_data_domain(spec, data):
    lo, hi = spec.stress_domain
    bad = np.flatnonzero((data.stress < lo) | (data.stress > hi))
    if bad.size:
        i = int(bad[0])
        raise DomainError(
            f"observation {i + 1} has stress {data.stress[i]:g} outside the working "
            f"domain [{lo:g}, {hi:g}]"
        )
    if spec.cycles_domain is not None:
        lo, hi = spec.cycles_domain
        bad = np.flatnonzero((data.cycles < lo) | (data.cycles > hi))
        if bad.size:
            i = int(bad[0])
            raise DomainError(
                f"observation {i + 1} has cycles {data.cycles[i]:g} outside the working "
                f"domain [{lo:g}, {hi:g}]"
            )


class LogLikelihood:
    """Vectorized censored log-likelihood for one (spec, data) pair.

    Calling the object with ``theta = (beta..., sigma)`` returns the
    log-likelihood; :meth:`eta` takes ``(beta..., log sigma)`` instead.
    Parameter vectors whose curve is not decreasing on the working domain
    get ``-inf``.
    """

    def __init__(self, spec, data):
        check_data_domain(spec, data)
        self.spec = spec
        self.data = data
        self._logpdf, self._logsf = KERNELS[spec.error_family]
        self._ls = np.log(data.stress)
        self._lt = np.log(data.cycles)
        self._fail = data.failed
        self._cens = ~data.failed
        self._life = spec.orientation is Orientation.LIFE
        self._sum_lt_fail = float(self._lt[self._fail].sum())
        self._nfail = int(self._fail.sum())
        self._logdom = spec.curve_log_domain
        self._quad = spec.curve.kind is CurveKind.LOGQUADRATIC

    @property
    def curve_args(self):
        """Log of the curve's argument at each observation (stress or cycles)."""
        return self._ls if self._life else self._lt

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        sigma = theta[-1]
        if not sigma > 0.0:
            return -np.inf
        return self._value(theta[:-1], sigma, math.log(sigma))

    def eta(self, eta):
        eta = np.asarray(eta, dtype=float)
        if abs(eta[-1]) > 700:
            return -np.inf
        return self._value(eta[:-1], math.exp(eta[-1]), eta[-1])

    def _value(self, beta, sigma, log_sigma):
        curve = self.spec.curve
        if not curve.is_decreasing(beta, self._logdom):
            return -np.inf
        if self._life:
            z = (self._lt - curve.log_curve(beta, self._ls)) / sigma
        else:
            z = (self._ls - curve.log_curve(beta, self._lt)) / sigma
        zf, zc = z[self._fail], z[self._cens]
        total = self._logpdf(zf).sum() - self._nfail * log_sigma - self._sum_lt_fail
        if not self._life:
            if self._quad:
                total += np.log(-curve.slope(beta, self._lt[self._fail])).sum()
            else:
                total += self._nfail * math.log(-beta[1])
        if zc.size:
            total += self._logsf(zc).sum()
        return float(total) if np.isfinite(total) else -np.inf

    def centering(self):
        """Linear map from ``(beta..., s)`` to centred curve coefficients.

        The curve is re-expressed in ``v = (u - m) / r`` with ``m`` the mean
        and ``r`` the half-range of the data's log curve argument.  Raw
        polynomial coefficients in ``u`` are strongly collinear when ``u`` is
        far from zero (log cycles around 12), which ruins finite-difference
        curvature estimates; the centred ones are close to orthogonal.  The
        last (scale) coordinate is left unchanged.
        """
        u = self._ls if self._life else self._lt
        m = float(u.mean())
        r = max(0.5 * float(u.max() - u.min()), 0.05)
        T = np.eye(self.spec.n_params)
        T[0, 1], T[1, 1] = m, r
        if self._quad:
            T[0, 2], T[1, 2], T[2, 2] = m * m, 2.0 * m * r, r * r
        return T

    def hessian(self, x, log_sigma=False, rel=1e-5):
        """Finite-difference Hessian at ``x`` computed in centred coordinates.

        ``x`` is ``theta`` or, with ``log_sigma=True``, ``eta``.  The
        result is expressed in the coordinates of ``x``.
        """
        fun = self.eta if log_sigma else self
        T = self.centering()
        Tinv = np.linalg.inv(T)
        c = T @ np.asarray(x, dtype=float)
        Hc = optim.hessian(lambda v: fun(Tinv @ v), c, np.maximum(rel, rel * np.abs(c)))
        H = T.T @ Hc @ T
        return 0.5 * (H + H.T)


def loglik(spec, theta, data):
    """Censored log-likelihood of ``theta = (beta..., sigma)``.

    Failures contribute ``log f_N(N_i)`` and runouts ``log[1 - F_N(N_i)]``,
    both computed in log space.
    """
    theta = spec.check_theta(_as_theta(theta))
    return LogLikelihood(spec, data)(theta)


@dataclass(frozen=True)
class FitOptions:
    starts: int = 8
    max_iter: int = 5000
    tol: float = 1e-10
    seed: int = 0


@dataclass(frozen=True)
class FittedModel:
    """Result of :func:`fit_ml`.

    ``wald_cov`` is the inverse observed information in ``(beta..., sigma)``
    coordinates, or ``None`` when the information matrix is singular.
    ``fixed`` lists the indices of parameters that were held at known
    values; their rows and columns of ``wald_cov`` are zero.
    """

    spec: ModelSpec
    theta_hat: ParamVector
    loglik_hat: float
    wald_cov: np.ndarray | None
    converged: bool
    iterations: int
    diagnostics: list = field(default_factory=list, compare=False)
    fixed: tuple = ()

    @property
    def theta(self):
        return self.theta_hat.as_array()

    @property
    def eta(self):
        th = self.theta
        return np.append(th[:-1], math.log(th[-1]))

    @property
    def standard_errors(self):
        if self.wald_cov is None:
            return None
        return np.sqrt(np.diag(self.wald_cov))

    def to_json(self):
        return {
            "model": self.spec.to_json(),
            "beta": list(self.theta_hat.beta),
            "sigma": self.theta_hat.sigma,
            "loglik": self.loglik_hat,
            "wald_cov": None if self.wald_cov is None else self.wald_cov.tolist(),
            "converged": self.converged,
            "iterations": self.iterations,
            "fixed": list(self.fixed),
            "diagnostics": self.diagnostics,
        }


def _least_squares_start(spec, data):
    """Loglinear least squares of log N on log S, runouts treated as failures."""
    ls, lt = np.log(data.stress), np.log(data.cycles)
    if np.ptp(ls) > 0:
        slope, intercept = np.polyfit(ls, lt, 1)
        resid = lt - (intercept + slope * ls)
    else:
        slope, intercept = -1.0, float(lt.mean() + ls.mean())
        resid = lt - lt.mean()
    if not slope < 0:
        slope = -1.0
        intercept = float(np.mean(lt + ls))
        resid = lt - (intercept + slope * ls)
    s = float(np.sqrt(np.mean(resid ** 2)))
    if not s > 0:
        s = 0.1
    s *= 1.5
    if spec.orientation is Orientation.LIFE:
        beta = [intercept, slope]
        sigma = s
    else:
        beta = [intercept / -slope, 1.0 / slope]
        sigma = s / abs(slope)
    if spec.curve.kind is CurveKind.LOGQUADRATIC:
        beta.append(0.0)
    return np.array(beta + [sigma])


def _free_view(ll, eta_full, free):
    """Log-likelihood of the free ``eta`` coordinates with the rest held."""
    def fun(x):
        eta = eta_full.copy()
        eta[free] = x
        return ll.eta(eta)
    return fun


def _check_fixed(spec, fixed):
    fixed = {int(k): float(v) for k, v in (fixed or {}).items()}
    n = spec.n_params
    for j, v in fixed.items():
        if not 0 <= j < n:
            raise DomainError(f"fixed parameter index {j} out of range")
        if j == n - 1 and not v > 0:
            raise DomainError("a fixed sigma must be positive")
    if len(fixed) >= n:
        raise DomainError("at least one parameter must be free")
    return fixed


def fit_ml(spec, data, options=None, start=None, fixed=None):
    """Maximum likelihood fit by multi-start Nelder-Mead on ``(beta, log sigma)``.

    Parameters
    ----------
    spec : ModelSpec
    data : SNDataset
    options : FitOptions, optional
        Number of starts, iteration cap, tolerance and the seed for the
        start perturbations.
    start : array_like, optional
        Starting ``theta`` used instead of the least-squares start.
    fixed : dict, optional
        ``{index: value}`` of parameters (in ``theta`` coordinates) held at
        known values; only the others are estimated.

    Returns
    -------
    FittedModel

    Raises
    ------
    DegenerateDataError
        If the data contain no failures.
    OptimizationError
        If no start converges; ``diagnostics`` lists every attempt.
    """
    options = options or FitOptions()
    fixed = _check_fixed(spec, fixed)
    n = spec.n_params
    if data.n_failures == 0 and (n - 1) not in fixed:
        raise DegenerateDataError("no failures in the data: sigma is not estimable")
    ll = LogLikelihood(spec, data)
    theta0 = _least_squares_start(spec, data) if start is None else np.array(start, float)
    for j, v in fixed.items():
        theta0[j] = v
    eta_full = np.append(theta0[:-1], math.log(theta0[-1]))
    free = np.array([j for j in range(n) if j not in fixed])
    fun = _free_view(ll, eta_full, free)
    eta0 = eta_full[free]
    if not np.isfinite(fun(eta0)):
        raise OptimizationError("least-squares start is not admissible; supply a start")

    scale = _scale_at(ll, eta_full, free)
    rng = np.random.default_rng(options.seed)
    starts = [eta0]
    tries = 0
    while len(starts) < options.starts and tries < 50 * options.starts:
        tries += 1
        cand = eta0 + scale @ rng.standard_normal(eta0.size)
        if np.isfinite(fun(cand)):
            starts.append(cand)

    diagnostics = []
    best = None
    total_iter = 0
    for i, x0 in enumerate(starts):
        res = optim.maximize(fun, x0, scale=scale, xatol=1e-8, fatol=options.tol,
                             max_iter=options.max_iter, restarts=1)
        # polish in the locally whitened frame
        eta_res = eta_full.copy()
        eta_res[free] = res.x
        res2 = optim.maximize(fun, res.x, scale=_scale_at(ll, eta_res, free, scale),
                              xatol=1e-9, fatol=options.tol, max_iter=options.max_iter,
                              restarts=1)
        if res2.fun >= res.fun:
            res2.nit += res.nit
            res = res2
        total_iter += res.nit
        eta_res = eta_full.copy()
        eta_res[free] = res.x
        ok = res.success and _is_local_max(ll, eta_res, free)
        diagnostics.append({"start": i, "loglik": res.fun, "converged": bool(ok),
                            "iterations": res.nit, "message": res.message})
        if ok and (best is None or res.fun > best.fun):
            best = res
    if best is None:
        raise OptimizationError("no start converged to a local maximum", diagnostics)

    eta_hat = eta_full.copy()
    eta_hat[free] = best.x
    eta_hat[free] = _newton_polish(ll, fun, eta_hat, free)
    theta_hat = np.append(eta_hat[:-1], math.exp(eta_hat[-1]))
    try:
        cov = wald_covariance(spec, theta_hat, data, fixed=sorted(fixed))
    except SingularInformationError as exc:
        cov = None
        diagnostics.append({"wald": str(exc)})
    return FittedModel(
        spec=spec,
        theta_hat=ParamVector.from_array(theta_hat),
        loglik_hat=ll(theta_hat),
        wald_cov=cov,
        converged=True,
        iterations=total_iter,
        diagnostics=diagnostics,
        fixed=tuple(sorted(fixed)),
    )


def _newton_polish(ll, fun, eta, free, iters=3):
    """Newton steps from a Nelder-Mead maximum on the free ``eta`` coordinates.

    Nelder-Mead stops once the simplex values agree to ``fatol``, about
    ``sqrt(fatol)`` standard errors short of the maximum.  That slack is
    invisible in the log-likelihood but shows in far-tail probabilities.
    Finite-difference Newton steps remove it.  Near the maximum the change
    in log-likelihood is below rounding, so a step is judged by its size in
    standard-error units instead: it is kept only when shorter than 0.01 and
    not lowering the log-likelihood by more than rounding.
    """
    x = eta[free].copy()
    f = fun(x)
    for _ in range(iters):
        full = eta.copy()
        full[free] = x
        H = ll.hessian(full, log_sigma=True, rel=1e-5)[np.ix_(free, free)]
        g = optim.gradient(fun, x, 1e-5 * np.maximum(1.0, np.abs(x)), order=4)
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g))):
            break
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        size = math.sqrt(max(float(step @ -H @ step), 0.0))
        f_new = fun(x + step)
        if not (size < 1e-2 and f_new >= f - 1e-12 * max(1.0, abs(f))):
            break
        x, f = x + step, f_new
    return x


def _scale_at(ll, x, free, fallback=None):
    H = ll.hessian(x, log_sigma=True, rel=1e-4)[np.ix_(free, free)]
    if fallback is None:
        fallback = np.diag(0.1 * np.abs(x[free]) + 0.1)
    if not np.all(np.isfinite(H)):
        return fallback
    L = optim.whitening(H, None)
    return fallback if L is None else L


def _is_local_max(ll, eta, free, rel=1e-4, slack=1e-6):
    theta = np.append(eta[:-1], math.exp(eta[-1]))
    f0 = ll(theta)
    if not np.isfinite(f0):
        return False
    for j in free:
        for sgn in (1.0, -1.0):
            step = rel * (abs(theta[j]) if theta[j] != 0 else 1.0)
            th = theta.copy()
            th[j] += sgn * step
            if ll(th) > f0 + slack:
                return False
    return True


def wald_covariance(spec, theta_hat, data, fixed=()):
    """Inverse of the negative FD Hessian of the log-likelihood at ``theta_hat``.

    Central differences with relative steps ``1e-5`` are taken in centred
    curve coordinates (see :meth:`LogLikelihood.centering`) and mapped back
    to ``(beta..., sigma)``; the Hessian is symmetrized before inversion.
    Parameters listed in ``fixed`` are known: the information is inverted
    over the others and the fixed rows and columns are zero.
    """
    theta_hat = spec.check_theta(_as_theta(theta_hat))
    ll = LogLikelihood(spec, data)
    held = set(int(j) for j in fixed)
    free = np.array([j for j in range(spec.n_params) if j not in held])
    H = ll.hessian(theta_hat, rel=1e-5)[np.ix_(free, free)]
    if not np.all(np.isfinite(H)):
        raise SingularInformationError("Hessian has non-finite entries")
    try:
        np.linalg.cholesky(-H)
    except np.linalg.LinAlgError:
        raise SingularInformationError("Hessian is not negative definite") from None
    cov = np.zeros((spec.n_params, spec.n_params))
    cov[np.ix_(free, free)] = np.linalg.inv(-H)
    return 0.5 * (cov + cov.T)
