"""Likelihood-ratio and Wald confidence intervals for scalar functions of theta.

The LR interval for ``xi(theta)`` is ``{xi(theta) : loglik(theta) >= k}``
with ``k = loglik(theta_hat) - chi2_{1-alpha;1} / 2``.  Its endpoints are
found by root-finding on the profile log-likelihood

    lp(xi*) = max { loglik(theta) : xi(theta) = xi* }

against ``k``, stepping outward from ``xi(theta_hat)``.

Every supported target constrains the curve only through one equation of
the form ``log c(a; beta) = level``, which is linear in the curve
intercept ``beta_0``.  The constraint is therefore solved exactly for the
intercept and the profile becomes an unconstrained maximization over the
remaining parameters ``(beta_1, [beta_2], log sigma)``.  Raw parameters are
profiled by fixing that coordinate.
"""
from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, special

from . import dist, models, optim
from .errors import DomainError, OptimizationError, PreconditionError
from .likelihood import LogLikelihood
from .models import CurveKind, Orientation

log = logging.getLogger(__name__)

CDF_LIMIT = 37.0
LOG_SIGMA_LIMIT = 30.0


class TargetKind(str, enum.Enum):
    LIFE_CDF = "life-cdf"
    LIFE_QUANTILE = "life-quantile"
    STRENGTH_CDF = "strength-cdf"
    STRENGTH_QUANTILE = "strength-quantile"
    RAW = "raw-parameter"


@dataclass(frozen=True)
class ScalarTarget:
    """A scalar function ``xi(theta)`` of the model parameters.

    Build instances with the class methods, e.g.
    ``ScalarTarget.life_quantile(p=0.1, stress=60.0)``.

    ``scale`` selects the coordinate used for the endpoint search:
    ``None`` (natural: log for quantiles, the error-family quantile scale
    for probabilities, identity for ``beta`` and log for ``sigma``),
    ``"log"`` or ``"identity"``.  LR intervals do not depend on it beyond
    solver tolerance.
    """

    kind: TargetKind
    p: float | None = None
    t: float | None = None
    x: float | None = None
    stress: float | None = None
    cycles: float | None = None
    index: int | None = None
    scale: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TargetKind(self.kind))
        if self.scale not in (None, "log", "identity"):
            raise DomainError(f"unknown search scale {self.scale!r}")
        if self.p is not None and not 0.0 < self.p < 1.0:
            raise DomainError("p must lie in (0, 1)")
        need = {
            TargetKind.LIFE_CDF: ("t", "stress"),
            TargetKind.LIFE_QUANTILE: ("p", "stress"),
            TargetKind.STRENGTH_CDF: ("x", "cycles"),
            TargetKind.STRENGTH_QUANTILE: ("p", "cycles"),
            TargetKind.RAW: ("index",),
        }[self.kind]
        for name in need:
            if getattr(self, name) is None:
                raise DomainError(f"{self.kind.value} target needs {name!r}")

    @classmethod
    def life_cdf(cls, t, stress, **kw):
        return cls(TargetKind.LIFE_CDF, t=float(t), stress=float(stress), **kw)

    @classmethod
    def life_quantile(cls, p, stress, **kw):
        return cls(TargetKind.LIFE_QUANTILE, p=float(p), stress=float(stress), **kw)

    @classmethod
    def strength_cdf(cls, x, cycles, **kw):
        return cls(TargetKind.STRENGTH_CDF, x=float(x), cycles=float(cycles), **kw)

    @classmethod
    def strength_quantile(cls, p, cycles, **kw):
        return cls(TargetKind.STRENGTH_QUANTILE, p=float(p), cycles=float(cycles), **kw)

    @classmethod
    def raw(cls, index, **kw):
        return cls(TargetKind.RAW, index=int(index), **kw)

    @property
    def is_cdf(self):
        return self.kind in (TargetKind.LIFE_CDF, TargetKind.STRENGTH_CDF)

    @property
    def is_quantile(self):
        return self.kind in (TargetKind.LIFE_QUANTILE, TargetKind.STRENGTH_QUANTILE)

    def to_json(self):
        out = {"kind": self.kind.value}
        for name in ("p", "t", "x", "stress", "cycles", "index", "scale"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        return out

    @classmethod
    def from_json(cls, obj):
        try:
            return cls(**obj)
        except TypeError as exc:
            raise DomainError(f"malformed target: {exc}") from exc

    def value(self, spec, theta):
        """Evaluate ``xi(theta)``."""
        theta = np.asarray(theta, dtype=float)
        if self.kind is TargetKind.LIFE_CDF:
            return float(models.life_cdf(spec, theta, self.t, self.stress))
        if self.kind is TargetKind.LIFE_QUANTILE:
            return float(models.life_quantile(spec, theta, self.p, self.stress))
        if self.kind is TargetKind.STRENGTH_CDF:
            return float(models.strength_cdf(spec, theta, self.x, self.cycles))
        if self.kind is TargetKind.STRENGTH_QUANTILE:
            return float(models.strength_quantile(spec, theta, self.p, self.cycles))
        return float(theta[self.index])

    def validate(self, spec):
        if self.kind is TargetKind.RAW:
            if not 0 <= self.index < spec.n_params:
                raise DomainError(f"parameter index {self.index} out of range")
            return
        if self.stress is not None:
            spec.check_stress(self.stress)
        if self.x is not None:
            spec.check_stress(self.x, "x")
        if self.cycles is not None:
            spec.check_cycles(self.cycles, "N_e")
        if self.t is not None:
            spec.check_cycles(self.t, "t")


class _Coordinates:
    """Maps between ``xi``, the canonical coordinate ``c`` and the search scale ``u``.

    The canonical coordinate enters the constraint linearly: ``log xi`` for
    quantiles, the standardized quantile of ``xi`` for probabilities, ``xi``
    for a ``beta`` and ``log xi`` for ``sigma``.
    """

    def __init__(self, spec, target):
        self.spec = spec
        self.target = target
        self.family = spec.error_family
        sigma_index = spec.n_params - 1
        if target.kind is TargetKind.RAW:
            self.elim = target.index
            self.natural = "log" if target.index == sigma_index else "identity"
        else:
            self.elim = 0
            self.natural = "log" if target.is_quantile else "std"
        self.scale = target.scale or self.natural
        self.c_bounds = self._c_bounds()
        # A logquadratic curve is decreasing on [a, b] iff its (affine) slope
        # is negative at both ends.  The nuisance coordinates are the two end
        # slopes reflected through zero (slope = -|v|), which maps all of R^2
        # onto the admissible set.  A profile maximum pressed against the
        # monotonicity boundary then sits at v = 0 with the optimizer free
        # to move either way, instead of at a -inf wall (raw coefficients)
        # or on a flat plateau at -inf (log slopes).
        # Raw-parameter profiles of a logquadratic curve get the same
        # treatment: with beta_0 or sigma held, (beta_1, beta_2) become the
        # reflected end slopes; with beta_1 or beta_2 held, the other one is
        # folded at its admissibility bound (see ``_fold_bound``).
        quad = spec.curve.kind is CurveKind.LOGQUADRATIC
        self.slope_coords = quad and self.elim in (0, sigma_index)
        self.fold = self.elim if quad and self.elim in (1, 2) else None
        self.ends = spec.curve_log_domain
        self.q = (float(dist.std_quantile(self.family, target.p))
                  if target.is_quantile else None)

    def _c_bounds(self):
        spec, tg = self.spec, self.target
        if tg.is_cdf:
            return (-CDF_LIMIT, CDF_LIMIT)
        if tg.kind is TargetKind.LIFE_QUANTILE:
            dom = spec.cycles_domain
            return (-np.inf, np.inf) if dom is None else (math.log(dom[0]), math.log(dom[1]))
        if tg.kind is TargetKind.STRENGTH_QUANTILE:
            return (math.log(spec.stress_domain[0]), math.log(spec.stress_domain[1]))
        if self.natural == "log":
            return (-LOG_SIGMA_LIMIT, LOG_SIGMA_LIMIT)
        return (-np.inf, np.inf)

    # xi <-> c
    def c_from_xi(self, xi):
        if self.natural == "log":
            return math.log(xi)
        if self.natural == "std":
            # 1 - xi is exact above 1/2, which keeps the upper tail
            if xi > 0.5:
                return float(dist.std_isf(self.family, 1.0 - xi))
            return float(dist.std_quantile(self.family, xi))
        return float(xi)

    def c_from_theta(self, theta):
        """Canonical coordinate of ``xi(theta)``.

        For probabilities this is the standardized residual at the target
        point, computed without passing through ``xi`` (which may round to
        0 or 1).
        """
        if not self.target.is_cdf:
            return self.c_from_xi(self.target.value(self.spec, theta))
        theta = np.asarray(theta, dtype=float)
        a, base, _ = self.constraint(0.0)
        ncoef = self.spec.curve.coef_count
        return float((base - self.spec.curve.log_curve(theta[:ncoef], a)) / theta[-1])

    def xi_from_c(self, c):
        if self.natural == "log":
            return math.exp(c)
        if self.natural == "std":
            return float(dist.std_cdf(self.family, c))
        return float(c)

    # u <-> c
    def u_from_c(self, c):
        if self.scale == self.natural:
            return c
        if self.scale == "log" and self.natural == "std":
            return float(dist.std_logcdf(self.family, c))
        xi = self.xi_from_c(c)
        return math.log(xi) if self.scale == "log" else xi

    def c_from_u(self, u):
        if self.scale == self.natural:
            return u
        if self.scale == "log" and self.natural == "std" and u > -math.log(2.0):
            # the upper tail mass is -expm1(u), exact where exp(u) rounds to 1
            return float(dist.std_isf(self.family, -math.expm1(u)))
        xi = math.exp(u) if self.scale == "log" else u
        return self.c_from_xi(xi)

    def u_bounds(self):
        lo, hi = self.c_bounds
        return (self._u_edge(lo), self._u_edge(hi))

    def _u_edge(self, c):
        if not np.isfinite(c):
            if self.scale == "log" and self.natural == "identity":
                return -np.inf if c < 0 else np.inf
            return c
        if self.natural == "std" and self.scale != "std":
            # keep the edge strictly inside (0, 1) after rounding
            u = self.u_from_c(c)
            if self.scale == "log":
                return min(max(u, math.log(1e-300)), -1e-300)
            return min(max(u, 1e-300), 1.0 - 2.0 ** -53)
        return self.u_from_c(c)

    # nuisance coordinates
    def _slope_pos(self):
        """Positions of the two end-slope coordinates inside ``nu``."""
        return (0, 1) if self.elim == 0 else (1, 2)

    def _from_slopes(self, va, vb):
        """``(beta_1, beta_2)`` with end slopes ``-|va|`` and ``-|vb|``."""
        lo, hi = self.ends
        sa, sb = abs(va), abs(vb)
        b2 = (sa - sb) / (2.0 * (hi - lo))
        return -sa - 2.0 * b2 * lo, b2

    def _fold_bound(self, c):
        """``(bound, sign)`` so the free coefficient is ``bound + sign * |w|``.

        With ``beta_2 = c`` held, ``beta_1 < min(-2 c a, -2 c b)``.  With
        ``beta_1 = c`` held and a log-domain on one side of zero, ``beta_2``
        is bounded on one side by ``-c / (2 x)`` at the domain ends.  A
        log-domain straddling zero bounds ``beta_2`` on both sides; that case
        keeps the raw coordinate (``None``).
        """
        a, b = self.ends
        if self.fold == 2:
            return min(-2.0 * c * a, -2.0 * c * b), -1.0
        if a > 0.0:
            return min(-c / (2.0 * a), -c / (2.0 * b)), -1.0
        if b < 0.0:
            return max(-c / (2.0 * a), -c / (2.0 * b)), 1.0
        return None

    def nu_from_eta(self, eta):
        eta = np.asarray(eta, dtype=float)
        nu = np.delete(eta, self.elim)
        if self.slope_coords:
            b1, b2 = eta[1], eta[2]
            a, b = self.ends
            i, j = self._slope_pos()
            nu[i] = -(b1 + 2.0 * b2 * a)
            nu[j] = -(b1 + 2.0 * b2 * b)
        elif self.fold is not None:
            fb = self._fold_bound(eta[self.elim])
            if fb is not None:
                bound, sign = fb
                nu[1] = sign * (eta[3 - self.elim] - bound)
        return nu

    def constraint(self, c):
        """``(a, base, coef)`` such that the target constraint reads
        ``log curve(a) = base - coef * sigma``."""
        spec, tg = self.spec, self.target
        life = spec.orientation is Orientation.LIFE
        k = tg.kind
        if k is TargetKind.LIFE_QUANTILE:
            return (math.log(tg.stress), c, self.q) if life else (c, math.log(tg.stress), self.q)
        if k is TargetKind.LIFE_CDF:
            return ((math.log(tg.stress), math.log(tg.t), c) if life
                    else (math.log(tg.t), math.log(tg.stress), c))
        if k is TargetKind.STRENGTH_QUANTILE:
            return (c, math.log(tg.cycles), self.q) if life else (math.log(tg.cycles), c, self.q)
        return ((math.log(tg.x), math.log(tg.cycles), c) if life
                else (math.log(tg.cycles), math.log(tg.x), c))

    def completer(self, c):
        """Function ``nu -> eta`` with ``xi(theta) = xi_from_c(c)``."""
        elim, n = self.elim, self.spec.n_params
        if self.target.kind is TargetKind.RAW:
            slope_pos = self._slope_pos() if self.slope_coords else None
            fb = self._fold_bound(c) if self.fold is not None else None
            other = 3 - elim

            def raw(nu):
                eta = np.empty(n)
                eta[:elim] = nu[:elim]
                eta[elim] = c
                eta[elim + 1:] = nu[elim:]
                if slope_pos is not None:
                    eta[1], eta[2] = self._from_slopes(nu[slope_pos[0]], nu[slope_pos[1]])
                elif fb is not None:
                    eta[other] = fb[0] + fb[1] * abs(nu[1])
                return eta
            return raw
        a, base, coef = self.constraint(c)
        quad = self.spec.curve.kind is CurveKind.LOGQUADRATIC
        slope_coords = self.slope_coords
        from_slopes = self._from_slopes

        def fill(nu):
            eta = np.empty(n)
            eta[1:] = nu
            if slope_coords:
                eta[1], eta[2] = from_slopes(nu[0], nu[1])
            rest = eta[1] * a + (eta[2] * a * a if quad else 0.0)
            eta[0] = base - coef * math.exp(eta[-1]) - rest
            return eta
        return fill

    def complete(self, c, nu):
        """Full ``eta = (beta..., log sigma)`` with ``xi(theta) = xi_from_c(c)``."""
        return self.completer(c)(np.asarray(nu, dtype=float))


@dataclass
class Endpoint:
    value: float
    boundary: bool = False
    theta: list | None = None
    loglik: float | None = None
    loglik_residual: float | None = None
    xi_residual: float | None = None

    def to_json(self):
        return {k: v for k, v in self.__dict__.items()}


@dataclass
class LRInterval:
    """A two-sided interval ``[lower, upper]`` around ``estimate``.

    ``lower_boundary``/``upper_boundary`` mark endpoints that sit on the
    edge of the parameter space or working domain (the profile never fell
    to the cutoff there).  ``None`` endpoints were not requested.
    """

    estimate: float
    lower: float | None
    upper: float | None
    level: float
    method: str = "LR"
    cutoff_k: float | None = None
    lower_boundary: bool = False
    upper_boundary: bool = False
    diagnostics: dict = field(default_factory=dict)

    def contains(self, value):
        lo = -np.inf if self.lower is None else self.lower
        hi = np.inf if self.upper is None else self.upper
        return bool(lo <= value <= hi)

    def to_json(self):
        return {
            "estimate": self.estimate,
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "method": self.method,
            "cutoff_k": self.cutoff_k,
            "lower_boundary": self.lower_boundary,
            "upper_boundary": self.upper_boundary,
            "diagnostics": self.diagnostics,
        }


def lr_cutoff(loglik_hat, alpha):
    """``k = loglik_hat - chi2_{1-alpha;1} / 2``; ``alpha = 1`` gives ``loglik_hat``."""
    if not 0.0 < alpha <= 1.0:
        raise DomainError("alpha must lie in (0, 1]")
    return loglik_hat - 0.5 * dist.chisq1_quantile(1.0 - alpha)


class Profile:
    """Profile log-likelihood of a target in its search coordinate ``u``.

    Evaluations are cached; each inner maximization is warm-started from
    the nearest previously solved point.  Parameters the fit held fixed
    stay at their known values and are not part of the nuisance set.
    """

    def __init__(self, fitted, data, target, inner_tol=1e-10):
        self.fitted = fitted
        self.spec = fitted.spec
        self.target = target
        target.validate(self.spec)
        self.ll = LogLikelihood(self.spec, data)
        self.coords = _Coordinates(self.spec, target)
        self.inner_tol = inner_tol
        self.eta_hat = fitted.eta
        self.xi_hat = target.value(self.spec, fitted.theta)
        self.c_hat = self.coords.c_from_theta(fitted.theta)
        self.u_hat = self.coords.u_from_c(self.c_hat)
        self._nu_full, self._free = self._nuisance_layout()
        self.nu_hat = self._nu_full[self._free]
        self.loglik_hat = fitted.loglik_hat
        # keyed by the canonical coordinate c, which is increasing in u
        self._cache = {self.c_hat: (self.loglik_hat, self.nu_hat)}
        self._scale = self._inner_scale()
        self.evaluations = 0

    def _nuisance_layout(self):
        n = self.spec.n_params
        held = set(self.fitted.fixed)
        elim = self.coords.elim
        if elim in held:
            raise PreconditionError(
                "the target needs a free intercept" if self.target.kind is not TargetKind.RAW
                else f"parameter {elim} was held fixed in the fit")
        if self.coords.slope_coords and held - {n - 1}:
            raise PreconditionError(
                "logquadratic curve targets support a fixed sigma only")
        full = self.coords.nu_from_eta(self.eta_hat)
        eta_index = np.delete(np.arange(n), elim)
        free = np.array([i for i, j in enumerate(eta_index) if j not in held], dtype=int)
        return full, free

    def _expand(self, nu):
        full = self._nu_full.copy()
        full[self._free] = nu
        return full

    def _inner(self, c):
        coords, ll = self.coords, self.ll
        fill = coords.completer(c)
        if self._free.size == self._nu_full.size:
            return lambda nu: ll.eta(fill(nu))
        return lambda nu: ll.eta(fill(self._expand(nu)))

    def _inner_scale(self):
        d = self.nu_hat.size
        if d == 0:
            return np.zeros((0, 0))
        # the full Hessian (computed in well-conditioned coordinates) pulled
        # back through the Jacobian of the completion map; at the estimate
        # the gradient vanishes, so the curvature of the map drops out
        comp = lambda nu: self.coords.complete(self.c_hat, self._expand(nu))
        J = np.column_stack([
            (comp(self.nu_hat + e) - comp(self.nu_hat - e)) / (2.0 * e[j])
            for j, e in enumerate(np.diag(np.maximum(1e-6, 1e-6 * np.abs(self.nu_hat))))
        ])
        H = J.T @ self.ll.hessian(self.eta_hat, log_sigma=True, rel=1e-4) @ J
        L = optim.whitening(H, None) if np.all(np.isfinite(H)) else None
        if L is None:
            L = np.diag(0.1 * np.abs(self.nu_hat) + 0.05)
        return L

    def __call__(self, u):
        return self.solve(u)[0]

    def solve(self, u):
        """Return ``(lp(u), nu*)``."""
        return self.solve_c(self.coords.c_from_u(float(u)))

    def solve_c(self, c):
        """Return ``(lp, nu*)`` at canonical coordinate ``c``."""
        c = float(c)
        if c in self._cache:
            return self._cache[c]
        fun = self._inner(c)
        if self.nu_hat.size == 0:
            val, nu = fun(self.nu_hat), self.nu_hat
        else:
            # neighbours on both sides: an outer point reached by a long
            # step may have stalled on a poor solution, the inner one has not
            starts = [self.nu_hat]
            for near in self._neighbours(c):
                starts.append(self._cache[near][1])
                refit = self._refit_start(c, near)
                if refit is not None:
                    starts.append(refit)
            x0 = max(starts, key=fun)
            res = optim.maximize(fun, x0, scale=self._scale, xatol=1e-5,
                                 fatol=self.inner_tol, restarts=1)
            self.evaluations += res.nfev
            val, nu = res.fun, res.x
            if not np.isfinite(val):
                val = -np.inf
        self._cache[c] = (val, nu)
        return val, nu

    def _neighbours(self, c):
        """Nearest cached canonical coordinates below and above ``c``."""
        below = [v for v in self._cache if v < c]
        above = [v for v in self._cache if v > c]
        out = []
        if below:
            out.append(max(below))
        if above:
            out.append(min(above))
        return out

    def _refit_start(self, c, near):
        """Start for a held curve coefficient ``c``, or None.

        Holding one polynomial coefficient while copying the others from a
        neighbour shifts the whole curve when the data's log argument is
        far from zero.  Instead the free coefficients are refitted by least
        squares to the neighbour's curve at the data.
        """
        coords, spec = self.coords, self.spec
        ncoef = spec.curve.coef_count
        if self.target.kind is not TargetKind.RAW or coords.elim >= ncoef:
            return None
        eta_prev = coords.complete(near, self._expand(self._cache[near][1]))
        x = self.ll.curve_args
        prev = spec.curve.log_curve(eta_prev[:ncoef], x)
        basis = np.column_stack([x ** j for j in range(ncoef)])
        rest = [j for j in range(ncoef) if j != coords.elim]
        coef, *_ = np.linalg.lstsq(basis[:, rest], prev - c * basis[:, coords.elim], rcond=None)
        eta = eta_prev.copy()
        eta[coords.elim] = c
        eta[rest] = coef
        # the reflected coordinates map a non-monotone refit onto an
        # admissible curve nearby, so no feasibility check is needed
        return coords.nu_from_eta(eta)[self._free]

    def theta_at(self, c, nu):
        """``theta`` for the nuisance solution ``nu`` at canonical coordinate ``c``."""
        eta = self.coords.complete(c, self._expand(nu))
        return np.append(eta[:-1], math.exp(eta[-1]))

    def relative(self, u):
        return math.exp(min(0.0, self(u) - self.loglik_hat))


def _wald_se_u(profile):
    """Delta-method standard error of the search coordinate, or None."""
    fitted = profile.fitted
    if fitted.wald_cov is None:
        return None
    coords = profile.coords
    theta = fitted.theta

    def u_of(th):
        return coords.u_from_c(coords.c_from_theta(th))

    try:
        g = optim.gradient(u_of, theta, np.maximum(1e-6, 1e-6 * np.abs(theta)))
    except (DomainError, ValueError, OverflowError):
        return None
    var = float(g @ fitted.wald_cov @ g)
    return math.sqrt(var) if var > 0 and np.isfinite(var) else None


def _search_side(profile, k, sign, step, bounds, xtol):
    """Find the crossing ``lp = k`` on one side of the estimate.

    Steps outward on the search scale ``u`` to bracket the crossing, then
    solves for it in the canonical coordinate ``c``.  The search scale thus
    only shapes the bracketing; the endpoint does not inherit the rounding
    of ``u`` (a probability next to 1 on the identity scale, say).

    Returns ``(c_root, boundary_flag, warnings)``.
    """
    c_of = profile.coords.c_from_u
    notes = []
    u_prev, c_prev, g_prev = profile.u_hat, profile.c_hat, profile.loglik_hat - k
    edge = bounds[1] if sign > 0 else bounds[0]
    if sign * (edge - u_prev) <= 0.0:
        # the estimate itself rounds onto the edge of the search scale
        return c_prev, True, notes
    for _ in range(80):
        u_next = u_prev + sign * step
        at_edge = False
        if (sign > 0 and u_next >= edge) or (sign < 0 and u_next <= edge):
            u_next, at_edge = edge, True
        g = profile(u_next) - k
        if g < 0.0:
            break
        if g > g_prev + 1e-7:
            notes.append(f"profile not monotone near u={u_next:.6g}")
        if at_edge:
            return c_of(edge), True, notes
        u_prev, c_prev, g_prev = u_next, c_of(u_next), g
        step *= 2.0
    else:
        return c_prev, True, notes + ["no crossing found before step limit"]

    # Solve on the signed-root scale: sqrt(2 (lhat - lp)) is close to linear
    # in c, so brentq needs fewer profile solves than on lp itself.  The
    # root is unchanged.
    r_cut = math.sqrt(2.0 * max(profile.loglik_hat - k, 0.0))

    def fn(c):
        drop = profile.loglik_hat - profile.solve_c(c)[0]
        if not np.isfinite(drop):
            return 1e6
        return math.sqrt(2.0 * max(drop, 0.0)) - r_cut

    c_a, c_b = sorted((c_prev, c_of(u_next)))
    root = optimize.brentq(fn, c_a, c_b, xtol=xtol, rtol=1e-14, maxiter=200)
    return root, False, notes


def lr_interval(fitted, data, target, alpha=0.05, side="both", profile=None):
    """Likelihood-ratio confidence interval for ``target``.

    Parameters
    ----------
    fitted : FittedModel
        A converged fit on ``data``.
    data : SNDataset
    target : ScalarTarget
    alpha : float
        One minus the confidence level, in (0, 1].  ``alpha = 1`` makes the
        cutoff equal to the maximum and the interval collapses to the
        estimate.
    side : {"both", "lower", "upper"}
        Endpoints to compute; the others are returned as ``None``.
    profile : Profile, optional
        Reuse a profile (and its cache) for the same target.

    Returns
    -------
    LRInterval
        With per-endpoint diagnostics: the witness ``theta``, its
        log-likelihood and the residuals ``loglik - k`` and
        ``xi(theta) - endpoint``.
    """
    if not fitted.converged:
        raise PreconditionError("fitted model did not converge")
    if side not in ("both", "lower", "upper"):
        raise DomainError(f"side must be 'both', 'lower' or 'upper', got {side!r}")
    k = lr_cutoff(fitted.loglik_hat, alpha)
    prof = profile or Profile(fitted, data, target)
    xi_hat = prof.xi_hat
    out = LRInterval(estimate=xi_hat, lower=None, upper=None, level=1.0 - alpha,
                     method="LR", cutoff_k=k, diagnostics={"warnings": []})
    if k >= fitted.loglik_hat:
        if side in ("both", "lower"):
            out.lower = xi_hat
        if side in ("both", "upper"):
            out.upper = xi_hat
        return out

    chi = math.sqrt(2.0 * (fitted.loglik_hat - k))
    se = _wald_se_u(prof)
    step = 1.2 * chi * se if se else 0.1 * (1.0 + abs(prof.u_hat))
    bounds = prof.coords.u_bounds()
    xtol = 1e-11 * max(1.0, abs(prof.c_hat))

    for name, sign in (("lower", -1.0), ("upper", 1.0)):
        if side not in ("both", name):
            continue
        c, boundary, notes = _search_side(prof, k, sign, step, bounds, xtol)
        out.diagnostics["warnings"].extend(notes)
        for note in notes:
            warnings.warn(f"{target.kind.value} {name} endpoint: {note}", RuntimeWarning,
                          stacklevel=2)
        val, nu = prof.solve_c(c)
        xi = prof.coords.xi_from_c(c)
        ep = Endpoint(value=xi, boundary=boundary, loglik=val,
                      loglik_residual=val - k)
        if np.isfinite(val):
            theta = prof.theta_at(c, nu)
            ep.theta = theta.tolist()
            try:
                ep.xi_residual = target.value(prof.spec, theta) - xi
            except (DomainError, ValueError):
                ep.xi_residual = None
        if not boundary and abs(val - k) > 1e-6:
            raise OptimizationError(
                f"{name} endpoint loglik misses the cutoff by {val - k:.3g}",
                [ep.to_json()],
            )
        setattr(out, name, xi)
        setattr(out, f"{name}_boundary", boundary)
        out.diagnostics[name] = ep.to_json()
    out.diagnostics["profile_evaluations"] = len(prof._cache)
    return out


@dataclass
class ProfileCurve:
    """Profile relative likelihood ``R`` of a raw parameter over a grid."""

    index: int
    grid: np.ndarray
    relative: np.ndarray
    flagged: np.ndarray
    estimate: float

    def crossings(self, alpha):
        """Interval endpoints where ``R`` crosses ``exp(-chi2_{1-alpha;1}/2)``.

        Located on a cubic spline through ``log R``; ends of the grid that
        never drop below the cutoff are reported as ``None``.
        """
        from scipy.interpolate import CubicSpline

        level = -0.5 * dist.chisq1_quantile(1.0 - alpha)
        ok = ~self.flagged & (self.relative > 0)
        g, lr = self.grid[ok], np.log(self.relative[ok]) - level
        spline = CubicSpline(g, lr)
        i_hat = int(np.argmax(lr))
        lower = upper = None
        below = np.flatnonzero(lr[:i_hat] < 0)
        if below.size:
            j = below[-1]
            lower = optimize.brentq(spline, g[j], g[j + 1], xtol=1e-14)
        above = np.flatnonzero(lr[i_hat:] < 0)
        if above.size:
            j = i_hat + above[0]
            upper = optimize.brentq(spline, g[j - 1], g[j], xtol=1e-14)
        return lower, upper


def profile_relative(fitted, data, param_index, grid):
    """Profile relative likelihood ``R(theta_i)`` on ``grid``.

    ``theta_i`` is in ``(beta..., sigma)`` coordinates.  The nuisance
    parameters are maximized out at each grid value; points where that fails
    are flagged and given ``R = nan``.
    """
    grid = np.asarray(grid, dtype=float)
    target = ScalarTarget.raw(param_index, scale="identity")
    prof = Profile(fitted, data, target)
    rel = np.empty(grid.size)
    flagged = np.zeros(grid.size, dtype=bool)
    order = np.argsort(np.abs(grid - prof.u_hat))
    for i in order:
        try:
            val = prof(grid[i])
        except (DomainError, ValueError, OverflowError):
            val = -np.inf
        if np.isfinite(val):
            rel[i] = math.exp(min(0.0, val - fitted.loglik_hat))
        else:
            rel[i] = np.nan
            flagged[i] = True
    return ProfileCurve(index=param_index, grid=grid, relative=rel, flagged=flagged,
                        estimate=float(fitted.theta[param_index]))


def profile_interval(fitted, data, param_index, alpha=0.05, n_grid=121, width=None):
    """LR interval of a raw parameter from crossings of its profile curve.

    The grid spans ``estimate +/- width`` (default: 1.6 times the Wald
    half-width, widened until both ends drop below the cutoff).  The spline
    crossing only brackets each endpoint; the endpoint itself is the root of
    the exact profile inside the bracketing grid cell, so kinks in the
    profile between grid points do not bias it.
    """
    theta = fitted.theta
    se = fitted.standard_errors
    z = math.sqrt(dist.chisq1_quantile(1.0 - alpha))
    half = width if width is not None else 1.6 * z * (se[param_index] if se is not None else 0.1)
    is_sigma = param_index == fitted.spec.n_params - 1
    for _ in range(6):
        lo = theta[param_index] - half
        if is_sigma and lo <= 0:
            lo = theta[param_index] * 1e-3
        grid = np.linspace(lo, theta[param_index] + half, n_grid)
        curve = profile_relative(fitted, data, param_index, grid)
        lower, upper = curve.crossings(alpha)
        if lower is not None and upper is not None:
            return (_refine_crossing(fitted, data, param_index, alpha, curve.grid, lower),
                    _refine_crossing(fitted, data, param_index, alpha, curve.grid, upper),
                    curve)
        half *= 1.6
    return lower, upper, curve


def _refine_crossing(fitted, data, param_index, alpha, grid, approx):
    """Root of the exact profile at the cutoff within the grid cell holding ``approx``."""
    prof = Profile(fitted, data, ScalarTarget.raw(param_index, scale="identity"))
    k = lr_cutoff(fitted.loglik_hat, alpha)
    j = int(np.clip(np.searchsorted(grid, approx), 1, grid.size - 1))
    a, b = grid[j - 1], grid[j]
    fa, fb = prof(a) - k, prof(b) - k
    if not (np.isfinite(fa) and np.isfinite(fb)) or fa * fb > 0:
        return approx
    return optimize.brentq(lambda x: prof(x) - k, a, b, xtol=1e-12 * max(1.0, abs(approx)))


def _wald_transform(spec, target):
    """Return ``(forward, inverse)`` maps to the scale the Wald interval uses."""
    fam = spec.error_family
    if target.is_quantile or (target.kind is TargetKind.RAW
                              and target.index == spec.n_params - 1):
        return np.log, np.exp
    if target.is_cdf:
        return (lambda v: dist.std_quantile(fam, v)), (lambda v: dist.std_cdf(fam, v))
    return (lambda v: v), (lambda v: v)


def wald_interval(fitted, target, alpha=0.05):
    """Delta-method Wald interval on a transformed scale.

    Quantiles and ``sigma`` use the log scale; probabilities use the error
    family's quantile scale (probit for normal errors), which keeps the
    back-transformed interval inside (0, 1).
    """
    if fitted.wald_cov is None:
        raise PreconditionError("Wald covariance unavailable (singular information)")
    if not 0.0 < alpha <= 1.0:
        raise DomainError("alpha must lie in (0, 1]")
    spec = fitted.spec
    target.validate(spec)
    fwd, inv = _wald_transform(spec, target)
    theta = fitted.theta
    xi_hat = target.value(spec, theta)

    def h(th):
        return float(fwd(target.value(spec, th)))

    g = optim.gradient(h, theta, np.maximum(1e-6, 1e-6 * np.abs(theta)))
    var = float(g @ fitted.wald_cov @ g)
    se = math.sqrt(max(var, 0.0))
    z = float(special.ndtri(1.0 - alpha / 2.0)) if alpha < 1.0 else 0.0
    center = h(theta)
    lower, upper = float(inv(center - z * se)), float(inv(center + z * se))
    if se == 0.0:
        lower = upper = xi_hat
    return LRInterval(estimate=xi_hat, lower=lower, upper=upper, level=1.0 - alpha,
                      method="Wald", diagnostics={"se_transformed": se})


def with_scale(target, scale):
    return replace(target, scale=scale)
