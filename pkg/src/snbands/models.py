"""Fatigue-life and fatigue-strength models in either orientation.

Two orientations are supported:

``life-specified``
    ``log N = log g(S; beta) + sigma * eps``.  The fatigue-life distribution at
    a stress ``S`` is log-location-scale; the fatigue-strength distribution at
    a cycle count is induced through ``g^-1``.

``strength-specified``
    ``log X = log h(N; beta) + sigma * eps``.  The fatigue-strength
    distribution at ``N`` is log-location-scale; the fatigue-life distribution
    at a stress is induced through ``h^-1``.

In both cases the curve is a polynomial in the log of its argument (see
:class:`CurveFamily`) that must decrease over the model's working domain.
All four target functions (life cdf/quantile, strength cdf/quantile) are
provided for both orientations.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import dist
from .dist import ErrorFamily
from .errors import DomainError, RangeError


class Orientation(str, enum.Enum):
    LIFE = "life-specified"
    STRENGTH = "strength-specified"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for member in cls:
            if key in (member.value, member.value.split("-")[0]):
                return member
        raise DomainError(f"unknown orientation {value!r}")


class CurveKind(str, enum.Enum):
    LOGLINEAR = "loglinear"
    LOGQUADRATIC = "logquadratic"


@dataclass(frozen=True)
class CurveFamily:
    """A curve ``c`` with ``log c(a) = b0 + b1*log(a) [+ b2*log(a)**2]``."""

    kind: CurveKind = CurveKind.LOGLINEAR

    def __post_init__(self):
        object.__setattr__(self, "kind", CurveKind(self.kind))

    @property
    def coef_count(self):
        return 2 if self.kind is CurveKind.LOGLINEAR else 3

    def log_curve(self, beta, u):
        """Log curve value at log-argument ``u``."""
        out = beta[0] + beta[1] * u
        if self.kind is CurveKind.LOGQUADRATIC:
            out = out + beta[2] * u * u
        return out

    def slope(self, beta, u):
        """``d log c / d log a`` at log-argument ``u``."""
        if self.kind is CurveKind.LOGLINEAR:
            return beta[1] + 0.0 * np.asarray(u, dtype=float)
        return beta[1] + 2.0 * beta[2] * u

    def is_decreasing(self, beta, log_domain):
        # the slope is affine in u, so checking both ends covers the interval
        lo, hi = log_domain
        return bool(self.slope(beta, lo) < 0.0 and self.slope(beta, hi) < 0.0)


def invert_curve(curve, beta, target, log_domain=None, tol=1e-12):
    """Solve ``log c(a) = target`` for the argument ``a``.

    Loglinear curves are inverted in closed form; logquadratic curves by a
    Newton iteration safeguarded with bisection on the log-domain bracket.

    Parameters
    ----------
    curve : CurveFamily
    beta : sequence of float
    target : float
        Required log-level of the curve.
    log_domain : (float, float), optional
        Bracket for ``log(a)``.  Mandatory for logquadratic curves.  When
        given, targets outside the curve's range on it raise
        :class:`RangeError`.

    Returns
    -------
    float
        The argument ``a`` (not its log).
    """
    beta = np.asarray(beta, dtype=float)
    target = float(target)
    if log_domain is not None:
        lo, hi = log_domain
        top, bottom = curve.log_curve(beta, lo), curve.log_curve(beta, hi)
        if not (bottom - 1e-12 <= target <= top + 1e-12):
            raise RangeError(
                f"target log-level {target:.6g} outside attainable range "
                f"[{bottom:.6g}, {top:.6g}]",
                attainable=(float(bottom), float(top)),
            )
    if curve.kind is CurveKind.LOGLINEAR:
        u = (target - beta[0]) / beta[1]
        if log_domain is not None:
            u = min(max(u, lo), hi)
        return math.exp(u)
    if log_domain is None:
        raise DomainError("logquadratic inversion needs a working domain")

    # f(u) decreasing with f(lo) >= 0 >= f(hi)
    a, b = float(lo), float(hi)
    u = 0.5 * (a + b)
    for _ in range(200):
        f = curve.log_curve(beta, u) - target
        if abs(f) <= tol:
            break
        if f > 0.0:
            a = u
        else:
            b = u
        d = curve.slope(beta, u)
        step = u - f / d if d < 0.0 else None
        u = step if step is not None and a < step < b else 0.5 * (a + b)
        if b - a < 1e-15 * max(1.0, abs(u)):
            break
    return math.exp(u)


@dataclass(frozen=True)
class ParamVector:
    """Model parameters ``(beta..., sigma)``."""

    beta: tuple
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not self.sigma > 0.0:
            raise DomainError("sigma must be positive")

    def as_array(self):
        return np.array(self.beta + (self.sigma,))

    @classmethod
    def from_array(cls, theta):
        theta = np.asarray(theta, dtype=float)
        return cls(beta=tuple(theta[:-1]), sigma=theta[-1])


def _as_theta(theta):
    if isinstance(theta, ParamVector):
        return theta.as_array()
    return np.asarray(theta, dtype=float)


def _interval(value, name):
    lo, hi = (float(v) for v in value)
    if not (0.0 < lo < hi and math.isfinite(hi)):
        raise DomainError(f"{name} domain must satisfy 0 < lo < hi < inf, got {value!r}")
    return (lo, hi)


@dataclass(frozen=True)
class ModelSpec:
    """Orientation, error family, curve family and working domain.

    ``stress_domain`` is always required; ``cycles_domain`` is required for
    the strength-specified orientation (the curve lives on cycles) and is
    optional otherwise.  Evaluations outside the working domain raise
    :class:`DomainError` instead of extrapolating.
    """

    orientation: Orientation = Orientation.LIFE
    error_family: ErrorFamily = ErrorFamily.NORMAL
    curve: CurveFamily = CurveFamily()
    stress_domain: tuple = (1.0, 1e3)
    cycles_domain: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "orientation", Orientation.parse(self.orientation))
        object.__setattr__(self, "error_family", ErrorFamily.parse(self.error_family))
        if not isinstance(self.curve, CurveFamily):
            object.__setattr__(self, "curve", CurveFamily(self.curve))
        object.__setattr__(self, "stress_domain", _interval(self.stress_domain, "stress"))
        if self.cycles_domain is not None:
            object.__setattr__(self, "cycles_domain", _interval(self.cycles_domain, "cycles"))
        elif self.orientation is Orientation.STRENGTH:
            raise DomainError("strength-specified models need a cycles domain")

    @property
    def n_params(self):
        return self.curve.coef_count + 1

    @property
    def curve_log_domain(self):
        """Log-domain of the curve's own argument (stress or cycles)."""
        dom = self.stress_domain if self.orientation is Orientation.LIFE else self.cycles_domain
        return (math.log(dom[0]), math.log(dom[1]))

    def admissible(self, theta):
        theta = _as_theta(theta)
        if theta.shape != (self.n_params,) or not np.all(np.isfinite(theta)):
            return False
        return theta[-1] > 0.0 and self.curve.is_decreasing(theta[:-1], self.curve_log_domain)

    def check_theta(self, theta):
        theta = _as_theta(theta)
        if theta.shape != (self.n_params,):
            raise DomainError(f"expected {self.n_params} parameters, got {theta.shape}")
        if not theta[-1] > 0.0:
            raise DomainError("sigma must be positive")
        return theta

    # -- domain checks -------------------------------------------------
    def check_stress(self, s, name="stress"):
        s = np.asarray(s, dtype=float)
        lo, hi = self.stress_domain
        if not np.all((s >= lo) & (s <= hi)):
            raise DomainError(f"{name} outside working domain [{lo:g}, {hi:g}]")
        return s

    def check_cycles(self, t, name="cycles"):
        t = np.asarray(t, dtype=float)
        if not np.all(t > 0.0):
            raise DomainError(f"{name} must be positive")
        if self.cycles_domain is not None:
            lo, hi = self.cycles_domain
            if not np.all((t >= lo) & (t <= hi)):
                raise DomainError(f"{name} outside working domain [{lo:g}, {hi:g}]")
        return t

    # -- serialization -------------------------------------------------
    def to_json(self):
        domain = {"stress": list(self.stress_domain)}
        if self.cycles_domain is not None:
            domain["cycles"] = list(self.cycles_domain)
        return {
            "orientation": self.orientation.value,
            "error_family": self.error_family.value,
            "curve": {"kind": self.curve.kind.value, "beta_len": self.curve.coef_count},
            "domain": domain,
        }

    @classmethod
    def from_json(cls, obj):
        try:
            curve = CurveFamily(CurveKind(obj["curve"]["kind"]))
            beta_len = obj["curve"].get("beta_len", curve.coef_count)
            if int(beta_len) != curve.coef_count:
                raise DomainError(
                    f"beta_len {beta_len} does not match curve kind {curve.kind.value}"
                )
            domain = obj["domain"]
            return cls(
                orientation=obj.get("orientation", "life-specified"),
                error_family=obj.get("error_family", "normal"),
                curve=curve,
                stress_domain=tuple(domain["stress"]),
                cycles_domain=tuple(domain["cycles"]) if domain.get("cycles") else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(f"malformed model specification: {exc}") from exc


def _invert(spec, beta, target):
    return invert_curve(spec.curve, beta, target, spec.curve_log_domain)


def _q(spec, p):
    return dist.std_quantile(spec.error_family, p)


def life_location(spec, theta, stress):
    """Log-cycles at which the standardized life argument is zero.

    For the life-specified orientation this is ``log g(S; beta)``; for the
    strength-specified one it is ``log h^-1(S; beta)``.
    """
    theta = spec.check_theta(theta)
    beta = theta[:-1]
    s = spec.check_stress(stress)
    if spec.orientation is Orientation.LIFE:
        return spec.curve.log_curve(beta, np.log(s))
    return math.log(_invert(spec, beta, math.log(float(s))))


def life_z(spec, theta, t, stress):
    """Standardized argument of the life cdf (vectorized, no domain checks)."""
    beta, sigma = theta[:-1], theta[-1]
    if spec.orientation is Orientation.LIFE:
        return (np.log(t) - spec.curve.log_curve(beta, np.log(stress))) / sigma
    return (np.log(stress) - spec.curve.log_curve(beta, np.log(t))) / sigma


def strength_z(spec, theta, x, cycles):
    beta, sigma = theta[:-1], theta[-1]
    if spec.orientation is Orientation.LIFE:
        return (np.log(cycles) - spec.curve.log_curve(beta, np.log(x))) / sigma
    return (np.log(x) - spec.curve.log_curve(beta, np.log(cycles))) / sigma


def life_cdf(spec, theta, t, stress):
    """Fatigue-life cdf ``Pr(N <= t)`` at stress ``stress``."""
    theta = spec.check_theta(theta)
    t = spec.check_cycles(t, "t")
    s = spec.check_stress(stress)
    return dist.std_cdf(spec.error_family, life_z(spec, theta, t, s))


def life_quantile(spec, theta, p, stress):
    """Fatigue-life ``p`` quantile (cycles) at stress ``stress``."""
    theta = spec.check_theta(theta)
    s = float(spec.check_stress(stress))
    q = _q(spec, p)
    beta, sigma = theta[:-1], theta[-1]
    if spec.orientation is Orientation.LIFE:
        return math.exp(spec.curve.log_curve(beta, math.log(s)) + q * sigma)
    return _invert(spec, beta, math.log(s) - q * sigma)


def life_pdf(spec, theta, t, stress):
    """Fatigue-life density ``dF/dt``."""
    theta = spec.check_theta(theta)
    t = spec.check_cycles(t, "t")
    s = spec.check_stress(stress)
    sigma = theta[-1]
    dens = dist.std_pdf(spec.error_family, life_z(spec, theta, t, s)) / (sigma * t)
    if spec.orientation is Orientation.STRENGTH:
        dens = dens * np.abs(spec.curve.slope(theta[:-1], np.log(t)))
    return dens


def strength_cdf(spec, theta, x, cycles):
    """Fatigue-strength cdf ``Pr(X <= x)`` at ``cycles``."""
    theta = spec.check_theta(theta)
    x = spec.check_stress(x, "x")
    n = spec.check_cycles(cycles, "N_e")
    return dist.std_cdf(spec.error_family, strength_z(spec, theta, x, n))


def strength_quantile(spec, theta, p, cycles):
    """Fatigue-strength ``p`` quantile (stress units) at ``cycles``."""
    theta = spec.check_theta(theta)
    n = float(spec.check_cycles(cycles, "N_e"))
    q = _q(spec, p)
    beta, sigma = theta[:-1], theta[-1]
    if spec.orientation is Orientation.LIFE:
        return _invert(spec, beta, math.log(n) - q * sigma)
    return math.exp(spec.curve.log_curve(beta, math.log(n)) + q * sigma)


def map_to_strength(spec, theta, cycles_domain=None):
    """Re-express a loglinear life-specified model as a strength-specified one.

    ``log N = b0 + b1 log S + sigma eps`` is the same model as
    ``log X = b0/(-b1) + (1/b1) log N + (sigma/|b1|) eps``.  Returns the new
    ``(spec, theta)``.
    """
    if spec.orientation is not Orientation.LIFE or spec.curve.kind is not CurveKind.LOGLINEAR:
        raise DomainError("only loglinear life-specified models map exactly")
    theta = spec.check_theta(theta)
    b0, b1, sigma = theta
    new_spec = ModelSpec(
        orientation=Orientation.STRENGTH,
        error_family=spec.error_family,
        curve=spec.curve,
        stress_domain=spec.stress_domain,
        cycles_domain=cycles_domain or spec.cycles_domain,
    )
    return new_spec, np.array([b0 / -b1, 1.0 / b1, sigma / abs(b1)])


def map_to_life(spec, theta, cycles_domain=None):
    """Inverse of :func:`map_to_strength`."""
    if spec.orientation is not Orientation.STRENGTH or spec.curve.kind is not CurveKind.LOGLINEAR:
        raise DomainError("only loglinear strength-specified models map exactly")
    theta = spec.check_theta(theta)
    h0, h1, sigma = theta
    new_spec = ModelSpec(
        orientation=Orientation.LIFE,
        error_family=spec.error_family,
        curve=spec.curve,
        stress_domain=spec.stress_domain,
        cycles_domain=cycles_domain or spec.cycles_domain,
    )
    return new_spec, np.array([h0 / -h1, 1.0 / h1, sigma / abs(h1)])
