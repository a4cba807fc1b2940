"""Standardized location-scale error distributions.

Each :class:`ErrorFamily` is the distribution of the standardized error
``eps`` in ``log(N) = location + sigma * eps``.  The normal family gives a
lognormal life distribution, the smallest extreme value family a Weibull
one and the logistic family a loglogistic one.

All functions accept scalars or arrays and are written so that the log-cdf
and log-survival stay finite far into the tails; censored likelihood terms
rely on that.
"""
from __future__ import annotations

import enum

import numpy as np
from scipy import special

from .errors import DomainError

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class ErrorFamily(str, enum.Enum):
    NORMAL = "normal"
    SEV = "sev"
    LOGISTIC = "logistic"

    @classmethod
    def parse(cls, name):
        """Accept either the error name or the induced life-distribution name."""
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_").replace(" ", "_")
        try:
            return _ALIASES[key]
        except KeyError:
            raise DomainError(f"unknown error family {name!r}") from None

    @property
    def life_distribution(self):
        return {"normal": "lognormal", "sev": "weibull", "logistic": "loglogistic"}[self.value]


_ALIASES = {
    "normal": ErrorFamily.NORMAL,
    "gaussian": ErrorFamily.NORMAL,
    "lognormal": ErrorFamily.NORMAL,
    "sev": ErrorFamily.SEV,
    "smallest_extreme_value": ErrorFamily.SEV,
    "weibull": ErrorFamily.SEV,
    "logistic": ErrorFamily.LOGISTIC,
    "loglogistic": ErrorFamily.LOGISTIC,
}


def _finite(z):
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("standardized argument must be finite")
    return z


def _prob(p, closed_low=False):
    p = np.asarray(p, dtype=float)
    low_ok = p >= 0.0 if closed_low else p > 0.0
    if not np.all(low_ok & (p < 1.0)):
        raise DomainError(f"probability must lie in {'[0' if closed_low else '(0'}, 1)")
    return p


def _out(x):
    return x.item() if np.ndim(x) == 0 else x


def std_logcdf(family, z):
    family = ErrorFamily.parse(family)
    z = _finite(z)
    if family is ErrorFamily.NORMAL:
        out = special.log_ndtr(z)
    elif family is ErrorFamily.SEV:
        ez = np.exp(z)
        with np.errstate(divide="ignore"):
            out = np.where(z < -30.0, z - 0.5 * ez, np.log(-np.expm1(-ez)))
    else:
        out = -np.logaddexp(0.0, -z)
    return _out(out)


def std_logsf(family, z):
    """Log of the survival function ``1 - cdf(z)``, accurate in both tails."""
    family = ErrorFamily.parse(family)
    z = _finite(z)
    if family is ErrorFamily.NORMAL:
        out = special.log_ndtr(-z)
    elif family is ErrorFamily.SEV:
        out = -np.exp(z)
    else:
        out = -np.logaddexp(0.0, z)
    return _out(out)


def std_cdf(family, z):
    """Standardized cdf.

    Parameters
    ----------
    family : ErrorFamily or str
    z : float or array_like
        Standardized argument; must be finite.

    Returns
    -------
    float or ndarray
        Probabilities, strictly increasing in ``z``.
    """
    family = ErrorFamily.parse(family)
    z = _finite(z)
    if family is ErrorFamily.NORMAL:
        out = special.ndtr(z)
    elif family is ErrorFamily.SEV:
        out = -np.expm1(-np.exp(z))
    else:
        out = special.expit(z)
    return _out(out)


def std_sf(family, z):
    family = ErrorFamily.parse(family)
    z = _finite(z)
    if family is ErrorFamily.NORMAL:
        out = special.ndtr(-z)
    elif family is ErrorFamily.SEV:
        out = np.exp(-np.exp(z))
    else:
        out = special.expit(-z)
    return _out(out)


def std_logpdf(family, z):
    family = ErrorFamily.parse(family)
    z = _finite(z)
    if family is ErrorFamily.NORMAL:
        out = -0.5 * z * z - _LOG_SQRT_2PI
    elif family is ErrorFamily.SEV:
        out = z - np.exp(z)
    else:
        out = -z - 2.0 * np.logaddexp(0.0, -z)
    return _out(out)


def std_pdf(family, z):
    return _out(np.exp(std_logpdf(family, z)))


def std_quantile(family, p):
    """Inverse of :func:`std_cdf` for ``p`` in the open unit interval."""
    family = ErrorFamily.parse(family)
    p = _prob(p)
    if family is ErrorFamily.NORMAL:
        out = special.ndtri(p)
    elif family is ErrorFamily.SEV:
        out = np.log(-np.log1p(-p))
    else:
        out = special.logit(p)
    return _out(out)


def std_isf(family, q):
    """Inverse of :func:`std_sf`: the standardized value with upper-tail mass ``q``.

    Accurate where ``1 - q`` rounds to 1, so probabilities next to 1 can be
    inverted through their complement.
    """
    family = ErrorFamily.parse(family)
    q = _prob(q)
    if family is ErrorFamily.NORMAL:
        out = -special.ndtri(q)
    elif family is ErrorFamily.SEV:
        out = np.log(-np.log(q))
    else:
        out = -special.logit(q)
    return _out(out)


def chisq1_quantile(p):
    """Quantile of the chi-square distribution with one degree of freedom.

    This is the square of the standard normal ``(1 + p) / 2`` quantile,
    evaluated as ``2 erfinv(p)**2`` so that small ``p`` keeps full relative
    precision; ``p = 0`` gives exactly 0.
    """
    p = _prob(p, closed_low=True)
    return _out(2.0 * special.erfinv(p) ** 2)


# an overflowing exp is the correct limit here (log terms of -inf), so the
# kernels evaluated far out in a likelihood search stay quiet about it
def _sev_logsf(z):
    with np.errstate(over="ignore"):
        return -np.exp(z)


def _sev_logpdf(z):
    with np.errstate(over="ignore"):
        return z - np.exp(z)


def _normal_logpdf(z):
    return -0.5 * z * z - _LOG_SQRT_2PI


def _logistic_logpdf(z):
    return -z - 2.0 * np.logaddexp(0.0, -z)


def _logistic_logsf(z):
    return -np.logaddexp(0.0, z)


def _normal_logsf(z):
    return special.log_ndtr(-z)


# (logpdf, logsf) without argument validation, for likelihood inner loops
KERNELS = {
    ErrorFamily.NORMAL: (_normal_logpdf, _normal_logsf),
    ErrorFamily.SEV: (_sev_logpdf, _sev_logsf),
    ErrorFamily.LOGISTIC: (_logistic_logpdf, _logistic_logsf),
}
