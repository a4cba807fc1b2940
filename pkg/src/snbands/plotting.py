"""SVG figures of pointwise confidence bands.

Probability axes use the error family's quantile scale (probit for normal
errors) with tick labels in probability; cycles and stress axes are
logarithmic.  S-N curves (qf bands over stress or cycles) are drawn with
cycles on the horizontal axis and stress on the vertical one.  Output is
deterministic: no timestamp and a fixed SVG id salt.
"""
from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.ticker import FixedLocator, FuncFormatter, NullLocator  # noqa: E402

from . import dist  # noqa: E402
from .bands import BandFamily  # noqa: E402

_PROB_TICKS = (0.001, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95, 0.99, 0.999)
_LABELS = {"cycles": "Cycles", "stress": "Stress", "probability": "Fraction failing"}


def _prob_axis(axis, family, lo, hi):
    ticks = [p for p in _PROB_TICKS if lo <= dist.std_quantile(family, p) <= hi]
    axis.set_major_locator(FixedLocator([dist.std_quantile(family, p) for p in ticks]))
    axis.set_minor_locator(NullLocator())
    axis.set_major_formatter(FuncFormatter(
        lambda v, _: f"{float(dist.std_cdf(family, v)):.3g}"))


def _log_labels(axis, lim):
    plain = FuncFormatter(lambda v, _: f"{v:g}")
    axis.set_major_formatter(plain)
    # less than a decade shown: label the minor ticks as well
    if lim[1] < 10.0 * lim[0]:
        axis.set_minor_formatter(plain)


def _to_axis(kind, values, family):
    values = np.asarray(values, dtype=float)
    if kind != "probability":
        return values
    out = np.full(values.shape, np.nan)
    ok = (values > 0) & (values < 1)
    out[ok] = dist.std_quantile(family, values[ok])
    return out


def band_figure(band, data=None, error_family="normal", title=None):
    """Matplotlib figure of ``band`` with an optional data rug.

    Per-point failures (``nan`` endpoints) appear as gaps in the dashed
    band curves.
    """
    family = dist.ErrorFamily.parse(error_family)
    fam = band.family
    x_kind, y_kind = fam.abscissa_kind, fam.ordinate_kind
    sn_plot = fam in (BandFamily.LIFE_QF_VS_STRESS, BandFamily.STRENGTH_QF_VS_CYCLES)
    x = _to_axis(x_kind, band.grid, family)
    curves = [_to_axis(y_kind, getattr(band, name), family)
              for name in ("estimates", "lowers", "uppers")]
    if sn_plot and x_kind == "stress":
        # cycles always go on the horizontal axis of an S-N plot
        curves = [(c, x) for c in curves]
        hx, hy = "cycles", "stress"
    else:
        curves = [(x, c) for c in curves]
        hx, hy = x_kind, y_kind

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    (ex, ey), (lx, ly), (ux, uy) = curves
    ax.plot(ex, ey, color="black", lw=1.5, label="ML estimate")
    ax.plot(lx, ly, color="black", lw=1.0, ls="--",
            label=f"pointwise {100 * band.level:g}% {band.method} band")
    ax.plot(ux, uy, color="black", lw=1.0, ls="--")

    if data is not None:
        _draw_data(ax, data, fam, hx, hy, sn_plot)

    for kind, set_scale, axis in ((hx, ax.set_xscale, ax.xaxis), (hy, ax.set_yscale, ax.yaxis)):
        if kind == "probability":
            lim = ax.get_ylim() if axis is ax.yaxis else ax.get_xlim()
            _prob_axis(axis, family, *lim)
        else:
            set_scale("log")
            _log_labels(axis, ax.get_xlim() if axis is ax.xaxis else ax.get_ylim())
    ax.set_xlabel(_LABELS[hx])
    ax.set_ylabel(_LABELS[hy])
    fixed = {"stress": "stress", "cycles": "cycles", "p": "p"}[fam.fixed_name]
    ax.set_title(title or f"{fam.value}, {fixed} = {band.fixed:.6g}")
    ax.grid(True, which="major", color="0.85", lw=0.6)
    ax.legend(loc="best", fontsize=8, frameon=False)
    fig.tight_layout()
    return fig


def _draw_data(ax, data, fam, hx, hy, sn_plot):
    fail, cens = data.failed, ~data.failed
    if sn_plot:
        ax.plot(data.cycles[fail], data.stress[fail], "o", ms=4, mfc="none", mec="C0",
                label="failure")
        if cens.any():
            ax.plot(data.cycles[cens], data.stress[cens], ">", ms=5, color="C3",
                    label="runout")
        return
    if hx == "probability":
        return
    values = data.cycles if hx == "cycles" else data.stress
    trans = ax.get_xaxis_transform()
    ax.plot(values[fail], np.full(fail.sum(), 0.02), "|", ms=10, color="C0",
            transform=trans, label="failure")
    if cens.any():
        ax.plot(values[cens], np.full(cens.sum(), 0.05), ">", ms=5, color="C3",
                transform=trans, label="runout")


def band_svg(band, data=None, error_family="normal", title=None):
    """SVG text of :func:`band_figure`; identical input gives identical bytes."""
    fig = band_figure(band, data, error_family, title)
    buf = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "snbands", "svg.fonttype": "path"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()
