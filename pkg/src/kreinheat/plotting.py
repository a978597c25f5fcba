"""Figure rendering for CLI reports.

matplotlib is imported lazily and pinned to the Agg backend, so the
library layer never needs it and headless runs work.
"""

from __future__ import annotations

import math
import os
import tempfile

import numpy as np

__all__ = ["figure", "save", "plot_spectrum", "plot_trace", "plot_residuals", "plot_comparison"]


def _plt():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def figure(width: float = 6.0, height: float | None = None):
    """Figure with publication-style defaults; height defaults to the golden ratio."""
    plt = _plt()
    golden = (math.sqrt(5) - 1.0) / 2.0
    fig, ax = plt.subplots(figsize=(width, height or width * golden))
    ax.tick_params(direction="in", which="both", top=True, right=True)
    return fig, ax


def save(fig, path: str) -> str:
    """Write atomically (temp file then rename) and close the figure."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".png")
    os.close(fd)
    try:
        fig.savefig(tmp, dpi=120, bbox_inches="tight", metadata={"Software": None})
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
        _plt().close(fig)
    return path


def plot_spectrum(n, lam, label: str, path: str) -> str:
    fig, ax = figure()
    ax.plot(n, lam, ".", ms=3)
    ax.set_xlabel("n")
    ax.set_ylabel(r"$\lambda_n$")
    ax.set_title(rf"$\theta = {label}$")
    return save(fig, path)


def plot_trace(t, values, label: str, path: str, reference=None) -> str:
    fig, ax = figure()
    ax.semilogx(t, values, "o", ms=3, label="spectral sum")
    if reference is not None:
        ax.semilogx(t, reference, "-", lw=1, label="reference")
        ax.legend(frameon=False)
    ax.set_xlabel("t")
    ax.set_ylabel(r"Tr$\{e^{-tA^\theta}-e^{-tA^\infty}\}$")
    ax.set_title(rf"$\theta = {label}$")
    return save(fig, path)


def plot_residuals(residuals, threshold: float, path: str) -> str:
    fig, ax = figure()
    r = np.log10(np.maximum(np.abs(np.asarray(residuals)), 1e-18))
    ax.hist(r, bins=30)
    ax.axvline(math.log10(threshold), color="k", ls="--", lw=1)
    ax.set_xlabel(r"$\log_{10}$ |residual|")
    ax.set_ylabel("samples")
    return save(fig, path)


def plot_comparison(exps, predicted, fitted, path: str) -> str:
    fig, ax = figure()
    ax.plot(exps, np.abs(predicted), "s", mfc="none", label="predicted")
    ax.plot(exps, np.abs(fitted), "x", label="fitted")
    ax.set_yscale("log")
    ax.set_xlabel("exponent of t")
    ax.set_ylabel("|coefficient|")
    ax.legend(frameon=False)
    return save(fig, path)
