"""Figure rendering for the report-emitting commands.

Figures are written straight to PNG files next to the delimited output;
nothing is shown interactively.  The PNG metadata is pinned so repeated runs
of the same configuration produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .baseline import BaselineReport
from .complexity import ComplexityReport

__all__ = ["complexity_figure", "baseline_figure"]

_METADATA = {"Software": "foctl"}


def complexity_figure(report: ComplexityReport, path: str | Path) -> Path:
    """Log-log gap-vs-batches plot with the evaluated bounds overlaid."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.errorbar(
        report.n_values,
        report.gap_mean,
        yerr=report.gap_se,
        fmt="o-",
        capsize=3,
        label="empirical gap (plug-in)",
    )
    ax.plot(report.n_values, report.rollout_gap_mean, "s--", alpha=0.7, label="empirical gap (rollout)")
    ax.plot(report.n_values, report.bound_ls, "k-", label="least-squares bound")
    if report.lagrange_assumption_ok:
        ax.plot(report.n_values, report.bound_lagrange, "k:", label="multiplier bound")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("number of batches N")
    ax.set_ylabel("|estimated cost - true cost|")
    ax.set_title(f"Sample-complexity gap (fitted slope {report.loglog_slope:.3f})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150, metadata=_METADATA)
    plt.close(fig)
    return out


def baseline_figure(report: BaselineReport, path: str | Path) -> Path:
    """Per-step held-out prediction MSE of the two estimators."""
    steps = range(1, len(report.per_step_folti) + 1)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.plot(steps, report.per_step_folti, "o-", label="fractional estimator")
    ax.plot(steps, report.per_step_lti, "s--", label="plain LTI estimator")
    ax.set_yscale("log")
    ax.set_xlabel("prediction step")
    ax.set_ylabel("held-out MSE")
    ax.set_title(f"Multi-step prediction (MSE ratio {report.ratio:.3f})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150, metadata=_METADATA)
    plt.close(fig)
    return out
