"""Report figures: matplotlib PNGs and a gnuplot script over metrics.csv."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "figure.figsize": (5.0, 3.4),
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 120,
}

GNUPLOT = """\
# gnuplot script for the run report; run `gnuplot plots.gp` in this directory
set datafile separator ","
set terminal pngcairo size 800,520
set key top left
set logscale xy
set xlabel "T"

set output "regret_gp.png"
set ylabel "dynamic regret"
plot "metrics.csv" using 1:($2 > 0 ? $2 : 1/0) skip 1 with lines title "observed", \\
     "" using 1:6 skip 1 with lines dashtype 2 title "bound"

set output "fit_gp.png"
set ylabel "squared fit"
plot "metrics.csv" using 1:($4 > 0 ? $4 : 1/0) skip 1 with lines title "observed", \\
     "" using 1:7 skip 1 with lines dashtype 2 title "bound"

unset logscale y
set output "fit_linear_gp.png"
set ylabel "fit"
plot "metrics.csv" using 1:3 skip 1 with lines title "cross fit", \\
     "" using 1:8 skip 1 with lines title "own-constraint fit"
"""


def write_gnuplot(out_dir) -> Path:
    path = Path(out_dir) / "plots.gp"
    path.write_text(GNUPLOT, encoding="utf-8")
    return path


def _positive(T, v):
    keep = v > 0
    return T[keep], v[keep]


def write_figures(out_dir, metrics) -> list[Path]:
    """regret.png, fit.png and consensus.png for a completed run."""
    out_dir = Path(out_dir)
    T = np.arange(1, metrics.T + 1)
    paths = []
    if metrics.T == 0:
        return paths
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.loglog(*_positive(T, metrics.regret), label="observed regret")
        ax.loglog(T, metrics.regret_rhs, "--", label="upper bound")
        ax.set_xlabel("T")
        ax.set_ylabel("dynamic regret")
        ax.legend(frameon=False)
        fig.tight_layout()
        paths.append(out_dir / "regret.png")
        fig.savefig(paths[-1])
        plt.close(fig)

        fig, (a1, a2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
        a1.plot(T, metrics.fit, label="cross fit")
        a1.plot(T, metrics.fit_diag, label="own-constraint fit")
        a1.set_xlabel("T")
        a1.set_ylabel("fit")
        a1.legend(frameon=False)
        a2.loglog(*_positive(T, metrics.fit_sq), label="observed")
        a2.loglog(T, metrics.fit_sq_rhs, "--", label="upper bound")
        a2.set_xlabel("T")
        a2.set_ylabel("squared fit")
        a2.legend(frameon=False)
        fig.tight_layout()
        paths.append(out_dir / "fit.png")
        fig.savefig(paths[-1])
        plt.close(fig)

        cons = metrics.consensus
        fig, ax = plt.subplots()
        ax.semilogy(*_positive(T, cons.error.max(axis=1)), label="max_i ||x_i - mean||")
        ax.semilogy(*_positive(T, cons.rhs), "--", label="upper bound")
        ax.set_xlabel("t")
        ax.set_ylabel("consensus error")
        ax.legend(frameon=False)
        fig.tight_layout()
        paths.append(out_dir / "consensus.png")
        fig.savefig(paths[-1])
        plt.close(fig)
    return paths


def write_sweep_figure(out_dir, result) -> Path:
    """Log-log regret and fit against the horizon, one line per seed."""
    path = Path(out_dir) / "sweep.png"
    with plt.rc_context(RC):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
        for s in result.per_seed:
            a1.loglog(*_positive(np.array(s.horizons), s.regret), "o-", label=f"seed {s.seed}")
            a2.loglog(*_positive(np.array(s.horizons), s.fit), "o-", label=f"seed {s.seed}")
        a1.set_xlabel("T")
        a1.set_ylabel("dynamic regret")
        a2.set_xlabel("T")
        a2.set_ylabel("fit")
        a1.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
