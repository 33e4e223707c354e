"""Figures rendered next to the CSV tables of an experiment run."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiments import ExperimentResult  # noqa: E402

STYLE = {
    "figure.figsize": (5.5, 3.8),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}


def _spectrum(ax, data):
    ref = np.asarray(data["reference"])
    idx = np.arange(len(ref))
    ax.plot(idx, ref, "k_", markersize=22, label="closed form")
    for k, (w, levels) in enumerate(sorted(data["runs"].items())):
        ax.plot(idx + 0.08 * (k + 1), levels, "o", ms=4, label=f"Fock, $\\omega_{{osc}}$={w:g}")
    ax.set_xlabel("level index")
    ax.set_ylabel("energy")
    ax.set_xticks(idx)
    ax.legend()


def _residuals(ax, rows):
    vals = np.array([max(r, 1e-18) for _, r in rows])
    ax.semilogy(np.arange(len(vals)), vals, ".", ms=4)
    ax.axhline(1e-12, color="C3", lw=0.8, ls="--", label="tolerance")
    ax.set_xlabel("identity")
    ax.set_ylabel("max interior residual")
    ax.legend()


def _scaling(ax, rows):
    states = sorted({s for _, s, _, _ in rows})
    for s in states:
        pts = sorted((w, abs(c)) for w, st, c, _ in rows if st == s and c != 0.0)
        if pts:
            w, c = zip(*pts)
            ax.loglog(w, c, "o-", ms=4, label=f"state {s}")
    ax.set_xlabel("$\\omega_{osc}$")
    ax.set_ylabel("|second-order correction|")
    ax.legend()


def _oracle(ax, rows):
    err = np.array([max(r[4], 1e-18) for r in rows])
    level = np.array([r[1] for r in rows])
    ax.semilogy(level, err, ".", ms=4, alpha=0.7)
    ax.axhline(1e-8, color="C3", lw=0.8, ls="--", label="tolerance")
    ax.set_xlabel("level")
    ax.set_ylabel("|Williamson - Fock|")
    ax.legend()


def _convergence(ax, errs):
    caps = sorted({c for c, _ in errs})
    for w in sorted({w for _, w in errs}):
        ax.semilogy(caps, [errs[(c, w)] for c in caps], "o-", ms=4, label=f"$\\omega_{{osc}}$={w:g}")
    ax.set_xlabel("particle cap")
    ax.set_ylabel("max relative error")
    ax.set_xticks(caps)
    ax.legend()


_DRAW = {
    "spectrum": _spectrum,
    "residuals": _residuals,
    "scaling": _scaling,
    "oracle": _oracle,
    "convergence": _convergence,
}


def render(result: ExperimentResult, out_dir) -> list[Path]:
    """Write one PNG per series in ``result``; return the paths written."""
    out_dir = Path(out_dir)
    written = []
    with plt.rc_context(STYLE):
        for key, data in sorted(result.series.items()):
            draw = _DRAW.get(key)
            if draw is None:
                continue
            fig, ax = plt.subplots()
            draw(ax, data)
            ax.set_title(f"{result.name}: {key}")
            path = out_dir / f"{result.name}_{key}.png"
            tmp = path.with_suffix(".png.tmp")
            fig.savefig(tmp, format="png")
            plt.close(fig)
            tmp.replace(path)
            written.append(path)
    return written
