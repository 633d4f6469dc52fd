"""SVG figures for experiment reports (R-D with PSNR range, progressive traces)."""

from __future__ import annotations

import re
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

METHOD_STYLE = {
    "scr+interpolate": dict(color="#1b7837", marker="o"),
    "scr+zero": dict(color="#2166ac", marker="s"),
    "noscr+zero": dict(color="#b2182b", marker="^"),
}


def configure(fontsize=10):
    plt.rcParams.update({
        "font.size": fontsize,
        "axes.labelsize": fontsize,
        "legend.fontsize": fontsize - 1,
        "xtick.labelsize": fontsize - 1,
        "ytick.labelsize": fontsize - 1,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "figure.figsize": (5.5, 4.0),
        "svg.hashsalt": "lrpc",
        "svg.fonttype": "none",
    })


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "_", text).strip("_")


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_rd(rows, outdir) -> list[Path]:
    """One figure per loss condition: corpus-mean PSNR vs bpp, bars spanning the PSNR range."""
    configure()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    grouped = defaultdict(lambda: defaultdict(lambda: defaultdict(list)))
    for row in rows:
        grouped[row["loss"]][row["method"]][row["preset"]].append(row)
    paths = []
    for loss, methods in grouped.items():
        fig, ax = plt.subplots()
        for method, presets in methods.items():
            pts = []
            for preset in sorted(presets):
                rs = presets[preset]
                pts.append((np.mean([r["bpp"] for r in rs]),
                            np.mean([r["psnr_mean"] for r in rs]),
                            np.mean([r["psnr_min"] for r in rs]),
                            np.mean([r["psnr_max"] for r in rs])))
            pts.sort()
            x, y, lo, hi = (np.array(v) for v in zip(*pts))
            ax.errorbar(x, y, yerr=np.clip([y - lo, hi - y], 0, None), capsize=3, label=method,
                        **METHOD_STYLE.get(method, {}))
        ax.set_xlabel("bpp")
        ax.set_ylabel("PSNR (dB)")
        ax.set_title(f"loss {loss}")
        ax.legend()
        paths.append(_save(fig, outdir / f"rd_{_slug(loss)}.svg"))
    return paths


def plot_progressive(rows, outdir) -> list[Path]:
    """Per (image, preset): PSNR after each received packet, clean and with injected loss."""
    configure()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    grouped = defaultdict(lambda: defaultdict(list))
    for row in rows:
        grouped[(row["image"], row["preset"])][row["method"]].append(row)
    paths = []
    for (image, preset), methods in grouped.items():
        fig, ax = plt.subplots()
        for method, rs in methods.items():
            style = METHOD_STYLE.get(method, {})
            p = [r["packet"] for r in rs]
            ax.plot(p, [r["psnr_clean"] for r in rs], linestyle="--", alpha=0.5,
                    color=style.get("color"), label=f"{method} (no loss)")
            ax.plot(p, [r["psnr_lossy"] for r in rs], label=f"{method} (lost)", **style)
            for r in rs:
                if r["lost"]:
                    ax.axvline(r["packet"], color="grey", linewidth=0.8, alpha=0.3)
        ax.set_xlabel("packets received (#p)")
        ax.set_ylabel("PSNR (dB)")
        ax.set_title(f"{image} {preset}")
        ax.legend(fontsize=7)
        paths.append(_save(fig, outdir / f"progressive_{_slug(image)}_{preset}.svg"))
    return paths
