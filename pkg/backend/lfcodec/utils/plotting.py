"""
Static RD-curve plots
"""

from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")
# fixed ids and no date stamp keep repeated runs byte-identical
matplotlib.rcParams["svg.hashsalt"] = "lfcodec"

import matplotlib.pyplot as plt  # noqa: E402

from lfcodec.utils.metrics import RdCurve  # noqa: E402


def plot_rd_curves(curves: Sequence[RdCurve], path: Union[str, Path], quality_label: str = "PSNR-Y [dB]") -> Path:
    """Write the curves as one SVG line plot"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(6, 4))
    for curve in curves:
        ax.plot(curve.rates, curve.qualities, marker="o", label=curve.label or None)
    ax.set_xlabel("Rate [bpp]")
    ax.set_ylabel(quality_label)
    ax.grid(True, alpha=0.3)
    if any(curve.label for curve in curves):
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
