"""Figure and delimited-text rendering for segmentation runs."""
from __future__ import annotations

import os
import tempfile
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from .imgio import BinaryMask, GrayImage, mask_boundary
from .pipeline import MetricsReport


def _atomic_write(path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), prefix=".tmp_rep_")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def metrics_to_csv(report: MetricsReport) -> str:
    c = report.counts
    return (
        "tp,fp,fn,tn,accuracy,si\n"
        f"{c.tp},{c.fp},{c.fn},{c.tn},{report.accuracy:.6f},{report.si:.6f}\n"
    )


def write_metrics_csv(report: MetricsReport, path) -> None:
    _atomic_write(path, metrics_to_csv(report).encode("ascii"))


def render_report_figure(
    image: GrayImage,
    mask: BinaryMask,
    box=None,
    metrics: Optional[MetricsReport] = None,
    path=None,
) -> None:
    """Render the input, the segmentation contour, and the detection box to a PNG."""
    fig, axes = plt.subplots(1, 2, figsize=(8, 4))
    axes[0].imshow(image.pixels, cmap="gray", vmin=0, vmax=255)
    axes[0].set_title("input")

    axes[1].imshow(image.pixels, cmap="gray", vmin=0, vmax=255)
    boundary = mask_boundary(mask)
    ys, xs = boundary.nonzero()
    if len(ys):
        axes[1].scatter(xs, ys, s=1, c="red", marker="s", linewidths=0)
    if box is not None:
        axes[1].add_patch(
            Rectangle(
                (box.col_min - 0.5, box.row_min - 0.5),
                box.width,
                box.height,
                fill=False,
                edgecolor="yellow",
                linewidth=1.2,
            )
        )
    title = "segmentation"
    if metrics is not None:
        title += f"  acc={metrics.accuracy:.4f}  si={metrics.si:.4f}"
    axes[1].set_title(title)
    for ax in axes:
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    import io

    buf = io.BytesIO()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(buf, format="png", dpi=100, metadata={"Software": "tumorseg"})
    plt.close(fig)
    _atomic_write(path, buf.getvalue())
