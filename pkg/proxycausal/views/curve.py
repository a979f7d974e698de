"""
Export of effect curves as CSV tables and SVG line charts.
"""
import io
import logging
from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from ..models.curve import EffectCurve  # noqa: E402

logger = logging.getLogger(__name__)


def curve_frame(curve: EffectCurve, truth: Optional[EffectCurve] = None) -> pd.DataFrame:
    """
    One row per grid point: dose columns, the estimate and optionally the truth.

    Args:
        curve: Estimated curve
        truth: Reference curve on the same grid

    Returns:
        DataFrame with columns a (or the treated names) and estimate
    """
    if curve.grid.shape[1] == 1:
        dose_columns = ["a"]
    else:
        dose_columns = list(curve.treated) or [f"a{k + 1}" for k in range(curve.grid.shape[1])]
    frame = pd.DataFrame(curve.grid, columns=dose_columns)
    frame["estimate"] = curve.estimates
    if truth is not None:
        frame["truth"] = truth.estimates
    return frame


def write_curve_csv(curve: EffectCurve, path: Union[str, Path],
                    truth: Optional[EffectCurve] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    curve_frame(curve, truth).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path


def curve_svg(curve: EffectCurve, truth: Optional[EffectCurve] = None, title: str = None) -> str:
    """
    Self-contained SVG line chart of a curve.

    Args:
        curve: Estimated curve
        truth: Reference curve drawn dashed, if given
        title: Chart title; defaults to the target

    Returns:
        SVG document text
    """
    figure, axes = plt.subplots(figsize=(5, 3.5))
    try:
        axes.plot(curve.doses, curve.estimates, marker="o", label="estimate")
        if truth is not None:
            axes.plot(truth.doses, truth.estimates, linestyle="--", label="truth")
            axes.legend()
        axes.set_xlabel("dose" if curve.grid.shape[1] == 1 else "dose (diagonal)")
        axes.set_ylabel(f"E[{curve.outcome or 'Y'} | do(a)]")
        target = f"{','.join(curve.treated)} -> {curve.outcome}" if curve.treated else None
        if title or target:
            axes.set_title(title or target)
        figure.tight_layout()
        buffer = io.StringIO()
        with matplotlib.rc_context({"svg.hashsalt": "proxycausal"}):
            figure.savefig(buffer, format="svg", metadata={"Date": None})
    finally:
        plt.close(figure)
    return buffer.getvalue()


def write_curve_svg(curve: EffectCurve, path: Union[str, Path],
                    truth: Optional[EffectCurve] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(curve_svg(curve, truth))
    logger.debug("wrote chart %s", path)
    return path
