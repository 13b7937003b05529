"""
Plot-ready tables.

This module turns results into long-format pandas frames for any plotting tool:
- Quantile ellipse boundary with the two tangent lines from the vertex
- Per-generation Pearson correlations of one or more datasets
- Batch proportions of simulation results
"""

import os

import pandas as pd

from ..models.ellipse_theory import ExternalPoint, QuantileEllipse, ellipse_boundary, tangent_slopes


def ellipse_plot_frame(ellipse: QuantileEllipse, p: ExternalPoint, n_points=200):
    """
    Ellipse boundary plus the tangent lines through p.

    Each tangent line is given by two points, p and a point past the
    ellipse centre.

    Args:
        ellipse (QuantileEllipse): Quantile ellipse
        p (ExternalPoint): Vertex outside the ellipse
        n_points (int): Boundary resolution

    Returns:
        pandas.DataFrame: Columns series, x, y
    """
    boundary = ellipse_boundary(ellipse, n_points)
    frame = pd.DataFrame({"series": "ellipse", "x": boundary[:, 0], "y": boundary[:, 1]})

    k1, k2 = tangent_slopes(ellipse, p)
    mu1 = ellipse.params.mu1
    x_end = mu1 + (mu1 - p.x0)
    lines = []
    for name, k in (("tangent_1", k1), ("tangent_2", k2)):
        lines.append({"series": name, "x": p.x0, "y": p.y0})
        lines.append({"series": name, "x": x_end, "y": p.y0 + k * (x_end - p.x0)})
    return pd.concat([frame, pd.DataFrame(lines)], ignore_index=True)


def pearson_plot_frame(reports):
    """
    Long table of per-generation correlations.

    Args:
        reports (dict): Dataset label -> PearsonReport

    Returns:
        pandas.DataFrame: Columns dataset, generation, r
    """
    rows = [{"dataset": label, "generation": gen, "r": r}
            for label, report in reports.items() for gen, r in report.rows]
    return pd.DataFrame(rows, columns=["dataset", "generation", "r"])


def batch_plot_frame(results):
    """Batch proportions of each ExperimentResult, one row per batch."""
    rows = []
    for res in results:
        spec = res.spec
        for b, proportion in enumerate(res.batch_proportions, start=1):
            rows.append({"rho": spec.rho, "eta": spec.eta, "setting": spec.setting, "normalize": spec.normalize,
                         "family": spec.family, "batch": b, "proportion": proportion})
    return pd.DataFrame(rows, columns=["rho", "eta", "setting", "normalize", "family", "batch", "proportion"])


def write_plot_csv(frame, output_path):
    """Save a plot table as CSV, creating the output directory."""
    directory = os.path.dirname(output_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(output_path, index=False)
    return output_path
