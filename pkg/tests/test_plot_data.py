import numpy as np
import pandas as pd
import pytest

from src.models.ellipse_theory import BivariateGaussianParams, ExternalPoint, quadratic_form, quantile_ellipse
from src.simulation import ExperimentResult, ExperimentSpec
from src.utils.metrics import PearsonReport
from src.visualisation.plot_data import batch_plot_frame, ellipse_plot_frame, pearson_plot_frame, write_plot_csv


def test_ellipse_frame():
    ellipse = quantile_ellipse(BivariateGaussianParams(5, 5, 1, 1, 0.3), 0.05)
    frame = ellipse_plot_frame(ellipse, ExternalPoint(0, 0), n_points=50)
    boundary = frame[frame["series"] == "ellipse"]
    assert len(boundary) == 50
    np.testing.assert_allclose(quadratic_form(ellipse, boundary["x"], boundary["y"]), ellipse.c2, rtol=1e-10)
    for name in ("tangent_1", "tangent_2"):
        line = frame[frame["series"] == name]
        assert len(line) == 2
        assert tuple(line.iloc[0][["x", "y"]]) == (0, 0)
        assert line.iloc[1]["x"] == pytest.approx(10.0)


def test_pearson_frame():
    frame = pearson_plot_frame({"A": PearsonReport(((2, 0.5), (3, 0.4))), "B": PearsonReport(((2, 0.1),))})
    assert list(frame.columns) == ["dataset", "generation", "r"]
    assert frame["dataset"].tolist() == ["A", "A", "B"]


def test_batch_frame_and_csv(tmp_path):
    spec = ExperimentSpec(rho=0.3, eta=0.2, reps=10, batches=3)
    frame = batch_plot_frame([ExperimentResult((0.5, 0.6, 0.7), 0.6, 0.1, 0, spec)])
    assert frame["batch"].tolist() == [1, 2, 3]
    path = write_plot_csv(frame, str(tmp_path / "plots" / "batches.csv"))
    assert pd.read_csv(path)["proportion"].tolist() == [0.5, 0.6, 0.7]
