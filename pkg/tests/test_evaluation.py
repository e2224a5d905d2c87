import numpy as np
import pytest

from tomosurf import ElevationMap, GroundGrid, beta_sweep, error_report, mean_error
from tomosurf.evaluation import report_csv, summary_table

GRID = GroundGrid((2, 3, 4))


def emap(h, grid=GRID):
    return ElevationMap(np.asarray(h, float), grid)


def test_mean_error_examples():
    t = emap(np.zeros((2, 3)))
    assert mean_error(t, t) == 0.0
    e = emap([[1, 0, 0], [0, 0, 2]])
    assert mean_error(e, t) == pytest.approx(0.5)
    mask = np.zeros((2, 3), bool)
    mask[1, 2] = True
    assert mean_error(e, t, mask) == pytest.approx(0.2)
    assert mean_error(e, t) == mean_error(t, e)


def test_mean_error_errors():
    t = emap(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        mean_error(t, t, np.ones((2, 3), bool))
    with pytest.raises(ValueError):
        mean_error(t, ElevationMap(np.zeros((3, 3)), GroundGrid((3, 3, 4))))
    with pytest.raises(ValueError):
        mean_error(t, ElevationMap(np.zeros((2, 3)), GroundGrid((2, 3, 4), (1, 2, 1))))
    with pytest.raises(ValueError):
        mean_error(t, t, np.zeros((3, 2), bool))


def test_error_report_splits_masked_columns():
    t = emap(np.zeros((2, 3)))
    e = emap([[1, 0, 0], [0, 0, 2]])
    mask = np.zeros((2, 3), bool)
    mask[1, 2] = True
    rep = error_report(e, t, mask, beta=0.5)
    assert rep.mean_error == pytest.approx(0.2)
    assert rep.masked_fraction == pytest.approx(1 / 6)
    assert rep.masked_error == 2.0
    assert rep.params == {"beta": 0.5}
    assert error_report(e, t).masked_error == 0.0


def test_beta_sweep_picks_smallest_on_ties():
    grid = GroundGrid((2, 3, 4))
    mags = np.zeros(grid.shape)
    mags[:, :, 0] = 1.0
    from tomosurf import AcquisitionGeometry
    geom = AcquisitionGeometry((0.0, 50.0), 0.031, 0.6, 6e5)
    truth = ElevationMap(np.zeros((2, 3)), grid)
    best, errs = beta_sweep(mags, geom, grid, truth, [2.0, 0.5, 0.5, 1.0])
    assert len(errs) == 4 and errs[1] == errs[2]
    if len(set(errs)) == 1:
        assert best == 0.5
    with pytest.raises(ValueError):
        beta_sweep(mags, geom, grid, truth, [])


def test_report_formats():
    rows = [{"estimator": "redress", "mean_error_m": 0.25, "beta": 1.0, "masked_fraction": 0.1}]
    assert report_csv(rows).splitlines() == [
        "estimator,mean_error_m,beta,masked_fraction", "redress,0.25,1.0,0.1"]
    table = summary_table(rows).splitlines()
    assert table[0].split() == ["Estimator", "Mean", "error", "(m)", "beta"]
    assert table[2].split() == ["redress", "0.25", "1.00"]
