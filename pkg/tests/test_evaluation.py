import numpy as np
import pytest

from gssbl.data import SyntheticScene, filter_by_altitude, generate_synthetic, survey_points
from gssbl.errors import ConfigurationError, DegenerateModelError
from gssbl.evaluation import (
    PREDICTION_FLOOR_DBM,
    altitude_pairs,
    evaluate,
    predict,
    rmse_db,
    run_nsbl_sweep,
    run_separation_comparison,
)
from gssbl.gs_sbl import fit_gs_sbl
from gssbl.model import SparseModel
from gssbl.propagation import PropagationConfig, build_sensing_matrix


def test_rmse_hand_values():
    assert rmse_db([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert rmse_db([0.0, 0.0], [3.0, -4.0]) == pytest.approx(np.sqrt(12.5), rel=1e-15)
    with pytest.raises(ConfigurationError):
        rmse_db([1.0], [1.0, 2.0])
    with pytest.raises(ConfigurationError):
        rmse_db([], [])


def test_predict_single_source_is_fspl():
    cfg = PropagationConfig()
    m = SparseModel("fspl", (None,), np.array([[0.0, 0.0, 0.0]]), np.array([10.0]), 1.0, 1, cfg)
    pts = np.array([[100.0, 0.0, 0.0], [0.0, 300.0, 400.0]])
    expected = 40.0 - 20 * np.log10(4 * np.pi * np.array([100.0, 500.0]) / cfg.wavelength)
    np.testing.assert_allclose(predict(m, pts), expected, atol=1e-9)


def test_predict_floor_and_empty(small_grid, config):
    m = SparseModel("omp", (0,), small_grid.voxel_center(0)[None], np.array([-1.0]), 1.0, 1, config, small_grid)
    assert predict(m, [[50.0, 50.0, 50.0]])[0] == PREDICTION_FLOOR_DBM
    empty = SparseModel("gs_sbl", (), np.empty((0, 3)), np.empty(0), 1.0, 1, config, small_grid)
    with pytest.raises(DegenerateModelError):
        predict(empty, [[0.0, 0.0, 0.0]])


def test_evaluate_matches_manual(two_source_scene):
    _, ms, phi = two_source_scene
    model, _ = fit_gs_sbl(ms, phi, 2)
    res = evaluate(model, ms)
    manual = np.sqrt(np.mean((predict(model, ms.points) - ms.rsrp_dbm) ** 2))
    assert res.rmse_db == pytest.approx(manual, rel=1e-14)
    assert res.n_test == len(ms) and res.n_sbl == 2
    assert set(res.row()) == {"algorithm", "n_sbl", "separation_m", "seed", "rmse_db", "n_test",
                              "train_z_m", "test_z_m"}


def test_altitude_pairs():
    zs = [30, 50, 70, 90, 110]
    assert altitude_pairs(zs, 0) == [(z, z) for z in map(float, zs)]
    assert altitude_pairs(zs, 20) == [(30, 50), (50, 30), (50, 70), (70, 50), (70, 90), (90, 70), (90, 110), (110, 90)]
    assert altitude_pairs(zs, 10) == []


@pytest.fixture
def layered(small_grid, config):
    scene = SyntheticScene(small_grid, ((1, 2.0), (22, 1.0)), config, noise_sigma_db=2.0, seed=1)
    data = generate_synthetic(scene, survey_points((0, 100), (0, 100), [30, 40, 50, 60], 3, 10))
    return scene, data


def test_sweep_shape_and_order(layered, small_grid, config):
    _, data = layered
    train = filter_by_altitude(data, [30, 60])
    tests = [filter_by_altitude(data, [z]) for z in (40, 50)]
    phi = build_sensing_matrix(config, small_grid, train.points)
    rows = run_nsbl_sweep(train, tests, phi, n_range=range(1, 4), seed=5)
    assert [(r.n_sbl, r.test_z) for r in rows] == [(k, (z,)) for k in (1, 2, 3) for z in (40.0, 50.0)]
    assert all(r.train_z == (30.0, 60.0) and r.seed == 5 and r.separation_m == 10.0 for r in rows)
    # each row is the RMSE of an independent fit at that sparsity
    m2, _ = fit_gs_sbl(train, phi, 2)
    assert rows[2].rmse_db == evaluate(m2, tests[0]).rmse_db
    with pytest.raises(ConfigurationError):
        run_nsbl_sweep(train, [], phi)


def test_separation_comparison(layered, small_grid, config):
    scene, data = layered
    bs = scene.source_positions[0]
    summary, pairs = run_separation_comparison(data, [30, 40, 50, 60], small_grid, config,
                                               separations=(0, 10, 20), bs_location=bs)
    assert [(r.separation_m, r.algorithm) for r in summary] == [
        (s, a) for s in (0.0, 10.0, 20.0) for a in ("gs_sbl", "omp", "fspl")]
    # 4 + 6 + 4 ordered pairs for each of the three algorithms
    assert len(pairs) == 3 * (4 + 6 + 4)
    for cell in summary:
        mine = [p.rmse_db for p in pairs if p.algorithm == cell.algorithm and p.separation_m == cell.separation_m]
        assert cell.rmse_db == pytest.approx(np.mean(mine), rel=1e-14)
    fspl_row = next(p for p in pairs if p.algorithm == "fspl" and p.train_z == (30.0,) and p.test_z == (40.0,))
    assert fspl_row.n_sbl == 1


def test_separation_errors(layered, small_grid, config):
    _, data = layered
    with pytest.raises(ConfigurationError, match="base-station"):
        run_separation_comparison(data, [30, 40], small_grid, config, separations=(0,))
    with pytest.raises(ConfigurationError, match="separated"):
        run_separation_comparison(data, [30, 40], small_grid, config, separations=(5,), algorithms=("omp",))
    with pytest.raises(ConfigurationError, match="unknown"):
        run_separation_comparison(data, [30, 40], small_grid, config, separations=(0,), algorithms=("lasso",))
