import json

import numpy as np
import pytest

from koopman_prune.errors import NegativeRadicand
from koopman_prune.systems import (
    BENCHMARK2D_EIGENFUNCTIONS,
    ExperimentConfig,
    SystemSpec,
    desk_dictionary,
    generate_data,
    generate_snapshots,
    planted_coefficients,
    register_map,
    step_benchmark2d,
    step_van_der_pol,
    vdp_dictionary,
)


def test_benchmark2d_origin():
    np.testing.assert_allclose(step_benchmark2d(np.array([[0.0, 0.0]])), [[0.0, np.sqrt(0.1)]])


def test_benchmark2d_one_one():
    np.testing.assert_allclose(step_benchmark2d(np.array([1.0, 1.0])), [0.8, np.sqrt(2.0)])


def test_benchmark2d_negative_radicand():
    with pytest.raises(NegativeRadicand):
        step_benchmark2d(np.array([[-1.0, 0.0]]))


def test_benchmark2d_eigenfunctions_pointwise():
    snaps = generate_snapshots(SystemSpec(seed=3), 20, 30)
    for fn, lam, _ in BENCHMARK2D_EIGENFUNCTIONS:
        np.testing.assert_allclose(fn(snaps.x_plus), lam * fn(snaps.x), atol=1e-12)


def test_van_der_pol_values():
    np.testing.assert_array_equal(step_van_der_pol(np.array([0.0, 0.0])), [0.0, 0.0])
    np.testing.assert_allclose(step_van_der_pol(np.array([1.0, 0.0]), 0.025), [1.0, -0.025])
    np.testing.assert_allclose(step_van_der_pol(np.array([0.0, 1.0]), 0.025), [0.025, 1.025])


def test_single_pair():
    spec = SystemSpec(seed=5)
    snaps = generate_data(ExperimentConfig(system=spec, n_traj=1, traj_len=1))
    assert len(snaps) == 1
    np.testing.assert_array_equal(snaps.x_plus, spec.step(snaps.x))


def test_determinism_and_consecutive_pairs():
    cfg = ExperimentConfig(system=SystemSpec(kind="van_der_pol", domain=((-4, 4), (-4, 4)), seed=9),
                           n_traj=3, traj_len=4)
    a, b = generate_data(cfg), generate_data(cfg)
    assert a.x.tobytes() == b.x.tobytes() and a.x_plus.tobytes() == b.x_plus.tobytes()
    # trajectory-major: within a trajectory x_plus[i] == x[i + 1]
    np.testing.assert_array_equal(a.x_plus[:3], a.x[1:4])
    assert np.all((a.x[::4] >= -4) & (a.x[::4] <= 4))


def test_different_seeds_differ():
    a = generate_snapshots(SystemSpec(seed=0), 2, 2)
    b = generate_snapshots(SystemSpec(seed=1), 2, 2)
    assert not np.array_equal(a.x, b.x)


def test_system_spec_validation():
    with pytest.raises(ValueError):
        SystemSpec(kind="van_der_pol", dt=0.0)
    with pytest.raises(ValueError):
        SystemSpec(domain=((1.0, 0.0), (0.0, 1.0)))
    with pytest.raises(ValueError):
        SystemSpec(kind="custom", name="missing")


def test_custom_map():
    register_map("halving", lambda x: 0.5 * np.asarray(x))
    spec = SystemSpec(kind="custom", name="halving", domain=((0, 1),))
    np.testing.assert_allclose(spec.trajectory([1.0], 2)[:, 0], [1.0, 0.5, 0.25])


def test_trajectory_shape():
    traj = SystemSpec().trajectory((1.0, 1.0), 5)
    assert traj.shape == (6, 2)


def test_desk_dictionary_plants_eigenfunctions(rng):
    d = desk_dictionary()
    assert len(d) == 40
    coeff = planted_coefficients(d)
    x = rng.random((30, 2)) * 2
    for j, (fn, _, _) in enumerate(BENCHMARK2D_EIGENFUNCTIONS):
        np.testing.assert_allclose(d.evaluate(x) @ coeff[:, j], fn(x), atol=1e-12)


def test_vdp_dictionary_size():
    assert len(vdp_dictionary()) == 289


def test_config_round_trip(tmp_path):
    (tmp_path / "dict.json").write_text(json.dumps(desk_dictionary().to_json()))
    doc = {"system": {"kind": "benchmark2d", "seed": 4}, "n_traj": 5, "traj_len": 6,
           "dictionary": "dict.json", "prune": {"eps": 1e-4}}
    (tmp_path / "cfg.json").write_text(json.dumps(doc))
    cfg = ExperimentConfig.load(tmp_path / "cfg.json")
    assert cfg.prune.eps == 1e-4 and cfg.system.seed == 4
    assert len(cfg.build_dictionary()) == 40
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg


def test_config_missing_dictionary_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        ExperimentConfig.from_json({"dictionary": "nope.json"}, base=tmp_path)


def test_config_rejects_bad_counts():
    with pytest.raises(ValueError):
        ExperimentConfig(n_traj=0)
