import json

import numpy as np
import pytest

from koopman_prune.dictionary import Dictionary, Observable, monomials, precondition, wendland_c2
from koopman_prune.errors import DegenerateData, DimensionMismatch


def test_constant_column_of_ones(rng):
    d = Dictionary((Observable.constant(),), 2)
    np.testing.assert_array_equal(d.evaluate(rng.random((7, 2))), np.ones((7, 1)))


def test_monomial_value():
    d = Dictionary((Observable.monomial((2, 0)),), 2)
    assert d.evaluate(np.array([[3.0, 7.0]]))[0, 0] == 9.0


def test_wendland_closed_form():
    d = Dictionary((Observable.wendland((0.0,), 1.0),), 1)
    assert d.evaluate(np.array([[0.5]]))[0, 0] == pytest.approx(0.1875, abs=1e-15)
    assert wendland_c2(np.array([1.0, 1.5]))[1] == 0.0


def test_gaussian_value():
    d = Dictionary((Observable.gaussian((1.0, 1.0), 0.5),), 2)
    assert d.evaluate(np.array([[1.0, 2.0]]))[0, 0] == pytest.approx(np.exp(-2.0))


def test_evaluate_is_row_independent(rng):
    d = Dictionary(tuple(monomials(2, 3)) + (Observable.gaussian((0.5, 0.5), 0.3),), 2)
    x = rng.random((40, 2))
    np.testing.assert_array_equal(np.vstack([d.evaluate(x[:13]), d.evaluate(x[13:])]), d.evaluate(x))


def test_monomials_graded_count():
    assert len(list(monomials(2, 4))) == 15
    assert len(list(monomials(3, 2, include_constant=False))) == 9


def test_state_dim_mismatch():
    with pytest.raises(DimensionMismatch):
        Dictionary((Observable.monomial((1, 0, 0)),), 2)
    with pytest.raises(DimensionMismatch):
        Dictionary((Observable.constant(),), 2).evaluate(np.ones((3, 3)))


def test_invalid_observable_parameters():
    with pytest.raises(ValueError):
        Observable.gaussian((0.0,), 0.0)
    with pytest.raises(ValueError):
        Observable("bogus")


def test_precondition_exact_dependence(rng):
    d = Dictionary((Observable.constant(), Observable.monomial((1,)), Observable.monomial((1,))), 1)
    # 2 x1 is the same direction as x1; duplicate columns model the dependence
    _, retained = precondition(d, rng.random((50, 1)))
    assert retained == 2


def test_precondition_gram_identity(rng):
    d = Dictionary(tuple(monomials(2, 3)), 2)
    x = rng.random((500, 2))
    coeff, retained = precondition(d, x)
    assert retained == 10
    m = d.evaluate(x) @ coeff
    np.testing.assert_allclose(m.T @ m / len(x), np.eye(10), atol=1e-8)


def test_precondition_zero_dictionary():
    d = Dictionary((Observable.monomial((1,)),), 1)
    with pytest.raises(DegenerateData):
        precondition(d, np.zeros((5, 1)))


def test_json_round_trip_with_generators(tmp_path):
    doc = {"state_dim": 2, "observables": [
        {"kind": "monomials_upto", "params": {"max_degree": 2}},
        {"kind": "gaussian_grid", "params": {"domain": [[0, 1], [0, 1]], "spacing": 0.5, "width": 0.3}},
        {"kind": "wendland", "params": {"center": [0, 0], "support_radius": 2.0}},
    ]}
    d = Dictionary.from_json(doc)
    assert len(d) == 6 + 9 + 1
    path = tmp_path / "d.json"
    d.save(path)
    assert Dictionary.load(path) == d
    assert json.loads(path.read_text())["state_dim"] == 2
