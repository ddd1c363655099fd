import numpy as np
import pytest

from conftest import max_angle, random_data
from koopman_prune.dictionary import Dictionary, Observable, monomials, precondition
from koopman_prune.errors import OracleMismatch, ZeroFunction
from koopman_prune.koopman import LiftedData, lift, principal_arguments
from koopman_prune.pruning import (
    PruneConfig,
    SubspaceState,
    eigenfunction_distance,
    fast_recompute,
    hybrid_prune,
    mpv_prune,
    naive_recompute,
    prune,
    spv_prune,
)
from koopman_prune.systems import SystemSpec, desk_dictionary, generate_snapshots, planted_coefficients
from koopman_prune.verify import check_disjointness, check_single_generation_bounds

ALGS = ("spv", "mpv", "hybrid")


def block_data(rng, n=40):
    """f1 invariant (maps to itself), f2 maps to a direction orthogonal to both."""
    q = np.linalg.qr(rng.standard_normal((n, 3)))[0]
    a = q[:, :2]
    b = np.column_stack([q[:, 0], q[:, 2]])
    return LiftedData.from_matrices(a, b)


def eq21_junk_data(seed=0):
    # 4 eigenfunction-spanning monomials plus 3 non-invariant junk functions
    obs = (Observable.constant(), Observable.monomial((1, 0)), Observable.monomial((2, 0)),
           Observable.monomial((0, 2)), Observable.monomial((0, 1)), Observable.monomial((1, 1)),
           Observable.gaussian((1.0, 1.0), 0.5))
    d = Dictionary(obs, 2)
    snaps = generate_snapshots(SystemSpec(seed=seed), 100, 20)
    coeff, _ = precondition(d, snaps.x)
    planted = np.zeros((7, 4))
    planted[[0, 1, 2, 3], [0, 1, 2, 3]] = 1.0
    planted[[0, 1, 3], 3] = [1.0, -10.0, -1.0]
    return lift(d, coeff, snaps.x, snaps.x_plus), planted


# SPV

def test_spv_immediate_success(rng):
    a = rng.standard_normal((30, 4))
    data = LiftedData.from_matrices(a, a @ rng.standard_normal((4, 4)))
    for alg in ALGS:
        rep = prune(data, alg)
        assert rep.success and len(rep.trace) == 1 and rep.final_dim == 4


def test_spv_block_instance(rng):
    rep = prune(block_data(rng), "spv", PruneConfig(eps=0.5))
    assert rep.final_dim == 1 and len(rep.trace) == 2
    assert rep.final_delta == pytest.approx(0.0, abs=1e-12)
    assert rep.trace[1].gamma == pytest.approx(1.0)


def test_spv_recovers_eigenfunctions_among_junk():
    data, planted = eq21_junk_data()
    rep = prune(data, "spv", PruneConfig(eps=1e-3))
    assert rep.final_dim >= 4
    for j in range(4):
        assert eigenfunction_distance(planted[:, j], rep.final) < 1e-6


def test_spv_one_per_generation():
    rep = prune(random_data(1, s=10), "spv", PruneConfig(eps=0.05))
    dims = [e.dim for e in rep.trace]
    assert dims == list(range(10, 10 - len(dims), -1))


# MPV

def test_mpv_all_violating_fails_in_one_generation(rng):
    q = np.linalg.qr(rng.standard_normal((40, 6)))[0]
    rep = prune(LiftedData.from_matrices(q[:, :3], q[:, 3:]), "mpv", PruneConfig(eps=0.1))
    assert not rep.success
    assert len(rep.trace) == 2 and rep.trace[-1].dim == 0 and rep.trace[-1].delta is None


def test_mpv_random_reaches_tolerance():
    rep = prune(random_data(2, s=10), "mpv", PruneConfig(eps=0.1))
    if rep.success:
        assert rep.final_delta <= 0.1
    dims = [e.dim for e in rep.trace]
    assert all(x > y for x, y in zip(dims, dims[1:]))
    assert len(rep.trace) - 1 <= 10


def test_mpv_planted_subspace_disjoint_from_drops():
    assert check_disjointness(0, 10) > 1e-6


def test_threshold_tie_is_retained(rng):
    # sines exactly (0, eps) -> nothing dropped
    q = np.linalg.qr(rng.standard_normal((30, 3)))[0]
    eps = 0.25
    a = q[:, :2]
    b = np.column_stack([q[:, 0], np.sqrt(1 - eps ** 2) * q[:, 1] + eps * q[:, 2]])
    data = LiftedData.from_matrices(a, b)
    s = principal_arguments(data).sines[-1]
    rep = prune(data, "mpv", PruneConfig(eps=float(s)))
    assert rep.success and len(rep.trace) == 1


# hybrid

def test_hybrid_coarse_one_is_spv():
    data = random_data(3, s=10)
    h = prune(data, "hybrid", PruneConfig(eps=0.05, eps_coarse=1.0, record_bases=True))
    s = prune(data, "spv", PruneConfig(eps=0.05, record_bases=True))
    assert [e.dim for e in h.trace] == [e.dim for e in s.trace]
    for eh, es in zip(h.trace[1:], s.trace[1:]):
        if eh.dim:
            assert max_angle(data.raw_a @ eh.basis_coeff, data.raw_a @ es.basis_coeff) < 1e-8


def test_hybrid_default_coarse_and_stages():
    rep = prune(random_data(4, s=12), "hybrid", PruneConfig(eps=0.05))
    assert rep.config.eps_coarse == pytest.approx(0.1)
    stages = [e.stage for e in rep.trace[1:]]
    assert stages == sorted(stages, key=lambda s: s != "mpv")


def test_hybrid_retention_not_worse_than_spv_desk():
    snaps = generate_snapshots(SystemSpec(seed=0), 100, 50)
    d = desk_dictionary()
    coeff, _ = precondition(d, snaps.x)
    data = lift(d, coeff, snaps.x, snaps.x_plus)
    planted = planted_coefficients(d)
    err = {}
    for alg in ("hybrid", "spv"):
        rep = prune(data, alg, PruneConfig(eps=1e-3, eps_coarse=0.1 if alg == "hybrid" else None))
        err[alg] = max(eigenfunction_distance(planted[:, j], rep.final) for j in range(4))
    assert err["hybrid"] <= err["spv"]


def test_exact_eigenfunctions_preserved_by_all():
    data, planted = eq21_junk_data(seed=1)
    for alg in ALGS:
        rep = prune(data, alg, PruneConfig(eps=1e-3))
        for j in range(4):
            assert eigenfunction_distance(planted[:, j], rep.final) < 1e-8


def test_termination_bound():
    for seed in range(5):
        data = random_data(seed, s=9, noise=1.0)
        for alg in ALGS:
            rep = prune(data, alg, PruneConfig(eps=1e-3))
            assert len(rep.trace) - 1 <= 9


# fast recompute

def test_fast_recompute_decoupled(rng):
    q = np.linalg.qr(rng.standard_normal((50, 8)))[0]
    # three invariant directions, two orthogonally-mapped ones
    a = q[:, :5]
    b = np.column_stack([q[:, :3], q[:, 5:7]])
    args = principal_arguments(LiftedData.from_matrices(a, b))
    new = fast_recompute(args, 2)
    np.testing.assert_allclose(new.sines, 0, atol=1e-12)
    assert max_angle(new.u_eval, q[:, :3]) < 1e-10


@pytest.mark.parametrize("k", [3, 7])
def test_fast_recompute_matches_scratch(k):
    data = random_data(11, s=8)
    args = principal_arguments(data)
    fast = fast_recompute(args, k)
    ref = principal_arguments(data.restrict(args.data_coords[:, : 8 - k]))
    np.testing.assert_allclose(fast.theta, ref.theta, atol=1e-8)
    assert max_angle(fast.u_eval, ref.u_eval) < 1e-8


def test_naive_recompute_matches_fast():
    data = random_data(12, s=8)
    state = SubspaceState.initial(data)
    naive = naive_recompute(state, 2)
    fast = fast_recompute(state.args, 2)
    np.testing.assert_allclose(naive.args.theta, fast.theta, atol=1e-8)


def test_oracle_check_passes_and_detects():
    data = random_data(13, s=12)
    rep = prune(data, "spv", PruneConfig(eps=0.05, oracle_check_period=1, oracle_tol=1e-8))
    assert all(e.oracle_error is None or e.oracle_error <= 1e-8 for e in rep.trace)
    with pytest.raises(OracleMismatch):
        prune(data, "spv", PruneConfig(eps=0.05, oracle_check_period=1, oracle_tol=-1.0))


def test_fast_and_naive_modes_agree():
    data = random_data(14, s=12)
    for alg in ALGS:
        f = prune(data, alg, PruneConfig(eps=0.05))
        n = prune(data, alg, PruneConfig(eps=0.05, use_fast_path=False))
        assert f.mode.endswith("_fast") and n.mode.endswith("_naive")
        assert [e.dim for e in f.trace] == [e.dim for e in n.trace]
        if f.success:
            assert max_angle(data.raw_a @ f.final.basis_coeff, data.raw_a @ n.final.basis_coeff) < 1e-7


# eigenfunction distance

def test_distance_inside_and_orthogonal(rng):
    data = random_data(15, s=6)
    state = SubspaceState.initial(data)
    assert eigenfunction_distance(np.arange(1.0, 7.0), state) < 1e-10
    sub = SubspaceState.initial(data.restrict(np.eye(6)[:, :3]))
    # raw coordinates here are the columns of a; build f orthogonal to the first three
    q = np.linalg.qr(data.a)[0]
    f = np.linalg.lstsq(data.a, q[:, 4], rcond=None)[0]
    assert eigenfunction_distance(f, sub) == pytest.approx(1.0, abs=1e-10)


def test_distance_zero_function():
    state = SubspaceState.initial(random_data(16, s=4))
    with pytest.raises(ZeroFunction):
        eigenfunction_distance(np.zeros(4), state)


@pytest.mark.parametrize("eps", [1e-4, 1e-3, 1e-2])
def test_information_loss_bound_one_generation(eps):
    dist, bound, _, _ = check_single_generation_bounds(0, 10, eps)
    assert dist <= bound + 1e-8


def test_config_validation():
    with pytest.raises(ValueError):
        PruneConfig(eps=1.0)
    with pytest.raises(ValueError):
        PruneConfig(eps=0.1, eps_coarse=0.05)
    with pytest.raises(ValueError):
        PruneConfig(oracle_check_period=-1)
    with pytest.raises(ValueError):
        prune(random_data(0, s=3), "bogus")


def test_record_bases_and_lookup():
    data = random_data(17, s=8)
    rep = prune(data, "spv", PruneConfig(eps=0.05, record_bases=True))
    for e in rep.trace:
        if e.dim:
            assert e.basis_coeff.shape == (8, e.dim)
            assert rep.basis_for_dim(e.dim) is not None
    plain = prune(data, "spv", PruneConfig(eps=0.05))
    assert plain.trace[0].basis_coeff is None
