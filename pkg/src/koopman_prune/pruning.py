"""Subspace pruning by principal vectors: SPV, MPV and the MPV-then-SPV hybrid.

Each algorithm walks a nested sequence of subspaces, dropping principal
directions whose angle to the Koopman image is too large. Recomputation after
a drop either starts from scratch (naive path) or uses rank-one eigen-updates
plus an incremental QR of the image (fast path).
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import OracleMismatch, RankDeficientUpdate, ZeroFunction
from .koopman import (LiftedData, PrincipalArguments, frame_principal_arguments, invariance_proximity,
                      principal_arguments)
from .linalg import DEFAULT_RANK_TOL, SymmetricEigUpdateState, incremental_qr, rank_one_eig_update

DEFAULT_EPS_COARSE = 0.1


@dataclass
class PruneConfig:
    eps: float = 1e-3
    eps_coarse: Optional[float] = None
    use_fast_path: bool = True
    # every p-th generation re-derive the angles from scratch, compare, re-anchor
    oracle_check_period: int = 0
    oracle_tol: float = 1e-6
    rank_tol: float = DEFAULT_RANK_TOL
    record_bases: bool = False

    def __post_init__(self):
        if not 0.0 <= self.eps < 1.0:
            raise ValueError("eps must lie in [0, 1)")
        if self.eps_coarse is not None and not self.eps < self.eps_coarse <= 1.0:
            raise ValueError("eps_coarse must lie in (eps, 1]")
        if self.oracle_check_period < 0:
            raise ValueError("oracle_check_period must be >= 0")


@dataclass
class SubspaceState:
    """Current pruned subspace.

    ``data`` is the lifted data the principal-argument frame was built from;
    on the fast path it stays the root data for the whole run.
    """

    args: PrincipalArguments
    data: LiftedData
    generation: int = 0

    @classmethod
    def initial(cls, data: LiftedData, rank_tol: float = DEFAULT_RANK_TOL) -> "SubspaceState":
        return cls(principal_arguments(data, rank_tol), data, 0)

    @property
    def dim(self) -> int:
        return self.args.dim

    @property
    def delta(self) -> float:
        return invariance_proximity(self.args)

    @property
    def basis_coeff(self) -> np.ndarray:
        """Orthonormal basis of the subspace in raw-dictionary coordinates."""
        return self.args.u_coeff


@dataclass
class TraceEntry:
    generation: int
    dim: int
    delta: Optional[float]
    gamma: Optional[float] = None
    dropped_count: int = 0
    stage: str = ""
    path: str = ""
    wall_seconds: float = 0.0
    image_deficient: int = 0
    oracle_error: Optional[float] = None
    basis_coeff: Optional[np.ndarray] = field(default=None, repr=False)

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("basis_coeff")
        return d


@dataclass
class PruneReport:
    algorithm: str
    fast: bool
    config: PruneConfig
    trace: list = field(default_factory=list)
    final: Optional[SubspaceState] = None

    @property
    def success(self) -> bool:
        return self.final is not None

    @property
    def mode(self) -> str:
        return f"{self.algorithm}_{'fast' if self.fast else 'naive'}"

    @property
    def final_dim(self) -> Optional[int]:
        return None if self.final is None else self.final.dim

    @property
    def final_delta(self) -> Optional[float]:
        return None if self.final is None else self.final.delta

    def entry_for_dim(self, dim: int) -> Optional[TraceEntry]:
        for e in self.trace:
            if e.dim == dim:
                return e
        return None

    def basis_for_dim(self, dim: int) -> Optional[np.ndarray]:
        """Raw-coefficient basis of the trace subspace of dimension ``dim``, if known.

        Intermediate bases are only available when ``record_bases`` was set.
        """
        if self.final is not None and self.final.dim == dim:
            return self.final.basis_coeff
        e = self.entry_for_dim(dim)
        return None if e is None else e.basis_coeff


# ---------------------------------------------------------------------------
# recomputation


def fast_recompute(args: PrincipalArguments, k: int, rank_tol: float = DEFAULT_RANK_TOL) -> PrincipalArguments:
    """Principal arguments after dropping the ``k`` largest-angle directions.

    Chains ``k`` symmetric rank-one eigen-updates seeded with the retained
    squared sines; update vectors are the inner products of the retained
    principal vectors with the trailing image-QR columns (taken last first).
    The image QR is carried along with :func:`incremental_qr`.
    """
    s = args.dim
    if not 1 <= k < s:
        raise ValueError(f"drop count must satisfy 1 <= k < {s}, got {k}")
    m = s - k
    w_k = args.wc[:, m:][:, ::-1]
    d_cos = args.uc.T @ (args.frame.gram @ w_k)
    state = SymmetricEigUpdateState(args.sines[:m] ** 2, np.eye(m))
    for i in range(k):
        state = rank_one_eig_update(state, d_cos[:m, i])
    t = np.zeros((s, m))
    t[:m] = state.e
    qr = incremental_qr(args.wc, args.r, t, rank_tol=rank_tol)
    sines = np.sqrt(np.clip(state.lam, 0.0, 1.0))
    theta = np.arcsin(sines)
    return PrincipalArguments(theta, sines, args.frame, args.uc[:, :m] @ state.e, qr.q, qr.r)


def naive_recompute(state: SubspaceState, k: int, rank_tol: float = DEFAULT_RANK_TOL) -> SubspaceState:
    """Drop the top ``k`` principal vectors and recompute from the data."""
    keep = state.args.data_coords[:, : state.dim - k]
    data = state.data.restrict(keep)
    return SubspaceState(principal_arguments(data, rank_tol), data, state.generation + 1)


def _drop(state: SubspaceState, k: int, config: PruneConfig):
    if config.use_fast_path:
        try:
            args = fast_recompute(state.args, k, config.rank_tol)
            return SubspaceState(args, state.data, state.generation + 1), "fast"
        except RankDeficientUpdate:
            # the image lost rank: recompute this generation in frame coordinates
            args = frame_principal_arguments(state.args.frame, state.args.uc[:, : state.dim - k],
                                             config.rank_tol)
            return SubspaceState(args, state.data, state.generation + 1), "fallback"
    return naive_recompute(state, k, config.rank_tol), "naive"


def _oracle_check(state: SubspaceState, config: PruneConfig):
    data = state.data.restrict(state.args.data_coords)
    fresh = principal_arguments(data, config.rank_tol)
    err = float(np.max(np.abs(fresh.sines - state.args.sines)))
    if err > config.oracle_tol:
        raise OracleMismatch(
            f"generation {state.generation}: fast-path sines off by {err:.2e} "
            f"(tolerance {config.oracle_tol:.1e})")
    return SubspaceState(fresh, data, state.generation), err


def _entry(state, stage, path, config, **kw):
    return TraceEntry(
        generation=state.generation, dim=state.dim, delta=state.delta, stage=stage, path=path,
        image_deficient=state.args.deficient,
        basis_coeff=state.basis_coeff.copy() if config.record_bases else None, **kw)


def _run_stage(state, eps, n_drop, stage, config, trace):
    """Drop directions until the largest sine is <= eps; returns final state or None."""
    while True:
        sines = state.args.sines
        if sines[-1] <= eps:
            return state
        k = n_drop(sines, eps)
        gamma = float(sines[state.dim - k])
        t0 = time.perf_counter()
        if k >= state.dim:
            trace.append(TraceEntry(state.generation + 1, 0, None, gamma, k, stage, "",
                                    time.perf_counter() - t0))
            return None
        state, path = _drop(state, k, config)
        oracle_err = None
        p = config.oracle_check_period
        if config.use_fast_path and p and state.generation % p == 0:
            state, oracle_err = _oracle_check(state, config)
        trace.append(_entry(state, stage, path, config, gamma=gamma, dropped_count=k,
                            wall_seconds=time.perf_counter() - t0, oracle_error=oracle_err))


def _spv_count(sines, eps):
    return 1


def _mpv_count(sines, eps):
    # directions with sine exactly eps are kept
    return int(np.count_nonzero(sines > eps))


def _start(state: SubspaceState, algorithm, config):
    report = PruneReport(algorithm, config.use_fast_path, config)
    report.trace.append(_entry(state, algorithm if algorithm != "hybrid" else "mpv", "initial", config))
    return report


def spv_prune(state: SubspaceState, config: PruneConfig) -> PruneReport:
    """Drop the single worst principal vector per generation until ``delta <= eps``."""
    report = _start(state, "spv", config)
    report.final = _run_stage(state, config.eps, _spv_count, "spv", config, report.trace)
    return report


def mpv_prune(state: SubspaceState, config: PruneConfig) -> PruneReport:
    """Keep only directions with ``sin(theta) <= eps`` each generation."""
    report = _start(state, "mpv", config)
    report.final = _run_stage(state, config.eps, _mpv_count, "mpv", config, report.trace)
    return report


def hybrid_prune(state: SubspaceState, config: PruneConfig) -> PruneReport:
    """Coarse MPV at ``eps_coarse`` followed by SPV at ``eps``."""
    eps_coarse = DEFAULT_EPS_COARSE if config.eps_coarse is None else config.eps_coarse
    if not config.eps < eps_coarse:
        raise ValueError("hybrid pruning needs eps < eps_coarse")
    config = replace(config, eps_coarse=eps_coarse)
    report = _start(state, "hybrid", config)
    coarse = _run_stage(state, eps_coarse, _mpv_count, "mpv", config, report.trace)
    if coarse is not None:
        report.final = _run_stage(coarse, config.eps, _spv_count, "spv", config, report.trace)
    return report


ALGORITHMS = {"spv": spv_prune, "mpv": mpv_prune, "hybrid": hybrid_prune}


def prune(data: LiftedData, algorithm: str = "hybrid", config: Optional[PruneConfig] = None) -> PruneReport:
    config = config or PruneConfig()
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}")
    state = SubspaceState.initial(data, config.rank_tol)
    return ALGORITHMS[algorithm](state, config)


# ---------------------------------------------------------------------------
# diagnostics


def distance_to_span(f_eval, basis_eval) -> float:
    """Distance from the normalized ``f_eval`` to ``range(basis_eval)`` (orthonormal columns)."""
    f = np.asarray(f_eval, dtype=float)
    nrm = np.linalg.norm(f)
    if nrm == 0.0:
        raise ZeroFunction("function vanishes on the data")
    f = f / nrm
    return float(np.linalg.norm(f - basis_eval @ (basis_eval.T @ f)))


def eigenfunction_distance(f_coeff, state: SubspaceState) -> float:
    """Empirical-L2 distance from the unit-normalized function to the subspace.

    ``f_coeff`` are raw-dictionary coefficients.
    """
    f = state.data.raw_a @ np.asarray(f_coeff, dtype=float)
    return distance_to_span(f, state.args.u_eval)
