"""Wall-clock comparison of naive and rank-one pruning."""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .dictionary import Dictionary, Observable, monomials, precondition
from .koopman import LiftedData, lift, principal_arguments
from .linalg import principal_angles, thin_qr
from .pruning import PruneConfig, prune
from .systems import SystemSpec, generate_snapshots, rng_for

MODES = {
    "spv": ("spv", False),
    "spv_fast": ("spv", True),
    "mpv": ("mpv", False),
    "mpv_fast": ("mpv", True),
    "hybrid_fast": ("hybrid", True),
}
AGREEMENT_TOL = 1e-7


class BenchmarkDisagreement(AssertionError):
    """Naive and fast runs ended in different subspaces; timings are withheld."""


@dataclass
class TimingRow:
    dim: int
    mode: str
    wall_seconds: float
    first_svd_seconds: float
    final_dim: int


CENTER_BOX = ((0.0, 2.0), (0.0, 2.0))


def timing_dictionary(size: int, width: float = 0.1, seed: int = 1234,
                      box=CENTER_BOX) -> Dictionary:
    """Degree-4 monomials plus ``size - 15`` Gaussians with Philox-drawn centers in ``box``."""
    obs = list(monomials(2, 4))
    if size < len(obs):
        raise ValueError(f"timing dictionaries need at least {len(obs)} functions")
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    centers = lo + (hi - lo) * rng_for(seed).random((size - len(obs), 2))
    obs += [Observable.gaussian(c, width) for c in centers]
    return Dictionary(tuple(obs), 2)


def timing_data(size: int, n_traj: int = 2000, traj_len: int = 10, seed: int = 0,
                width: float = 0.1) -> LiftedData:
    snaps = generate_snapshots(SystemSpec(seed=seed), n_traj, traj_len)
    d = timing_dictionary(size, width)
    coeff, retained = precondition(d, snaps.x)
    if retained != size:
        raise ValueError(f"dictionary of size {size} retains only {retained} directions on this data")
    return lift(d, coeff, snaps.x, snaps.x_plus)


def _timed(fn, repeats):
    times, out = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def subspace_angle(data: LiftedData, coeff_a, coeff_b) -> float:
    """Largest principal angle between two subspaces given in raw coordinates."""
    if coeff_a.shape[1] != coeff_b.shape[1]:
        return float(np.pi / 2)
    if coeff_a.shape[1] == 0:
        return 0.0
    qa = thin_qr(data.raw_a @ coeff_a).q
    qb = thin_qr(data.raw_a @ coeff_b).q
    return float(principal_angles(qa, qb, check=False)[0].max())


def _check_agreement(data, finals, config, tol):
    pairs = [("spv", "spv_fast"), ("mpv", "mpv_fast")]
    if "hybrid_fast" in finals:
        naive = prune(data, "hybrid", PruneConfig(**{**vars(config), "use_fast_path": False}))
        finals["hybrid"] = naive.final
        pairs.append(("hybrid", "hybrid_fast"))
    for a, b in pairs:
        if a not in finals or b not in finals:
            continue
        fa, fb = finals[a], finals[b]
        if (fa is None) != (fb is None):
            raise BenchmarkDisagreement(f"{a} and {b} disagree on success")
        if fa is None:
            continue
        ang = subspace_angle(data, fa.basis_coeff, fb.basis_coeff)
        if ang >= tol:
            raise BenchmarkDisagreement(
                f"{a} and {b} final subspaces differ (dims {fa.dim}/{fb.dim}, angle {ang:.2e})")


def timing_harness(sizes, modes=tuple(MODES), eps: float = 1e-3, repeats: int = 3,
                   data_factory=timing_data, agreement_tol: float = AGREEMENT_TOL,
                   threads: int = 1) -> list:
    """Time full pruning runs per mode plus the first principal-argument computation.

    Timings are medians over ``repeats`` runs with BLAS pinned to ``threads``.
    The naive and fast variants of each algorithm must end in the same
    subspace (largest principal angle below ``agreement_tol``), otherwise
    :class:`BenchmarkDisagreement` is raised and no timings are returned.
    """
    with threadpool_limits(limits=threads):
        return _harness(sizes, modes, eps, repeats, data_factory, agreement_tol)


def _harness(sizes, modes, eps, repeats, data_factory, agreement_tol):
    rows = []
    for size in sizes:
        data = data_factory(size)
        first, _ = _timed(lambda: principal_arguments(data), repeats)
        finals, times = {}, {}
        for mode in modes:
            alg, fast = MODES[mode]
            cfg = PruneConfig(eps=eps, use_fast_path=fast)
            times[mode], rep = _timed(lambda: prune(data, alg, cfg), repeats)
            finals[mode] = rep.final
        _check_agreement(data, finals, PruneConfig(eps=eps), agreement_tol)
        for mode in modes:
            f = finals[mode]
            rows.append(TimingRow(size, mode, times[mode], first, 0 if f is None else f.dim))
    return rows


def write_timing_csv(path, rows):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dim", "mode", "wall_seconds", "first_svd_seconds", "final_dim"])
        for r in rows:
            w.writerow([r.dim, r.mode, "%.6f" % r.wall_seconds, "%.6f" % r.first_svd_seconds, r.final_dim])
