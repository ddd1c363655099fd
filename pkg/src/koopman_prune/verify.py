"""Oracle-equivalence and bound-check suites on seeded synthetic instances.

Instances come in two flavours:

* ``random_instance``: generic ``a``/``b`` pairs whose principal sines are
  spread over several decades.
* ``ambient_instance``: a linear "Koopman" matrix ``M`` acting on an ambient
  space with orthonormal evaluation matrix ``phi``; every function
  ``phi @ c`` has image ``phi @ M @ c``. This makes eigenfunctions, operator
  norms and out-of-span residuals exactly computable.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .koopman import LiftedData, edmd, invariance_proximity, principal_arguments, worst_case_edmd_error
from .linalg import principal_angles, thin_qr
from .pruning import PruneConfig, SubspaceState, fast_recompute, prune
from .systems import rng_for


# ---------------------------------------------------------------------------
# instances


def random_instance(seed: int, s: int, n: int = 200, spread=(-3.0, 0.3)) -> LiftedData:
    """``b = a M + noise`` with per-column noise levels ``10**linspace(*spread)``."""
    rng = rng_for(seed)
    a = rng.standard_normal((n, s))
    m = np.eye(s) + 0.3 * rng.standard_normal((s, s))
    scales = 10.0 ** np.linspace(spread[0], spread[1], s)
    b = a @ m + rng.standard_normal((n, s)) * scales
    return LiftedData.from_matrices(a, b)


@dataclass
class AmbientInstance:
    data: LiftedData
    phi: np.ndarray       # (n, p) orthonormal evaluation of the ambient basis
    m: np.ndarray         # (p, p) Koopman action in ambient coordinates
    coords: np.ndarray    # (p, s) ambient coordinates of the dictionary
    extra: dict = field(default_factory=dict)

    def restricted_norm(self) -> float:
        """``||K|_S||`` measured on the data."""
        q, r = np.linalg.qr(self.data.a)
        return float(np.linalg.norm(scipy.linalg.solve_triangular(r, self.data.b.T, trans="T").T, 2))

    def evaluate(self, c) -> np.ndarray:
        return self.phi @ c

    def image(self, c) -> np.ndarray:
        return self.phi @ (self.m @ c)


def _ambient(rng, n, p):
    phi = np.linalg.qr(rng.standard_normal((n, p)))[0]
    m = rng.standard_normal((p, p)) / np.sqrt(p)
    return phi, m


def _unit(v):
    return v / np.linalg.norm(v)


def _finish(phi, m, coords, **extra):
    a = phi @ coords
    b = phi @ (m @ coords)
    return AmbientInstance(LiftedData.from_matrices(a, b), phi, m, coords, extra)


def approx_eigenfunction_instance(seed: int, s: int, eps: float, lam: float = 0.9,
                                  n: int = 300, p: Optional[int] = None) -> AmbientInstance:
    """Dictionary containing a unit ``f`` with ``sin(theta(f, K f)) = eps`` exactly.

    ``extra["f"]`` holds the dictionary coefficients of ``f``.
    """
    rng = rng_for(seed)
    p = p or 2 * s
    phi, m = _ambient(rng, n, p)
    v = _unit(rng.standard_normal(p))
    w = rng.standard_normal(p)
    w = _unit(w - v * (v @ w))
    mu = abs(lam) * eps / np.sqrt(1.0 - eps * eps)
    m += np.outer(lam * v + mu * w - m @ v, v)
    coords = np.column_stack([v, rng.standard_normal((p, s - 1))])
    f = np.zeros(s)
    f[0] = 1.0
    return _finish(phi, m, coords, f=f, lam=lam)


def external_eigenfunction_instance(seed: int, s: int, eps: float, lam: float = 0.9,
                                    n: int = 300, p: Optional[int] = None) -> AmbientInstance:
    """An exact eigenfunction ``f = phi @ v`` at distance about ``eps`` from the dictionary.

    ``extra["v"]`` holds the ambient coordinates of ``f``.
    """
    rng = rng_for(seed)
    p = p or 2 * s
    phi, m = _ambient(rng, n, p)
    v = _unit(rng.standard_normal(p))
    m += np.outer(lam * v - m @ v, v)
    coords = rng.standard_normal((p, s))
    q = np.linalg.qr(coords[:, 1:])[0]
    # first dictionary element: v pushed off the span of the others by eps
    nrm = rng.standard_normal(p)
    nrm -= q @ (q.T @ nrm)
    nrm -= v * (v @ nrm)
    coords[:, 0] = v + eps * _unit(nrm) * 1.0
    return _finish(phi, m, coords, v=v, lam=lam)


def planted_invariant_instance(seed: int, s: int, q: int, eps: float, n: int = 300,
                               p: Optional[int] = None) -> AmbientInstance:
    """Dictionary containing a ``q``-dimensional subspace invariant up to ``eps``.

    ``extra["planted"]`` holds the dictionary coefficients of that subspace.
    """
    rng = rng_for(seed)
    p = p or 2 * s
    phi, m = _ambient(rng, n, p)
    m[q:, :q] = eps * rng.standard_normal((p - q, q)) / np.sqrt(p)
    m[:q, :q] += np.eye(q)
    mix = rng.standard_normal((s, s))
    coords = np.zeros((p, s))
    coords[:q, :q] = np.eye(q)
    coords[:, q:] = rng.standard_normal((p, s - q))
    coords = coords @ mix
    planted = np.linalg.solve(mix, np.eye(s)[:, :q])
    return _finish(phi, m, coords, planted=planted)


def exact_invariant_instance(seed: int, s: int, n: int = 200) -> LiftedData:
    """``range(b) == range(a)`` exactly, up to roundoff."""
    rng = rng_for(seed)
    a = rng.standard_normal((n, s))
    return LiftedData.from_matrices(a, a @ (np.eye(s) + 0.2 * rng.standard_normal((s, s))))


# ---------------------------------------------------------------------------
# helpers


def subspace_angle(x, y) -> float:
    """Largest principal angle between ``range(x)`` and ``range(y)`` (same dimension)."""
    if x.shape[1] != y.shape[1]:
        return float(np.pi / 2)
    if x.shape[1] == 0:
        return 0.0
    return float(principal_angles(thin_qr(x).q, thin_qr(y).q, check=False)[0].max())


def sin_angle(x, y) -> float:
    """Sine of the angle between two vectors."""
    x = _unit(np.asarray(x, float))
    y = _unit(np.asarray(y, float))
    return float(np.linalg.norm(x - y * (y @ x)))


def distance(f_eval, basis_eval) -> float:
    """Distance from unit-normalized ``f_eval`` to ``range(basis_eval)``."""
    f = _unit(f_eval)
    if basis_eval.shape[1] == 0:
        return 1.0
    q = thin_qr(basis_eval).q
    return float(np.linalg.norm(f - q @ (q.T @ f)))


def rfb_edmd_reference(data: LiftedData, eps: float, max_steps: Optional[int] = None) -> list:
    """Recursive forward-backward EDMD: drop the top eigenvector of ``M_c`` each step.

    Returns the sequence of bases (coefficients w.r.t. the columns of
    ``data.a``), starting with the identity.
    """
    coeff = np.eye(data.dim)
    out = [coeff]
    steps = 0
    while coeff.shape[1] > 0 and (max_steps is None or steps < max_steps):
        sub = LiftedData.from_matrices(data.a @ coeff, data.b @ coeff)
        mats = edmd(sub)
        lam, vec = np.linalg.eig(mats.m_c)
        j = int(np.argmax(lam.real))
        if lam[j].real <= eps * eps:
            break
        v = vec[:, j].real
        q, r = np.linalg.qr(sub.a)
        y = _unit(r @ v)
        # orthogonal complement of y inside range(sub.a), in q coordinates
        comp = scipy.linalg.null_space(y[None, :])
        coeff = coeff @ scipy.linalg.solve_triangular(r, comp)
        out.append(coeff)
        steps += 1
    return out


# ---------------------------------------------------------------------------
# suites


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.2f}s)"


def check_fast_path(seed: int, s: int, ks=None, n: int = 200):
    """fast_recompute vs. from-scratch principal arguments on the truncated basis."""
    data = random_instance(seed, s, n)
    args = principal_arguments(data)
    state = SubspaceState(args, data)
    ks = ks or sorted({1, min(3, s - 1), max(1, s // 2)})
    worst_theta, worst_span = 0.0, 0.0
    for k in ks:
        fast = fast_recompute(args, k)
        ref = principal_arguments(data.restrict(args.data_coords[:, : s - k]))
        worst_theta = max(worst_theta, float(np.max(np.abs(fast.theta - ref.theta))))
        worst_span = max(worst_span, subspace_angle(fast.u_eval, ref.u_eval))
    return worst_theta, worst_span


def check_consistency(seed: int, s: int, n: Optional[int] = None) -> float:
    data = random_instance(seed, s, n or max(200, 10 * s))
    lam = np.sort(np.linalg.eigvals(edmd(data).m_c).real)
    return float(np.max(np.abs(lam - principal_arguments(data).sines ** 2)))


def check_spv_rfb(seed: int, s: int, eps: float = 0.05, n: int = 200):
    """Largest generation-wise angle between SPV (fast path) and RFB-EDMD subspaces."""
    data = random_instance(seed, s, n)
    report = prune(data, "spv", PruneConfig(eps=eps, record_bases=True))
    ref = [r for r in rfb_edmd_reference(data, eps) if r.shape[1] > 0]
    bases = [e.basis_coeff for e in report.trace if e.dim > 0]
    if len(bases) != len(ref):
        return float("inf"), len(bases), len(ref)
    worst = max(subspace_angle(data.a @ b, data.a @ r) for b, r in zip(bases, ref))
    return worst, len(bases), len(ref)


def check_oracle(seed: int, s: int, tol: float = 1e-8) -> int:
    """Fast SPV with a from-scratch comparison every generation; returns generations."""
    data = random_instance(seed, s)
    rep = prune(data, "spv", PruneConfig(eps=0.05, oracle_check_period=1, oracle_tol=tol))
    return len(rep.trace) - 1


def check_single_generation_bounds(seed: int, s: int, eps: float):
    """Information-loss and stability bounds for one MPV generation.

    Returns ``(dist, eps/gamma, sin_new, C*eps)``.
    """
    inst = approx_eigenfunction_instance(seed, s, eps)
    data = inst.data
    f_c = inst.extra["f"]
    f_eval, kf_eval = data.a @ f_c, data.b @ f_c
    eps_meas = sin_angle(f_eval, kf_eval)
    args = principal_arguments(data)
    # drop the upper half of the spectrum in one generation
    thr = float(args.sines[s // 2 - 1])
    rep = prune(data, "mpv", PruneConfig(eps=max(thr, eps * 1.01), record_bases=True))
    entry = rep.trace[1] if len(rep.trace) > 1 else None
    if entry is None or entry.dim == 0:
        return 0.0, 0.0, 0.0, 0.0
    gamma = entry.gamma
    basis_eval = data.a @ entry.basis_coeff
    q = thin_qr(basis_eval).q
    nrm = np.linalg.norm(f_eval)
    dist = float(np.linalg.norm(f_eval - q @ (q.T @ f_eval)) / nrm)
    # f_new = P_{S_new} f and its image
    c_new = np.linalg.lstsq(data.a, q @ (q.T @ f_eval), rcond=None)[0]
    sin_new = sin_angle(data.a @ c_new, data.b @ c_new)
    big_l = inst.restricted_norm()
    m = np.linalg.norm(kf_eval) / nrm
    c_const = 1.0 + (2.0 + 4.0 * big_l / m) / gamma
    return dist, eps_meas / gamma, sin_new, c_const * eps_meas


def check_external_bound(seed: int, s: int, eps: float, prune_eps: float = 0.3):
    """Multi-step external-eigenfunction bound; returns ``(dist_T, bound)``."""
    inst = external_eigenfunction_instance(seed, s, eps)
    data = inst.data
    f_eval = inst.evaluate(inst.extra["v"])
    lam = inst.extra["lam"]
    q0 = thin_qr(data.a).q
    f0_perp = f_eval - q0 @ (q0.T @ f_eval)
    eps0 = float(np.linalg.norm(f0_perp))
    # admissibility constant of f: ||K f_perp|| / ||f_perp||, evaluated in ambient coordinates
    c_perp = inst.phi.T @ f0_perp
    l_perp = float(np.linalg.norm(inst.m @ c_perp) / np.linalg.norm(c_perp))
    big_l = inst.restricted_norm()
    c_ext = 2.0 + 4.0 * (l_perp + big_l) / abs(lam)
    rep = prune(data, "mpv", PruneConfig(eps=prune_eps, record_bases=True))
    bound, dist_t = eps0, eps0
    for e in rep.trace[1:]:
        if e.dim == 0:
            break
        bound *= np.sqrt(1.0 + (c_ext / e.gamma) ** 2)
        dist_t = distance(f_eval, data.a @ e.basis_coeff)
    return dist_t, bound


def check_disjointness(seed: int, s: int, q: int = 3, eps: float = 1e-3) -> float:
    """Smallest principal angle between the planted subspace and each MPV-dropped span."""
    inst = planted_invariant_instance(seed, s, q, eps)
    data = inst.data
    planted = data.a @ inst.extra["planted"]
    delta_planted = invariance_proximity(principal_arguments(data.restrict(inst.extra["planted"])))
    eps_star = max(10 * delta_planted, 1e-6)
    state = SubspaceState.initial(data)
    worst = np.pi / 2
    while True:
        sines = state.args.sines
        drop = np.flatnonzero(sines > eps_star)
        if drop.size == 0 or drop.size == state.dim:
            break
        dropped = state.args.u_eval[:, drop]
        th, _, _ = principal_angles(thin_qr(planted).q, dropped, check=False)
        worst = min(worst, float(th.min()))
        keep = state.args.data_coords[:, : state.dim - drop.size]
        sub = state.data.restrict(keep)
        state = SubspaceState(principal_arguments(sub), sub, state.generation + 1)
    return worst


def check_projection_bounds(seed: int, s: int, samples: int = 1000) -> float:
    """Projection-norm bounds ``cos^2 max <= ||P_V u||^2 <= cos^2 min`` on random unit u.

    Returns the largest violation (<= 1e-10 passes).
    """
    rng = rng_for(seed)
    n = 4 * s + 10
    qu = np.linalg.qr(rng.standard_normal((n, s)))[0]
    qv = np.linalg.qr(rng.standard_normal((n, s)) + 0.5 * qu)[0]
    theta, _, _ = principal_angles(qu, qv)
    u = qu @ rng.standard_normal((s, samples))
    u /= np.linalg.norm(u, axis=0)
    proj = np.sum((qv.T @ u) ** 2, axis=0)
    lo = np.cos(theta[-1]) ** 2
    hi = np.cos(theta[0]) ** 2
    return float(max(np.max(lo - proj), np.max(proj - hi), 0.0))


def check_alternate_characterization(seed: int, s: int, samples: int = 10000) -> float:
    """``min ||P_V x|| / ||x||`` over sampled x in U minus ``cos theta_max`` (>= -1e-8 passes)."""
    rng = rng_for(seed)
    n = 4 * s + 10
    qu = np.linalg.qr(rng.standard_normal((n, s)))[0]
    qv = np.linalg.qr(rng.standard_normal((n, s)) + 0.5 * qu)[0]
    theta, _, _ = principal_angles(qu, qv)
    x = qu @ rng.standard_normal((s, samples))
    ratio = np.linalg.norm(qv.T @ x, axis=0) / np.linalg.norm(x, axis=0)
    return float(ratio.min() - np.cos(theta[-1]))


def check_worst_case(seed: int, s: int, trials: int = 200):
    data = random_instance(seed, s)
    delta = invariance_proximity(principal_arguments(data))
    analytic = worst_case_edmd_error(data, trials=0)
    sampled = worst_case_edmd_error(data, trials=trials, seed=seed)
    return delta, analytic, sampled


def check_exact_invariance(seed: int, s: int) -> float:
    data = exact_invariant_instance(seed, s)
    worst = 0.0
    for alg in ("spv", "mpv", "hybrid"):
        rep = prune(data, alg, PruneConfig(eps=1e-3))
        if len(rep.trace) != 1 or not rep.success:
            return float("inf")
        worst = max(worst, rep.final.delta)
    return worst


def _suite(name, fn: Callable[[], tuple]):
    t0 = time.perf_counter()
    try:
        passed, detail = fn()
    except Exception as exc:  # a crashing suite is a failing suite
        passed, detail = False, f"{type(exc).__name__}: {exc}"
    return SuiteResult(name, bool(passed), detail, time.perf_counter() - t0)


def run_all(seed: int = 0, s: int = 20) -> list:
    """Run every suite on instances derived from ``seed`` with dictionary size ``s``."""
    if s < 4:
        raise ValueError("verify needs s >= 4")

    def fast():
        th, sp = check_fast_path(seed, s)
        return th <= 1e-8 and sp < 1e-7, f"max |dtheta| {th:.1e}, span angle {sp:.1e}"

    def consistency():
        err = check_consistency(seed, s)
        return err <= 1e-8, f"max |eig(M_c) - sin^2| {err:.1e}"

    def rfb():
        ang, g1, g2 = check_spv_rfb(seed, min(s, 15))
        return ang < 1e-7, f"{g1}/{g2} generations, max angle {ang:.1e}"

    def oracle():
        gens = check_oracle(seed, s)
        return True, f"{gens} generations matched from-scratch angles to 1e-8"

    def loss_and_stability():
        worst = []
        ok = True
        for eps in (1e-4, 1e-3, 1e-2):
            dist, b1, sin_new, b2 = check_single_generation_bounds(seed, s, eps)
            ok &= dist <= b1 * (1 + 1e-6) and sin_new <= b2
            worst.append(f"{dist / b1 if b1 else 0:.2f}")
        return ok, "dist/(eps/gamma) = " + ", ".join(worst)

    def external():
        ratios, ok = [], True
        for eps in (1e-4, 1e-3, 1e-2):
            d, b = check_external_bound(seed, s, eps)
            ok &= d <= b * (1 + 1e-6)
            ratios.append(f"{d / b:.1e}")
        return ok, "dist/bound = " + ", ".join(ratios)

    def disjoint():
        ang = check_disjointness(seed, s)
        return ang > 1e-6, f"min angle planted vs dropped {ang:.2e}"

    def projections():
        v = check_projection_bounds(seed, s)
        return v <= 1e-10, f"max violation {v:.1e}"

    def alternate():
        gap = check_alternate_characterization(seed, s)
        return gap >= -1e-8, f"min ratio - cos(theta_max) = {gap:.1e}"

    def worst_case():
        delta, analytic, sampled = check_worst_case(seed, s)
        ok = abs(analytic - delta) <= 1e-8 and sampled <= delta + 1e-8
        return ok, f"delta {delta:.6f}, analytic {analytic:.6f}, sampled max {sampled:.6f}"

    def exact():
        d = check_exact_invariance(seed, s)
        return d <= 1e-6, f"max delta {d:.1e} with unchanged trace"

    return [
        _suite("fast-path equivalence", fast),
        _suite("consistency spectrum", consistency),
        _suite("SPV vs RFB-EDMD", rfb),
        _suite("oracle re-check", oracle),
        _suite("information-loss and stability bounds", loss_and_stability),
        _suite("external eigenfunction bound", external),
        _suite("violating-span disjointness", disjoint),
        _suite("projection-norm bounds", projections),
        _suite("alternate characterization", alternate),
        _suite("worst-case EDMD error", worst_case),
        _suite("exact invariance fixed point", exact),
    ]
