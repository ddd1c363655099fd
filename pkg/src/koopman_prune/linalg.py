"""Dense linear-algebra kernels.

Thin QR with a fixed sign convention, compact SVD, principal angles between
subspaces, a secular-equation based symmetric rank-one eigen-update and the
incremental QR update used by the fast pruning path.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotOrthonormal, RankDeficientUpdate

EPS = np.finfo(float).eps
DEFAULT_RANK_TOL = 1e-10
ORTHO_CHECK_TOL = 1e-8
CLAMP_SLACK = 1e-12


@dataclass(frozen=True)
class ThinQR:
    q: np.ndarray
    r: np.ndarray
    # column indices whose |r_ii| fell below rank_tol * max|r_ii|
    deficient: tuple = field(default=())

    @property
    def rank(self) -> int:
        return self.r.shape[1] - len(self.deficient)


@dataclass(frozen=True)
class CompactSVD:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class SymmetricEigUpdateState:
    """Eigendecomposition ``e @ diag(lam) @ e.T`` with ascending ``lam``."""

    lam: np.ndarray
    e: np.ndarray

    @classmethod
    def diagonal(cls, lam) -> "SymmetricEigUpdateState":
        lam = np.asarray(lam, dtype=float)
        order = np.argsort(lam, kind="stable")
        return cls(lam[order], np.eye(lam.size)[:, order])

    def matrix(self) -> np.ndarray:
        return (self.e * self.lam) @ self.e.T


def normalize_signs(*mats, ref=None):
    """Flip column signs so the first non-negligible entry of ``ref`` is >= 0.

    ``ref`` defaults to the first matrix. The same flips are applied to every
    matrix passed, which keeps paired singular vectors consistent.
    """
    ref = mats[0] if ref is None else ref
    if ref.shape[1] == 0:
        return mats if len(mats) > 1 else mats[0]
    mag = np.abs(ref)
    thresh = 1e-12 * np.maximum(mag.max(axis=0), np.finfo(float).tiny)
    first = np.argmax(mag > thresh, axis=0)
    signs = np.sign(ref[first, np.arange(ref.shape[1])])
    signs[signs == 0] = 1.0
    out = tuple(m * signs for m in mats)
    return out if len(out) > 1 else out[0]


def thin_qr(m, rank_tol: float = DEFAULT_RANK_TOL) -> ThinQR:
    """Householder thin QR with non-negative diagonal in ``r``.

    Columns whose diagonal entry is below ``rank_tol * max|r_ii|`` are listed
    in ``ThinQR.deficient``; no exception is raised here.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise DimensionMismatch(f"thin_qr needs rows >= cols, got shape {m.shape}")
    q, r = np.linalg.qr(m, mode="reduced")
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    q = q * d
    r = np.triu(r * d[:, None])
    diag = np.abs(np.diag(r))
    scale = diag.max() if diag.size else 0.0
    deficient = tuple(int(i) for i in np.flatnonzero(diag < rank_tol * scale)) if scale > 0 \
        else tuple(range(r.shape[1]))
    return ThinQR(q, r, deficient)


def compact_svd(m) -> CompactSVD:
    m = np.asarray(m, dtype=float)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    u, v = normalize_signs(u, vt.T)
    return CompactSVD(u, s, v)


def check_orthonormal(q, name="matrix", tol=ORTHO_CHECK_TOL):
    q = np.asarray(q, dtype=float)
    err = np.linalg.norm(q.T @ q - np.eye(q.shape[1]))
    if err > tol:
        raise NotOrthonormal(f"{name} columns are not orthonormal (residual {err:.2e})")
    return q


def _pair_angles(q_u, q_v, u_c, v_c, sigma):
    """Angles for principal pairs from both cosines and residual sines.

    ``arccos`` alone loses half the digits for small angles, so the sine is
    measured directly as ``||(I - P_V) u_j||`` and combined with arctan2.
    """
    if np.any(sigma > 1.0 + CLAMP_SLACK):
        raise NotOrthonormal(f"singular value {sigma.max():.16f} exceeds 1")
    cos = np.minimum(sigma, 1.0)
    k = cos.size
    y = q_u @ u_c[:, :k]
    resid = y - q_v @ (q_v.T @ y)
    sin = np.linalg.norm(resid, axis=0)
    theta = np.arctan2(sin, cos)
    theta = np.clip(theta, 0.0, np.pi / 2)
    return theta, np.minimum(sin, 1.0)


def principal_angles(q_u, q_v, check: bool = True):
    """Principal angles between ``range(q_u)`` and ``range(q_v)``.

    Parameters
    ----------
    q_u : (n, d1) ndarray with orthonormal columns
    q_v : (n, d2) ndarray with orthonormal columns

    Returns
    -------
    theta : (k,) ndarray
        Angles in ``[0, pi/2]``, ascending, ``k = min(d1, d2)``.
    u_coeff, v_coeff : (d1, k), (d2, k) ndarray
        Coefficients of the principal vectors in the two bases.
    """
    q_u = np.asarray(q_u, dtype=float)
    q_v = np.asarray(q_v, dtype=float)
    if q_u.shape[0] != q_v.shape[0]:
        raise DimensionMismatch("bases live in spaces of different dimension")
    if check:
        check_orthonormal(q_u, "q_u")
        check_orthonormal(q_v, "q_v")
    svd = compact_svd(q_u.T @ q_v)
    theta, _ = _pair_angles(q_u, q_v, svd.u, svd.v, svd.sigma)
    # SVD order is descending sigma, i.e. ascending angle; the arctan2 refinement
    # can swap near-ties, so sort once more.
    order = np.argsort(theta, kind="stable")
    return theta[order], svd.u[:, order], svd.v[:, order]


def principal_pairs_full(q_u, q_v):
    """Like :func:`principal_angles` but always returns ``d1`` angles.

    Directions of ``range(q_u)`` that have no partner in a lower-dimensional
    ``range(q_v)`` get angle pi/2 and come last.

    Returns ``theta, sin, u_coeff`` with ``u_coeff`` square ``(d1, d1)``.
    """
    d1 = q_u.shape[1]
    m = q_u.T @ q_v
    u, s, _ = np.linalg.svd(m, full_matrices=True)
    sigma = np.zeros(d1)
    sigma[: s.size] = s
    u = normalize_signs(u)
    theta, sin = _pair_angles(q_u, q_v, u, None, sigma)
    order = np.argsort(theta, kind="stable")
    return theta[order], sin[order], u[:, order]


# ---------------------------------------------------------------------------
# symmetric rank-one update


def _deflate(lam, e, z, tol):
    """Deflate small update components and near-equal eigenvalues in place."""
    active = np.abs(z) > tol
    prev = -1
    for j in np.flatnonzero(active):
        if prev >= 0 and lam[j] - lam[prev] <= tol:
            r = np.hypot(z[prev], z[j])
            c, s = z[j] / r, z[prev] / r
            ep = e[:, prev].copy()
            ej = e[:, j]
            e[:, prev] = c * ep - s * ej
            e[:, j] = s * ep + c * ej
            z[prev] = 0.0
            z[j] = r
            active[prev] = False
        prev = j
    return active


def _secular_roots(d, z, max_iter=100):
    """Roots of ``1 + sum z_j^2 / (d_j - mu)`` for strictly increasing ``d``.

    Returns ``origin`` and ``tau`` with ``mu = origin + tau``; keeping the
    offset from the nearest pole separate preserves the accuracy of
    ``mu - d_j`` for the eigenvector formula.
    """
    m = d.size
    z2 = z * z
    znorm = z2.sum()
    gap = np.append(np.diff(d), znorm)
    rel = (d[None, :] - d[:, None]) - 0.5 * gap[:, None]
    with np.errstate(divide="ignore"):
        f_mid = 1.0 + (z2[None, :] / rel).sum(axis=1)
    left = f_mid >= 0.0
    left[-1] = True
    origin_idx = np.where(left, np.arange(m), np.arange(m) + 1)
    origin_idx[-1] = m - 1
    origin = d[origin_idx]
    lo = np.where(left, 0.0, -0.5 * gap)
    hi = np.where(left, 0.5 * gap, 0.0)
    hi[-1] = gap[-1]
    # poles relative to each root's origin
    dd = d[None, :] - origin[:, None]
    tau = 0.5 * (lo + hi)
    idx = np.arange(m)
    lower_mask = idx[None, :] <= idx[:, None]  # poles left of the interval
    done = np.zeros(m, dtype=bool)
    last = np.zeros(m, dtype=bool)
    last[-1] = True
    for _ in range(max_iter):
        delta = dd - tau[:, None]
        terms = z2[None, :] / delta
        f = 1.0 + terms.sum(axis=1)
        err = 8.0 * EPS * (1.0 + np.abs(terms).sum(axis=1))
        width = hi - lo
        conv = (np.abs(f) <= err) | (width <= 4.0 * EPS * np.maximum(np.abs(lo), np.abs(hi)))
        done |= conv
        if done.all():
            break
        lo = np.where(~done & (f < 0), tau, lo)
        hi = np.where(~done & (f > 0), tau, hi)
        d2 = terms / delta
        psi = np.where(lower_mask, terms, 0.0).sum(axis=1)
        dpsi = np.where(lower_mask, d2, 0.0).sum(axis=1)
        phi = np.where(lower_mask, 0.0, terms).sum(axis=1)
        dphi = np.where(lower_mask, 0.0, d2).sum(axis=1)
        di = delta[idx, idx]
        di1 = np.where(last, 1.0, delta[idx, np.minimum(idx + 1, m - 1)])
        c = 1.0 + psi + phi - di * dpsi - np.where(last, 0.0, di1 * dphi)
        q = dpsi * di * di
        s = np.where(last, 0.0, dphi * di1 * di1)
        with np.errstate(divide="ignore", invalid="ignore"):
            # two-pole osculating model; single pole for the outermost root
            a_ = c
            b_ = c * (di + di1) + q + s
            c_ = c * di * di1 + q * di1 + s * di
            disc = np.sqrt(np.maximum(b_ * b_ - 4.0 * a_ * c_, 0.0))
            den = np.where(b_ >= 0, b_ + disc, b_ - disc)
            eta1 = den / (2.0 * a_)
            eta2 = 2.0 * c_ / den
            in1 = (eta1 > di) & (eta1 < di1)
            eta = np.where(in1, eta1, eta2)
            eta = np.where(last, di + q / c, eta)
            cand = tau + eta
        ok = np.isfinite(cand) & (cand > lo) & (cand < hi)
        new_tau = np.where(ok, cand, 0.5 * (lo + hi))
        tau = np.where(done, tau, new_tau)
    return origin, tau


def rank_one_eig_update(state: SymmetricEigUpdateState, b) -> SymmetricEigUpdateState:
    """Eigendecomposition of ``E diag(lam) E^T + b b^T``.

    Deflation drops update components below ``64 eps ||A||`` and merges
    eigenvalues closer than the same tolerance with a Givens rotation. The
    remaining secular equation is solved per interval with a bracketed
    rational-interpolation iteration, and eigenvectors are rebuilt from the
    computed roots (Lowner update of ``z``) so they stay orthogonal.
    """
    lam = np.asarray(state.lam, dtype=float)
    e = np.array(state.e, dtype=float, copy=True)
    b = np.asarray(b, dtype=float)
    m = lam.size
    if b.shape != (m,) or e.shape != (m, m):
        raise DimensionMismatch(f"update vector of length {b.size} for an order-{m} state")
    z = e.T @ b
    zz = float(z @ z)
    if zz == 0.0 or m == 0:
        return SymmetricEigUpdateState(lam.copy(), normalize_signs(e))
    norm = (np.abs(lam).max() if m else 0.0) + zz
    tol = 64.0 * EPS * norm
    active = _deflate(lam, e, z, tol)
    if not active.any():
        return SymmetricEigUpdateState(lam.copy(), normalize_signs(e))

    d = lam[active]
    za = z[active]
    origin, tau = _secular_roots(d, za)
    mu = origin + tau
    # diff[k, j] = mu_j - d_k, evaluated through the pole-relative offset
    diff = (origin[None, :] - d[:, None]) + tau[None, :]
    ma = d.size
    den = d[None, :] - d[:, None]
    ratio = np.ones((ma, ma))
    jj, kk = np.meshgrid(np.arange(ma), np.arange(ma))
    below = jj < kk
    ratio[below] = diff[below] / den[below]
    above = (jj >= kk) & (jj < ma - 1)
    ratio[above] = diff[above] / den[kk[above], jj[above] + 1]
    ratio[:, -1] = diff[:, -1]
    zhat = np.sqrt(np.abs(np.prod(ratio, axis=1)))
    zhat = np.copysign(zhat, za)
    v = zhat[:, None] / (-diff)
    v /= np.linalg.norm(v, axis=0)

    new_lam = np.concatenate([lam[~active], mu])
    new_e = np.concatenate([e[:, ~active], e[:, active] @ v], axis=1)
    order = np.argsort(new_lam, kind="stable")
    return SymmetricEigUpdateState(new_lam[order], normalize_signs(new_e[:, order]))


def incremental_qr(w, r, t, rank_tol: float = DEFAULT_RANK_TOL) -> ThinQR:
    """QR factors of ``w @ r @ t`` from those of ``w @ r``.

    Only the small ``(s, s-k)`` product ``r @ t`` is factored, so the cost is
    independent of the number of rows of ``w``.
    """
    w = np.asarray(w, dtype=float)
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if r.shape[0] != w.shape[1] or t.shape[0] != r.shape[1]:
        raise DimensionMismatch("incompatible shapes for incremental QR")
    qr_c = thin_qr(r @ t, rank_tol=rank_tol)
    if qr_c.deficient:
        raise RankDeficientUpdate(
            f"updated triangular factor is rank deficient in columns {list(qr_c.deficient)}",
            matrix_name="R_c",
        )
    return ThinQR(w @ qr_c.q, qr_c.r)
