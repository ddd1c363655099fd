"""Empirical-L2 Koopman machinery.

All evaluated matrices carry the ``1/sqrt(N)`` scaling, so plain Euclidean
products of columns are the empirical inner products
``<f, g> = (1/N) sum_i f(x_i) g(x_i)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.linalg

from .dictionary import Dictionary
from .errors import DimensionMismatch, RankDeficient
from .linalg import DEFAULT_RANK_TOL, ThinQR, principal_pairs_full, thin_qr


@dataclass(frozen=True)
class LiftedData:
    """Scaled evaluations of a basis on ``X`` (``a``) and ``X+`` (``b``).

    ``raw_a`` / ``raw_b`` hold the raw dictionary evaluations with the same
    scaling, so functions given by raw coefficients can be evaluated without
    going back to the dictionary.
    """

    a: np.ndarray
    b: np.ndarray
    basis_coeff: np.ndarray
    raw_a: np.ndarray = field(repr=False, default=None)
    raw_b: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.a.shape != self.b.shape:
            raise DimensionMismatch(f"a {self.a.shape} and b {self.b.shape} differ in shape")
        if self.basis_coeff.shape[1] != self.a.shape[1]:
            raise DimensionMismatch("basis_coeff column count does not match a")
        if self.raw_a is None:
            object.__setattr__(self, "raw_a", self.a)
            object.__setattr__(self, "raw_b", self.b)

    @classmethod
    def from_matrices(cls, a, b) -> "LiftedData":
        """Treat ``a``/``b`` themselves as the (already scaled) dictionary."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return cls(a, b, np.eye(a.shape[1]))

    @property
    def n_samples(self) -> int:
        return self.a.shape[0]

    @property
    def dim(self) -> int:
        return self.a.shape[1]

    def restrict(self, coeff) -> "LiftedData":
        """Data for the basis ``current_basis @ coeff``."""
        coeff = np.asarray(coeff, dtype=float)
        return replace(self, a=self.a @ coeff, b=self.b @ coeff,
                       basis_coeff=self.basis_coeff @ coeff)

    def with_basis(self, raw_coeff) -> "LiftedData":
        """Data for a basis given in raw-dictionary coordinates."""
        raw_coeff = np.asarray(raw_coeff, dtype=float)
        return replace(self, a=self.raw_a @ raw_coeff, b=self.raw_b @ raw_coeff,
                       basis_coeff=raw_coeff)


def lift(dictionary: Dictionary, basis_coeff, x, x_plus) -> LiftedData:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    x_plus = np.atleast_2d(np.asarray(x_plus, dtype=float))
    if x.shape != x_plus.shape:
        raise DimensionMismatch(f"x {x.shape} and x_plus {x_plus.shape} differ in shape")
    if x.shape[1] != dictionary.state_dim:
        raise DimensionMismatch("state dimension does not match the dictionary")
    scale = 1.0 / np.sqrt(x.shape[0])
    raw_a = dictionary.evaluate(x) * scale
    raw_b = dictionary.evaluate(x_plus) * scale
    basis_coeff = np.eye(len(dictionary)) if basis_coeff is None else np.asarray(basis_coeff, float)
    return LiftedData(raw_a @ basis_coeff, raw_b @ basis_coeff, basis_coeff, raw_a, raw_b)


@dataclass(frozen=True)
class KoopmanMatrices:
    k_f: np.ndarray
    k_b: np.ndarray
    m_c: np.ndarray


def _require_full_rank(m, name, rank_tol):
    qr = thin_qr(m, rank_tol=rank_tol)
    if qr.deficient:
        raise RankDeficient(f"{name} is rank deficient (columns {list(qr.deficient)})", name)
    return qr


def lstsq_solve(m, rhs, rank_tol=DEFAULT_RANK_TOL):
    """``pinv(m) @ rhs``: QR + triangular solve if full rank, truncated SVD otherwise."""
    qr = thin_qr(m, rank_tol=rank_tol)
    if not qr.deficient:
        return scipy.linalg.solve_triangular(qr.r, qr.q.T @ rhs)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    keep = s > rank_tol * s[0] if s.size and s[0] > 0 else np.zeros(s.size, bool)
    return vt[keep].T @ ((u[:, keep].T @ rhs) / s[keep, None])


def edmd(data: LiftedData, rank_tol: float = DEFAULT_RANK_TOL) -> KoopmanMatrices:
    """Forward and backward EDMD matrices and the consistency matrix.

    ``k_f`` solves ``min ||a K - b||_F``; ``k_b`` swaps the roles.
    """
    qr_a = _require_full_rank(data.a, "A", rank_tol)
    k_f = scipy.linalg.solve_triangular(qr_a.r, qr_a.q.T @ data.b)
    k_b = lstsq_solve(data.b, data.a, rank_tol)
    m_c = np.eye(data.dim) - k_f @ k_b
    return KoopmanMatrices(k_f, k_b, m_c)


@dataclass(frozen=True)
class Frame:
    """Orthonormal coordinates for a root subspace and its Koopman image.

    ``q_a`` spans the root subspace, ``q_b`` the root image, and
    ``b_coords`` expresses ``q_b`` in the orthonormal system ``[q_a, q_perp]``
    (``q_b = q_a @ gram + q_perp @ h``). After the frame is built, no
    operation on sub-spans of the root touches the sample dimension.
    """

    q_a: np.ndarray
    r_a: np.ndarray
    q_b: np.ndarray
    r_b: np.ndarray
    gram: np.ndarray
    b_coords: np.ndarray
    coeff_a: np.ndarray
    image_rank: int

    @classmethod
    def build(cls, data: LiftedData, rank_tol: float = DEFAULT_RANK_TOL) -> "Frame":
        qr_a = _require_full_rank(data.a, "A", rank_tol)
        # image of the q_a columns: b @ inv(r_a)
        b_img = scipy.linalg.solve_triangular(qr_a.r, data.b.T, trans="T").T
        qr_b = thin_qr(b_img, rank_tol=rank_tol)
        gram = qr_a.q.T @ qr_b.q
        resid = qr_b.q - qr_a.q @ gram
        # second Gram-Schmidt pass keeps the split accurate
        g2 = qr_a.q.T @ resid
        resid -= qr_a.q @ g2
        gram = gram + g2
        h = np.linalg.qr(resid, mode="r")
        coeff_a = scipy.linalg.solve_triangular(qr_a.r, data.basis_coeff.T, trans="T").T
        return cls(qr_a.q, qr_a.r, qr_b.q, qr_b.r, gram, np.vstack([gram, h]), coeff_a, qr_b.rank)


@dataclass(frozen=True)
class PrincipalArguments:
    """Principal angles between a subspace and its image, plus the bookkeeping
    needed to update them.

    The subspace basis is ``u_eval = frame.q_a @ uc`` and the image QR is
    ``w = frame.q_b @ wc`` with triangular ``r``; both evaluated forms are
    materialized lazily.
    """

    theta: np.ndarray
    sines: np.ndarray
    frame: Frame
    uc: np.ndarray
    wc: np.ndarray
    r: np.ndarray
    deficient: int = 0

    @property
    def dim(self) -> int:
        return self.theta.size

    @cached_property
    def u_eval(self) -> np.ndarray:
        return self.frame.q_a @ self.uc

    @cached_property
    def u_coeff(self) -> np.ndarray:
        return self.frame.coeff_a @ self.uc

    @cached_property
    def image_qr(self) -> ThinQR:
        return ThinQR(self.frame.q_b @ self.wc, self.r)

    @property
    def data_coords(self) -> np.ndarray:
        """Coefficients of ``u_eval`` in the basis of the data the frame was built from."""
        return scipy.linalg.solve_triangular(self.frame.r_a, self.uc)


def _orth_range(m, rank_tol):
    """Orthonormal basis of ``range(m)``; QR when well conditioned, SVD otherwise."""
    qr = thin_qr(m, rank_tol=rank_tol)
    if not qr.deficient:
        return qr.q
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return u[:, :0]
    return u[:, s > rank_tol * s[0]]


def frame_principal_arguments(frame: Frame, uc, rank_tol: float = DEFAULT_RANK_TOL) -> PrincipalArguments:
    """Principal arguments of the sub-span ``q_a @ uc`` of a frame's root subspace.

    ``uc`` must have orthonormal columns. Works entirely in the ``2s``
    coordinates of the frame, so the cost does not depend on the sample count.
    """
    uc = np.asarray(uc, dtype=float)
    s, m = uc.shape
    img = frame.r_b @ uc
    q_img = _orth_range(img, rank_tol)
    amb_u = np.vstack([uc, np.zeros((frame.b_coords.shape[0] - s, m))])
    theta, sines, rot = principal_pairs_full(amb_u, frame.b_coords @ q_img)
    uc = uc @ rot
    qr_img = thin_qr(frame.r_b @ uc, rank_tol=0.0)
    return PrincipalArguments(theta, sines, frame, uc, qr_img.q, qr_img.r,
                              deficient=m - q_img.shape[1])


def principal_arguments(data: LiftedData, rank_tol: float = DEFAULT_RANK_TOL) -> PrincipalArguments:
    """Principal angles and vectors between ``range(a)`` and ``range(b)`` from scratch.

    Rank deficiency of ``a`` is fatal. If ``b`` loses rank, the directions
    without a partner in the image get angle pi/2 and sort last.
    """
    frame = Frame.build(data, rank_tol)
    return frame_principal_arguments(frame, np.eye(frame.q_a.shape[1]), rank_tol)


def invariance_proximity(args: PrincipalArguments) -> float:
    """Sine of the largest principal angle; 0 for an invariant subspace."""
    if args.dim == 0:
        return 0.0
    return float(args.sines[-1])


def _relative_residual(data, k_f, c):
    kf = data.b @ c
    pred = data.a @ (k_f @ c)
    return np.linalg.norm(kf - pred, axis=0) / np.linalg.norm(kf, axis=0)


def worst_case_edmd_error(data: LiftedData, trials: int = 0, seed=0,
                          rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """Largest relative one-step EDMD error ``||Kf - K_EDMD f|| / ||Kf||`` seen.

    Evaluates the analytic maximizer (the function whose image is the image-side
    principal vector of the largest angle) plus ``trials`` random members of
    the subspace.
    """
    mats = edmd(data, rank_tol)
    qr_b = thin_qr(data.b, rank_tol=rank_tol)
    cands = []
    if not qr_b.deficient:
        q_a = thin_qr(data.a).q
        u, _, vt = np.linalg.svd(q_a.T @ qr_b.q)
        c_max = scipy.linalg.solve_triangular(qr_b.r, vt[-1])
        cands.append(c_max[:, None])
    if trials:
        rng = np.random.default_rng(seed)
        cands.append(rng.standard_normal((data.dim, trials)))
    if not cands:
        return 1.0
    c = np.concatenate(cands, axis=1)
    return float(np.max(_relative_residual(data, mats.k_f, c)))
