"""Lifted linear predictors ``z+ = A z``, ``x = C z`` on a pruned subspace."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dictionary import Dictionary
from .errors import DimensionMismatch, RankDeficient
from .koopman import lstsq_solve
from .linalg import DEFAULT_RANK_TOL, thin_qr
from .pruning import SubspaceState
from .systems import SnapshotSet

DIVERGENCE_FACTOR = 1e6


@dataclass
class LiftedModel:
    """``a_dyn`` advances lifted states, ``c_out`` reads states back out.

    Lifted states are ``z(x) = dictionary(x) @ lift_coeff`` (unscaled).
    """

    a_dyn: np.ndarray
    c_out: np.ndarray
    lift_coeff: np.ndarray
    dictionary: Dictionary
    lift_norm_median: float = 1.0

    def __post_init__(self):
        s = self.lift_coeff.shape[1]
        if self.a_dyn.shape != (s, s):
            raise DimensionMismatch(f"a_dyn must be {s}x{s}, got {self.a_dyn.shape}")
        if self.c_out.shape[1] != s:
            raise DimensionMismatch("c_out column count must equal the lifted dimension")
        if self.lift_coeff.shape[0] != len(self.dictionary):
            raise DimensionMismatch("lift_coeff rows must match the dictionary size")

    @property
    def dim(self) -> int:
        return self.a_dyn.shape[0]

    @property
    def state_dim(self) -> int:
        return self.c_out.shape[0]

    def lift(self, x) -> np.ndarray:
        return self.dictionary.evaluate(x) @ self.lift_coeff

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.a_dyn)))) if self.dim else 0.0

    def to_json(self) -> dict:
        from .io import SCHEMA_VERSION, matrix_to_json

        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "lifted_model",
            "a_dyn": matrix_to_json(self.a_dyn),
            "c_out": matrix_to_json(self.c_out),
            "lift_coeff": matrix_to_json(self.lift_coeff),
            "lift_norm_median": self.lift_norm_median,
            "dictionary": self.dictionary.to_json(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "LiftedModel":
        from .io import SCHEMA_VERSION, matrix_from_json

        if doc.get("kind") != "lifted_model":
            raise ValueError("not a lifted model document")
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema_version {doc.get('schema_version')!r}")
        return cls(matrix_from_json(doc["a_dyn"]), matrix_from_json(doc["c_out"]),
                   matrix_from_json(doc["lift_coeff"]), Dictionary.from_json(doc["dictionary"]),
                   float(doc["lift_norm_median"]))

    def save(self, path):
        from .io import dump_json

        dump_json(self.to_json(), path)

    @classmethod
    def load(cls, path) -> "LiftedModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def build_model(basis, data: SnapshotSet, dictionary: Dictionary,
                rank_tol: float = DEFAULT_RANK_TOL) -> LiftedModel:
    """Fit ``a_dyn`` and ``c_out`` by least squares on the span of ``basis``.

    Parameters
    ----------
    basis : SubspaceState or ndarray
        Pruned subspace, or its raw-dictionary coefficients ``(s0, s)``.
    data : SnapshotSet
    dictionary : Dictionary

    Notes
    -----
    ``c_out`` is refit for every subspace, i.e. each state coordinate is
    projected onto the given span under the empirical inner product.
    """
    coeff = basis.basis_coeff if isinstance(basis, SubspaceState) else np.asarray(basis, float)
    scale = 1.0 / np.sqrt(len(data))
    z = dictionary.evaluate(data.x) @ coeff
    zp = dictionary.evaluate(data.x_plus) @ coeff
    qr = thin_qr(z * scale, rank_tol=rank_tol)
    if qr.deficient:
        raise RankDeficient("lifted training matrix is rank deficient", "Z")
    k = lstsq_solve(z * scale, zp * scale, rank_tol)
    c = lstsq_solve(z * scale, data.x * scale, rank_tol)
    med = float(np.median(np.linalg.norm(z, axis=1)))
    return LiftedModel(k.T, c.T, coeff, dictionary, med)


@dataclass
class PredictionTrace:
    """Rollout over steps ``t = 0 .. horizon``.

    Error columns are NaN when no truth was supplied. After divergence
    (``diverged_at``) the predicted values are NaN.
    """

    t: np.ndarray
    x_pred: np.ndarray
    z_pred: np.ndarray = field(repr=False)
    e_state: np.ndarray = field(repr=False)
    e_lifted: np.ndarray = field(repr=False)
    diverged_at: Optional[int] = None

    def __len__(self):
        return self.t.size

    def head(self, steps: int) -> "PredictionTrace":
        """First ``steps + 1`` rows."""
        n = steps + 1
        div = self.diverged_at if self.diverged_at is not None and self.diverged_at < n else None
        return PredictionTrace(self.t[:n], self.x_pred[:n], self.z_pred[:n], self.e_state[:n],
                               self.e_lifted[:n], div)

    def write_csv(self, path):
        from .io import fmt

        n = self.x_pred.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"x_pred{i}" for i in range(n)] + ["e_state", "e_lifted"])
            for i in range(self.t.size):
                w.writerow([int(self.t[i])] + [fmt(v) for v in self.x_pred[i]]
                           + [fmt(self.e_state[i]), fmt(self.e_lifted[i])])


def predict(model: LiftedModel, x0, horizon: int, truth=None) -> PredictionTrace:
    """Roll out ``z_{t+1} = a_dyn z_t`` from ``z_0 = lift(x0)`` without re-lifting.

    ``truth``, if given, is the true trajectory ``(horizon + 1, n)`` starting at
    ``x0``; it populates ``e_state`` and ``e_lifted``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != model.state_dim:
        raise DimensionMismatch(f"x0 has {x0.size} entries, model state has {model.state_dim}")
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        if truth.shape != (horizon + 1, model.state_dim):
            raise DimensionMismatch(f"truth must have shape {(horizon + 1, model.state_dim)}")
    z = np.full((horizon + 1, model.dim), np.nan)
    z[0] = model.lift(x0[None, :])[0]
    limit = DIVERGENCE_FACTOR * max(model.lift_norm_median, np.finfo(float).tiny)
    diverged = None
    for t in range(horizon):
        if np.linalg.norm(z[t]) > limit:
            diverged = t
            break
        z[t + 1] = model.a_dyn @ z[t]
    if diverged is None and np.linalg.norm(z[horizon]) > limit:
        diverged = horizon
    if diverged is not None:
        z[diverged:] = np.nan
    x_pred = z @ model.c_out.T
    e_state = np.full(horizon + 1, np.nan)
    e_lifted = np.full(horizon + 1, np.nan)
    if truth is not None:
        e_state = np.linalg.norm(truth - x_pred, axis=1)
        e_lifted = np.linalg.norm(model.lift(truth) - z, axis=1)
    return PredictionTrace(np.arange(horizon + 1), x_pred, z, e_state, e_lifted, diverged)


@dataclass
class TradeoffRow:
    dim: int
    delta: float
    recon_errors: tuple
    horizon_state_error: float
    spectral_radius: float

    @property
    def one_step_recon_error(self) -> float:
        return max(self.recon_errors)


def reconstruction_errors(model: LiftedModel, data: SnapshotSet) -> np.ndarray:
    """Empirical-L2 norm of ``(I - P_S) e_j`` for each state coordinate."""
    resid = data.x - model.lift(data.x) @ model.c_out.T
    return np.linalg.norm(resid, axis=0) / np.sqrt(len(data))


def tradeoff_scan(report, data: SnapshotSet, dictionary: Dictionary, x0=None, truth=None,
                  max_delta: Optional[float] = None) -> list:
    """Invariance vs. reconstruction table over the nested subspaces of ``report``.

    Only subspaces whose basis is known are listed (all of them when the run
    recorded bases, otherwise just the final one). ``truth`` is a true
    trajectory from ``x0``; its length sets the rollout horizon.
    """
    rows = []
    for e in report.trace:
        if e.delta is None or (max_delta is not None and e.delta > max_delta):
            continue
        basis = report.basis_for_dim(e.dim)
        if basis is None:
            continue
        model = build_model(basis, data, dictionary)
        h_err = float("nan")
        if truth is not None and x0 is not None:
            tr = predict(model, x0, len(truth) - 1, truth)
            h_err = float(tr.e_state[-1])
        rows.append(TradeoffRow(e.dim, float(e.delta), tuple(reconstruction_errors(model, data)),
                                h_err, model.spectral_radius()))
    return rows


def choose_dimension(report, data: SnapshotSet, dictionary: Dictionary,
                     max_delta: Optional[float] = None, stability_slack: float = 0.0) -> int:
    """Pick a subspace from a pruning trace for long-horizon prediction.

    Returns the final dimension when pruning succeeded and its model is
    stable. Otherwise, the largest traced subspace with ``delta <= max_delta``
    (default: the report's coarse tolerance, else ``eps``) whose lifted
    dynamics has spectral radius ``<= 1 + stability_slack``.
    """
    cfg = report.config
    if max_delta is None:
        max_delta = cfg.eps_coarse if cfg.eps_coarse is not None else max(cfg.eps, 0.1)
    cands = []
    if report.success:
        cands.append(report.final_dim)
    cands += sorted({e.dim for e in report.trace if e.delta is not None and e.delta <= max_delta
                     and e.dim > 0}, reverse=True)
    for dim in cands:
        basis = report.basis_for_dim(dim)
        if basis is None:
            continue
        if build_model(basis, data, dictionary).spectral_radius() <= 1.0 + stability_slack:
            return dim
    if report.success:
        return report.final_dim
    raise ValueError("no traced subspace has a known basis within the tolerance")
