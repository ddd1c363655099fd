"""Observable dictionaries: evaluation, JSON round-trip and preconditioning."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import DegenerateData, DimensionMismatch
from .linalg import thin_qr

KINDS = ("monomial", "gaussian_rbf", "wendland", "coordinate", "constant")


@dataclass(frozen=True)
class Observable:
    """A scalar observable. Which parameters matter depends on ``kind``."""

    kind: str
    exponents: tuple = ()
    center: tuple = ()
    width: float = 0.0
    support_radius: float = 0.0
    index: int = -1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if self.kind == "monomial" and any(e < 0 for e in self.exponents):
            raise ValueError("monomial exponents must be non-negative")
        if self.kind == "gaussian_rbf" and not self.width > 0:
            raise ValueError("RBF width must be positive")
        if self.kind == "wendland" and not self.support_radius > 0:
            raise ValueError("Wendland support radius must be positive")

    @classmethod
    def monomial(cls, exponents):
        return cls("monomial", exponents=tuple(int(e) for e in exponents))

    @classmethod
    def gaussian(cls, center, width):
        return cls("gaussian_rbf", center=tuple(float(c) for c in center), width=float(width))

    @classmethod
    def wendland(cls, center, support_radius):
        return cls("wendland", center=tuple(float(c) for c in center),
                   support_radius=float(support_radius))

    @classmethod
    def coordinate(cls, index):
        return cls("coordinate", index=int(index))

    @classmethod
    def constant(cls):
        return cls("constant")

    def state_dim(self):
        """Dimension implied by the parameters, or None if unconstrained."""
        if self.kind == "monomial":
            return len(self.exponents)
        if self.kind in ("gaussian_rbf", "wendland"):
            return len(self.center)
        return None

    def to_json(self) -> dict:
        params = {
            "monomial": lambda: {"exponents": list(self.exponents)},
            "gaussian_rbf": lambda: {"center": list(self.center), "width": self.width},
            "wendland": lambda: {"center": list(self.center),
                                 "support_radius": self.support_radius},
            "coordinate": lambda: {"index": self.index},
            "constant": lambda: {},
        }[self.kind]()
        return {"kind": self.kind, "params": params}


def wendland_c2(r):
    """C^2 Wendland function ``(1 - r)^4 (4 r + 1)`` on ``[0, 1]``, zero beyond."""
    r = np.asarray(r, dtype=float)
    t = np.clip(1.0 - r, 0.0, None)
    return np.where(r < 1.0, t ** 4 * (4.0 * r + 1.0), 0.0)


def _sq_dist(x, centers):
    return np.maximum(
        (x * x).sum(axis=1)[:, None] + (centers * centers).sum(axis=1)[None, :] - 2.0 * x @ centers.T,
        0.0,
    )


@dataclass(frozen=True)
class Dictionary:
    observables: tuple
    state_dim: int
    _groups: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        obs = tuple(self.observables)
        object.__setattr__(self, "observables", obs)
        if not obs:
            raise ValueError("a dictionary needs at least one observable")
        for o in obs:
            d = o.state_dim()
            if d is not None and d != self.state_dim:
                raise DimensionMismatch(f"observable {o} does not match state_dim={self.state_dim}")
            if o.kind == "coordinate" and not 0 <= o.index < self.state_dim:
                raise DimensionMismatch(f"coordinate index {o.index} out of range")
        object.__setattr__(self, "_groups", self._build_groups())

    def __len__(self):
        return len(self.observables)

    def _build_groups(self):
        groups = {}
        for j, o in enumerate(self.observables):
            groups.setdefault(o.kind, []).append(j)
        out = {}
        for kind, cols in groups.items():
            cols = np.asarray(cols)
            obs = [self.observables[j] for j in cols]
            if kind == "monomial":
                out[kind] = (cols, np.array([o.exponents for o in obs], dtype=int))
            elif kind == "gaussian_rbf":
                out[kind] = (cols, np.array([o.center for o in obs]), np.array([o.width for o in obs]))
            elif kind == "wendland":
                out[kind] = (cols, np.array([o.center for o in obs]),
                             np.array([o.support_radius for o in obs]))
            elif kind == "coordinate":
                out[kind] = (cols, np.array([o.index for o in obs], dtype=int))
            else:
                out[kind] = (cols,)
        return out

    def evaluate(self, x) -> np.ndarray:
        """Evaluate every observable on the rows of ``x``; returns ``(N, s0)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.state_dim:
            raise DimensionMismatch(f"expected {self.state_dim} state columns, got {x.shape[1]}")
        out = np.empty((x.shape[0], len(self)))
        for kind, g in self._groups.items():
            cols = g[0]
            if kind == "monomial":
                exps = g[1]
                vals = np.ones((x.shape[0], cols.size))
                for i in range(self.state_dim):
                    e = exps[:, i]
                    if np.any(e):
                        vals *= x[:, i:i + 1] ** e[None, :]
                out[:, cols] = vals
            elif kind == "gaussian_rbf":
                d2 = _sq_dist(x, g[1])
                out[:, cols] = np.exp(-d2 / (2.0 * g[2] ** 2))
            elif kind == "wendland":
                r = np.sqrt(_sq_dist(x, g[1])) / g[2]
                out[:, cols] = wendland_c2(r)
            elif kind == "coordinate":
                out[:, cols] = x[:, g[1]]
            else:
                out[:, cols] = 1.0
        return out

    def to_json(self) -> dict:
        return {"state_dim": self.state_dim, "observables": [o.to_json() for o in self.observables]}

    @classmethod
    def from_json(cls, doc: dict) -> "Dictionary":
        n = int(doc["state_dim"])
        obs = []
        for item in doc["observables"]:
            obs.extend(_expand(item, n))
        return cls(tuple(obs), n)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "Dictionary":
        return cls.from_json(json.loads(Path(path).read_text()))


def _grid(domain, spacing):
    axes = [np.arange(lo, hi + 0.5 * spacing, spacing) for lo, hi in domain]
    return np.array(list(itertools.product(*axes)))


def _expand(item: dict, n: int):
    kind = item["kind"]
    p = item.get("params", {})
    if kind == "monomial":
        return [Observable.monomial(p["exponents"])]
    if kind == "gaussian_rbf":
        return [Observable.gaussian(p["center"], p["width"])]
    if kind == "wendland":
        return [Observable.wendland(p["center"], p["support_radius"])]
    if kind == "coordinate":
        return [Observable.coordinate(p["index"])]
    if kind == "constant":
        return [Observable.constant()]
    # generators
    if kind == "monomials_upto":
        return list(monomials(n, p["max_degree"], include_constant=p.get("include_constant", True)))
    if kind == "gaussian_grid":
        return [Observable.gaussian(c, p["width"]) for c in _grid(p["domain"], p["spacing"])]
    if kind == "wendland_grid":
        return [Observable.wendland(c, p["support_radius"]) for c in _grid(p["domain"], p["spacing"])]
    raise ValueError(f"unknown dictionary entry kind {kind!r}")


def monomials(n: int, max_degree: int, include_constant: bool = True):
    """All monomials in ``n`` variables of total degree ``<= max_degree``, graded order."""
    start = 0 if include_constant else 1
    for deg in range(start, max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            exps = [0] * n
            for i in combo:
                exps[i] += 1
            yield Observable.monomial(exps)


def gaussian_grid(domain: Sequence, spacing: float, width: float):
    return [Observable.gaussian(c, width) for c in _grid(domain, spacing)]


def wendland_grid(domain: Sequence, spacing: float, support_radius: float):
    return [Observable.wendland(c, support_radius) for c in _grid(domain, spacing)]


def precondition(dictionary: Dictionary, x, rank_tol: float = 1e-10):
    """Well-conditioned basis of ``span(dictionary)`` under the empirical inner product.

    Column-pivoted QR picks the retained directions (pivots with
    ``|r_ii| >= rank_tol * |r_11|``); a second QR pass re-orthonormalizes so
    that ``(1/N) M^T M = I`` holds to working accuracy even when the
    retained block is ill conditioned.

    Returns
    -------
    basis_coeff : (s0, s) ndarray
        Coefficients of the orthonormal basis in raw-dictionary coordinates.
    retained_dim : int
    """
    if not rank_tol > 0:
        raise ValueError("rank_tol must be positive")
    psi = dictionary.evaluate(x) / np.sqrt(len(x))
    return precondition_matrix(psi, rank_tol)


def precondition_matrix(psi, rank_tol: float = 1e-10):
    """:func:`precondition` on an already evaluated, already scaled matrix."""
    s0 = psi.shape[1]
    _, r, piv = scipy.linalg.qr(psi, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        raise DegenerateData("dictionary evaluates to zero on the data")
    keep = int(np.sum(diag >= rank_tol * diag[0]))
    if keep == 0:
        raise DegenerateData("no pivot survives the rank tolerance")
    coeff = np.zeros((s0, keep))
    coeff[piv[:keep], :] = scipy.linalg.solve_triangular(r[:keep, :keep], np.eye(keep))
    for _ in range(2):
        qr = thin_qr(psi @ coeff, rank_tol=0.0)
        coeff = scipy.linalg.solve_triangular(qr.r, coeff.T, trans="T", lower=False).T
    return coeff, keep
