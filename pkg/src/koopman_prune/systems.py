"""Benchmark maps, snapshot generation and experiment configuration."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .dictionary import Dictionary, Observable, gaussian_grid, monomials
from .errors import DimensionMismatch, NegativeRadicand
from .pruning import PruneConfig

# ---------------------------------------------------------------------------
# maps


def step_benchmark2d(x):
    """``x1+ = 0.8 x1``, ``x2+ = sqrt(0.9 x2^2 + x1 + 0.1)``; rows are states."""
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    rad = 0.9 * x2 * x2 + x1 + 0.1
    if np.any(rad < 0):
        raise NegativeRadicand("0.9 x2^2 + x1 + 0.1 < 0 outside the valid domain")
    return np.stack([0.8 * x1, np.sqrt(rad)], axis=-1)


def step_van_der_pol(x, dt: float = 0.025):
    """Forward-Euler discretized Van der Pol oscillator."""
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([x1 + dt * x2, x2 + dt * ((1.0 - x1 * x1) * x2 - x1)], axis=-1)


# planted eigenpairs of the 2D benchmark map: (function, eigenvalue, monomial coefficients)
BENCHMARK2D_EIGENFUNCTIONS = (
    (lambda x: np.ones(len(x)), 1.0, {(0, 0): 1.0}),
    (lambda x: x[:, 0], 0.8, {(1, 0): 1.0}),
    (lambda x: x[:, 0] ** 2, 0.64, {(2, 0): 1.0}),
    (lambda x: 1.0 - 10.0 * x[:, 0] - x[:, 1] ** 2, 0.9, {(0, 0): 1.0, (1, 0): -10.0, (0, 2): -1.0}),
)

CUSTOM_MAPS: dict = {}


def register_map(name: str, fn: Callable):
    """Make ``fn`` available as ``SystemSpec(kind="custom", name=...)``."""
    CUSTOM_MAPS[name] = fn


@dataclass
class SystemSpec:
    kind: str = "benchmark2d"
    domain: tuple = ((0.0, 2.0), (0.0, 2.0))
    seed: int = 0
    dt: float = 0.025
    name: Optional[str] = None

    def __post_init__(self):
        self.domain = tuple(tuple(float(v) for v in b) for b in self.domain)
        if self.kind not in ("benchmark2d", "van_der_pol", "custom"):
            raise ValueError(f"unknown system kind {self.kind!r}")
        if self.kind == "van_der_pol" and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.kind == "custom" and self.name not in CUSTOM_MAPS:
            raise ValueError(f"no custom map registered as {self.name!r}")
        if not self.domain or any(not lo < hi for lo, hi in self.domain):
            raise ValueError("domain must be a non-empty box")

    @property
    def state_dim(self) -> int:
        return len(self.domain)

    def step(self, x):
        if self.kind == "benchmark2d":
            return step_benchmark2d(x)
        if self.kind == "van_der_pol":
            return step_van_der_pol(x, self.dt)
        return CUSTOM_MAPS[self.name](x)

    def trajectory(self, x0, steps: int) -> np.ndarray:
        """States ``x_0 .. x_steps`` as a ``(steps + 1, n)`` array."""
        out = np.empty((steps + 1, self.state_dim))
        out[0] = x0
        for t in range(steps):
            out[t + 1] = self.step(out[t])
        return out


@dataclass
class SnapshotSet:
    x: np.ndarray
    x_plus: np.ndarray

    def __post_init__(self):
        if self.x.shape != self.x_plus.shape:
            raise DimensionMismatch("x and x_plus must have the same shape")

    def __len__(self):
        return self.x.shape[0]

    @property
    def state_dim(self) -> int:
        return self.x.shape[1]


def rng_for(seed: int) -> np.random.Generator:
    """Counter-based Philox stream; identical draws on every platform."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


def generate_snapshots(system: SystemSpec, n_traj: int, traj_len: int) -> SnapshotSet:
    """Consecutive-state pairs along ``n_traj`` trajectories of ``traj_len`` steps.

    Initial conditions are uniform on ``system.domain``; row order is
    trajectory-major.
    """
    if n_traj < 1 or traj_len < 1:
        raise ValueError("n_traj and traj_len must be positive")
    lo = np.array([b[0] for b in system.domain])
    hi = np.array([b[1] for b in system.domain])
    x = lo + (hi - lo) * rng_for(system.seed).random((n_traj, system.state_dim))
    states = np.empty((traj_len + 1, n_traj, system.state_dim))
    states[0] = x
    for t in range(traj_len):
        states[t + 1] = system.step(states[t])
    xs = states[:-1].transpose(1, 0, 2).reshape(-1, system.state_dim)
    xp = states[1:].transpose(1, 0, 2).reshape(-1, system.state_dim)
    return SnapshotSet(xs, xp)


# ---------------------------------------------------------------------------
# dictionaries used by the experiments


def desk_dictionary(max_degree: int = 4, grid: int = 5, width: float = 0.7,
                    domain=((0.0, 2.0), (0.0, 2.0))) -> Dictionary:
    """Monomials up to ``max_degree`` plus a ``grid x grid`` Gaussian RBF layer."""
    obs = list(monomials(2, max_degree))
    (x0, x1), (y0, y1) = domain
    cx = np.linspace(x0, x1, grid)
    cy = np.linspace(y0, y1, grid)
    obs += [Observable.gaussian((a, b), width) for a in cx for b in cy]
    return Dictionary(tuple(obs), 2)


def planted_coefficients(dictionary: Dictionary) -> np.ndarray:
    """Raw-dictionary coefficients of the four planted eigenfunctions, ``(s0, 4)``."""
    index = {o.exponents: j for j, o in enumerate(dictionary.observables) if o.kind == "monomial"}
    out = np.zeros((len(dictionary), len(BENCHMARK2D_EIGENFUNCTIONS)))
    for col, (_, _, terms) in enumerate(BENCHMARK2D_EIGENFUNCTIONS):
        for exps, c in terms.items():
            out[index[exps], col] = c
    return out


def vdp_dictionary(spacing: float = 0.5, support_radius: float = 1.5,
                   domain=((-4.0, 4.0), (-4.0, 4.0))) -> Dictionary:
    from .dictionary import wendland_grid

    return Dictionary(tuple(wendland_grid(domain, spacing, support_radius)), 2)


# ---------------------------------------------------------------------------
# experiment config


@dataclass
class PredictionSpec:
    x0: tuple = (2.97, -3.76)
    horizon: int = 3000


@dataclass
class ExperimentConfig:
    system: SystemSpec = field(default_factory=SystemSpec)
    n_traj: int = 100
    traj_len: int = 50
    dictionary: Optional[dict] = None
    precondition_tol: float = 1e-10
    algorithm: str = "hybrid"
    prune: PruneConfig = field(default_factory=PruneConfig)
    prediction: PredictionSpec = field(default_factory=PredictionSpec)

    def __post_init__(self):
        if self.n_traj < 1 or self.traj_len < 1:
            raise ValueError("n_traj and traj_len must be positive")

    def build_dictionary(self) -> Dictionary:
        if self.dictionary is None:
            return desk_dictionary() if self.system.kind == "benchmark2d" else vdp_dictionary()
        return Dictionary.from_json(self.dictionary)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict, base: Path = Path(".")) -> "ExperimentConfig":
        doc = dict(doc)
        system = SystemSpec(**doc.pop("system", {}))
        prune = PruneConfig(**doc.pop("prune", {}))
        prediction = PredictionSpec(**doc.pop("prediction", {}))
        dictionary = doc.pop("dictionary", None)
        if isinstance(dictionary, str):
            path = base / dictionary
            if not path.exists():
                raise FileNotFoundError(f"dictionary file {path} does not exist")
            dictionary = json.loads(path.read_text())
        return cls(system=system, prune=prune, prediction=prediction, dictionary=dictionary, **doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_json(json.loads(path.read_text()), base=path.parent)


def generate_data(cfg: ExperimentConfig) -> SnapshotSet:
    return generate_snapshots(cfg.system, cfg.n_traj, cfg.traj_len)
