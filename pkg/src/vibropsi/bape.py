"""Grid-Bayes belief state and entropy-minimizing stimulus selection.

The posterior lives on the full (a, b, gamma) lattice.  Each response
multiplies every cell's weight by its likelihood and renormalizes; the next
query separation is the candidate minimizing the one-step-ahead expected
posterior entropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .psymodel import CurveSamples, ParameterGrid

NORMALIZATION_TOL = 1e-9
UNDERFLOW_FLOOR = 1e-300


class DegeneratePosteriorError(RuntimeError):
    """Unnormalized posterior mass underflowed; the belief state is unusable."""


def default_candidates() -> np.ndarray:
    """The 18 query separations 2.5, 5.0, ..., 45.0 mm."""
    return np.linspace(2.5, 45.0, 18)


@dataclass(frozen=True)
class CandidateSet:
    """Ordered separations the adaptive procedure may query."""

    separations: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.separations, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("candidate set must be a nonempty 1-D sequence")
        if not np.all(np.diff(arr) > 0):
            raise ValueError("candidate separations must be strictly increasing")
        arr.setflags(write=False)
        object.__setattr__(self, "separations", arr)

    @classmethod
    def default(cls) -> "CandidateSet":
        return cls(default_candidates())

    def __len__(self):
        return int(self.separations.size)

    def index_of(self, x: float) -> int:
        idx = int(np.argmin(np.abs(self.separations - x)))
        if abs(self.separations[idx] - x) > 1e-9:
            raise ValueError(f"{x} is not a member of the candidate set")
        return idx


@dataclass(frozen=True)
class Posterior:
    """Normalized weight field over the parameter grid."""

    grid: ParameterGrid
    weights: np.ndarray  # shape grid.shape
    trial_count: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != self.grid.shape:
            raise ValueError(f"weights shape {w.shape} != grid shape {self.grid.shape}")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError("weights must sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, grid: ParameterGrid) -> "Posterior":
        w = np.full(grid.shape, 1.0 / grid.size)
        return cls(grid, w, 0)


class LikelihoodTable:
    """psi(cell, candidate) cached for every grid cell and query separation.

    Precomputed once per session so lookahead selection stays fast on the
    full 90,000-cell grid.
    """

    def __init__(self, grid: ParameterGrid, candidates: CandidateSet):
        self.grid = grid
        self.candidates = candidates
        k = len(candidates)
        self.psi = np.empty((k,) + grid.shape)
        for i, x in enumerate(candidates.separations):
            self.psi[i] = grid.psi_field(float(x))
        one_minus = 1.0 - self.psi
        with np.errstate(divide="ignore"):
            self.log_psi = np.log(self.psi)
            self.log_one_minus = np.where(
                one_minus > 0, np.log(np.where(one_minus > 0, one_minus, 1.0)), 0.0
            )
        self.psi.setflags(write=False)

    def likelihood(self, x: float, correct: bool) -> np.ndarray:
        idx = self.candidates.index_of(x)
        return self.psi[idx] if correct else 1.0 - self.psi[idx]


def _xlogx(w: np.ndarray) -> np.ndarray:
    """w * log(w) with the 0 * log 0 := 0 convention."""
    safe = np.where(w > 0, w, 1.0)
    return np.where(w > 0, w * np.log(safe), 0.0)


def update(posterior: Posterior, x: float, correct: bool,
           table: LikelihoodTable | None = None) -> Posterior:
    """Bayes step: reweight by the per-cell likelihood of the outcome."""
    if table is not None and table.grid is posterior.grid:
        try:
            like = table.likelihood(x, correct)
        except ValueError:
            like = None
    else:
        like = None
    if like is None:
        psi = posterior.grid.psi_field(x)
        like = psi if correct else 1.0 - psi
    unnorm = posterior.weights * like
    mass = unnorm.sum()
    if mass < UNDERFLOW_FLOOR:
        raise DegeneratePosteriorError(
            f"posterior mass underflowed ({mass!r}) after outcome at x={x}"
        )
    return Posterior(posterior.grid, unnorm / mass, posterior.trial_count + 1)


def entropy(posterior: Posterior) -> float:
    """Shannon entropy of the weight field, in nats."""
    return float(-_xlogx(posterior.weights).sum())


def predict_correct(posterior: Posterior, x: float,
                    table: LikelihoodTable | None = None) -> float:
    """Posterior predictive probability of a correct response at ``x``."""
    if table is not None and table.grid is posterior.grid:
        try:
            psi = table.likelihood(x, True)
        except ValueError:
            psi = posterior.grid.psi_field(x)
    else:
        psi = posterior.grid.psi_field(x)
    return float((posterior.weights * psi).sum())


def expected_entropies(posterior: Posterior, candidates: CandidateSet,
                       table: LikelihoodTable | None = None) -> np.ndarray:
    """One-step-ahead expected posterior entropy for every candidate."""
    if table is None or table.grid is not posterior.grid \
            or table.candidates is not candidates:
        table = LikelihoodTable(posterior.grid, candidates)
    w = posterior.weights
    wlogw = _xlogx(w)
    out = np.empty(len(candidates))
    for i in range(len(candidates)):
        psi = table.psi[i]
        u = w * psi  # unnormalized posterior after a correct response
        s_c = u.sum()
        v = w - u  # after an incorrect response
        s_i = v.sum()
        # sum u*log(u) = sum psi*(w log w) + sum u*log(psi); entropy of the
        # normalized branch is log(s) - sum(u log u)/s
        t_c = (psi * wlogw).sum() + (u * table.log_psi[i]).sum()
        t_i = ((1.0 - psi) * wlogw).sum() + (v * table.log_one_minus[i]).sum()
        h_c = math.log(s_c) - t_c / s_c if s_c > 0 else 0.0
        h_i = math.log(s_i) - t_i / s_i if s_i > 0 else 0.0
        out[i] = s_c * h_c + s_i * h_i
    return out


#: expected entropies this close count as tied; well above the ~1e-16
#: rounding noise of the summation and far below any real gap
SELECTION_TIE_TOL = 1e-12


def select_next(posterior: Posterior, candidates: CandidateSet,
                table: LikelihoodTable | None = None) -> float:
    """Candidate separation minimizing expected entropy; ties go small."""
    eh = expected_entropies(posterior, candidates, table)
    tied = np.flatnonzero(eh <= eh.min() + SELECTION_TIE_TOL)
    return float(candidates.separations[int(tied[0])])


def postmean_curve(posterior: Posterior, x_grid) -> CurveSamples:
    """Posterior-weighted pointwise mean curve on ``x_grid``."""
    xs = np.asarray(x_grid, dtype=float)
    w = posterior.weights
    y = np.empty(xs.size)
    for i, x in enumerate(xs):
        y[i] = (w * posterior.grid.psi_field(float(x))).sum()
    return CurveSamples(xs, y)


def expected_params(posterior: Posterior) -> dict:
    """Posterior expectations of threshold, slope and guess rate."""
    w = posterior.weights
    g = posterior.grid
    return {
        "a": float((w.sum(axis=(1, 2)) * g.a_values).sum()),
        "b": float((w.sum(axis=(0, 2)) * g.b_values).sum()),
        "gamma": float((w.sum(axis=(0, 1)) * g.gamma_values).sum()),
    }


def marginals(posterior: Posterior) -> dict:
    """Marginal distributions over each grid axis."""
    w = posterior.weights
    g = posterior.grid
    return {
        "a": {"values": g.a_values.tolist(), "probs": w.sum(axis=(1, 2)).tolist()},
        "b": {"values": g.b_values.tolist(), "probs": w.sum(axis=(0, 2)).tolist()},
        "gamma": {"values": g.gamma_values.tolist(), "probs": w.sum(axis=(0, 1)).tolist()},
    }
