"""Four-mode linear cluster resource state and its nullifier diagnostics."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import optimize

from .gaussian_core import (
    VACUUM_VARIANCE,
    GaussianError,
    GaussianState,
    LinearForm,
    SymplecticTransform,
    apply,
    form_matrix,
    squeezed_vacuum_s,
    tensor_all,
    variance_of,
)
from .optics import NullifierConstraint, complete_passive_map, cz_matrix, phase_rotation_matrix

CLUSTER_MODES = ("C1", "C2", "C3", "C4")
CHAIN_EDGES = frozenset({("C1", "C2"), ("C2", "C3"), ("C3", "C4")})
IDEAL_S = 1e-10


class Construction(str, enum.Enum):
    EXPERIMENTAL = "experimental"
    CANONICAL = "canonical"


def s_from_db(db: float) -> float:
    return 10.0 ** (db / 10.0)


def s_from_r(r: float) -> float:
    return float(np.exp(-2.0 * r))


@dataclass(frozen=True)
class ClusterSpec:
    """Linear chain C1-C2-C3-C4 built from four p-squeezed sources.

    ``squeezing`` holds ``s_j = exp(-2 r_j)`` per source, i.e. each source's
    p variance relative to vacuum.
    """

    squeezing: tuple = (IDEAL_S,) * 4
    construction: Construction = Construction.EXPERIMENTAL
    edges: frozenset = CHAIN_EDGES

    def __post_init__(self):
        sq = self.squeezing
        if np.isscalar(sq):
            sq = (float(sq),) * 4
        sq = tuple(float(v) for v in sq)
        if len(sq) != 4 or not all(np.isfinite(v) and v > 0 for v in sq):
            raise GaussianError(f"need four positive finite squeezing factors, got {sq}")
        edges = frozenset(tuple(sorted(e)) for e in self.edges)
        if edges != CHAIN_EDGES:
            raise GaussianError("only the linear chain C1-C2-C3-C4 is supported")
        object.__setattr__(self, "squeezing", sq)
        object.__setattr__(self, "construction", Construction(self.construction))
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_db(cls, db, construction=Construction.EXPERIMENTAL) -> "ClusterSpec":
        dbs = (db,) * 4 if np.isscalar(db) else tuple(db)
        return cls(tuple(s_from_db(d) for d in dbs), construction)

    @classmethod
    def from_r(cls, r, construction=Construction.EXPERIMENTAL) -> "ClusterSpec":
        rs = (r,) * 4 if np.isscalar(r) else tuple(r)
        return cls(tuple(s_from_r(v) for v in rs), construction)

    def neighbours(self, mode: str) -> list[str]:
        return [b if a == mode else a for a, b in sorted(self.edges) if mode in (a, b)]


def nullifier_forms(spec: ClusterSpec | None = None) -> list[LinearForm]:
    """``delta_j = p_Cj - sum_{k in N_j} x_Ck`` for j = 1..4."""
    spec = spec or ClusterSpec()
    forms = []
    for mode in CLUSTER_MODES:
        coeffs = {(mode, "p"): 1.0}
        for k in spec.neighbours(mode):
            coeffs[(k, "x")] = -1.0
        forms.append(LinearForm(coeffs))
    return forms


_A = np.sqrt(5.0 / 2.0)  # 5/sqrt(10)
_B = 1.0 / np.sqrt(2.0)
_R2 = np.sqrt(2.0)

# Nullifier noise of the experimental network in units of exp(-r) p_j^(0);
# row j lists the weights of sources 1..4.
EXPERIMENTAL_SOURCE_WEIGHTS = np.array(
    [
        [_R2, 0.0, 0.0, 0.0],
        [0.0, 0.0, -_A, -_B],
        [_B, -_A, 0.0, 0.0],
        [0.0, 0.0, 0.0, -_R2],
    ]
)


def source_weights(construction: Construction) -> np.ndarray:
    if Construction(construction) is Construction.EXPERIMENTAL:
        return EXPERIMENTAL_SOURCE_WEIGHTS
    return np.eye(4)


def experimental_constraints() -> list[NullifierConstraint]:
    out = []
    for form, row in zip(nullifier_forms(), EXPERIMENTAL_SOURCE_WEIGHTS):
        src = LinearForm({(m, "p"): w for m, w in zip(CLUSTER_MODES, row) if w != 0.0})
        out.append(NullifierConstraint(form, src))
    return out


@lru_cache(maxsize=None)
def preparation_map(construction: Construction = Construction.EXPERIMENTAL) -> SymplecticTransform:
    """Symplectic map from the four p-squeezed sources to the cluster modes.

    Source j sits in the slot that becomes ``C{j}``.
    """
    construction = Construction(construction)
    if construction is Construction.EXPERIMENTAL:
        return complete_passive_map(experimental_constraints(), CLUSTER_MODES)
    total = SymplecticTransform.identity(CLUSTER_MODES)
    for a, b in sorted(CHAIN_EDGES):
        t = SymplecticTransform(CLUSTER_MODES, _embed(cz_matrix(), CLUSTER_MODES, (a, b)))
        total = total.then(t)
    return total


def _embed(block: np.ndarray, modes: Sequence, on: Sequence) -> np.ndarray:
    dim = 2 * len(modes)
    idx = []
    for m in on:
        p = list(modes).index(m)
        idx += [2 * p, 2 * p + 1]
    out = np.eye(dim)
    out[np.ix_(idx, idx)] = block
    return out


def source_state(spec: ClusterSpec) -> GaussianState:
    return tensor_all(squeezed_vacuum_s(m, s) for m, s in zip(CLUSTER_MODES, spec.squeezing))


def build_cluster(spec: ClusterSpec) -> GaussianState:
    return apply(source_state(spec), preparation_map(spec.construction))


def expected_nullifier_cov(spec: ClusterSpec) -> np.ndarray:
    """Nullifier covariance implied by the source weights alone."""
    w = source_weights(spec.construction)
    return w @ np.diag(np.asarray(spec.squeezing) * VACUUM_VARIANCE) @ w.T


def nullifier_cov(state: GaussianState, spec: ClusterSpec | None = None) -> np.ndarray:
    F = form_matrix(nullifier_forms(spec), state.modes)
    return F @ state.cov @ F.T


@dataclass(frozen=True)
class NullifierDiagnostics:
    variances: np.ndarray
    expected: np.ndarray
    excess: np.ndarray
    covariance: np.ndarray
    expected_covariance: np.ndarray


def diagnose(state: GaussianState, spec: ClusterSpec) -> NullifierDiagnostics:
    cov = nullifier_cov(state, spec)
    exp_cov = expected_nullifier_cov(spec)
    var = np.diag(cov).copy()
    exp_var = np.diag(exp_cov).copy()
    return NullifierDiagnostics(var, exp_var, var - exp_var, cov, exp_cov)


# -- EPR-pair reading of the chain ------------------------------------------------


@dataclass(frozen=True)
class EprEquivalence:
    angles: np.ndarray
    epr_variances: tuple[float, float]
    reference: tuple[float, float]

    @property
    def residual(self) -> float:
        return max(a - b for a, b in zip(self.epr_variances, self.reference))


def _epr_sum(state: GaussianState, a: str, b: str) -> float:
    return variance_of(state, LinearForm({(a, "x"): 1.0, (b, "x"): -1.0})) + variance_of(
        state, LinearForm({(a, "p"): 1.0, (b, "p"): 1.0})
    )


def epr_equivalence(state: GaussianState, spec: ClusterSpec, grid: int = 16) -> EprEquivalence:
    """Search local rotations exposing two EPR pairs once the C2-C3 link is undone.

    Returns the best ``Var(x_a - x_b) + Var(p_a + p_b)`` found for the pairs
    (C1, C2) and (C3, C4), together with the reference value given by the
    two-mode nullifiers of each pair. The search is a ``grid`` x ``grid`` scan
    per pair refined by Nelder-Mead.
    """
    inv_cz = np.linalg.inv(cz_matrix())
    unlinked = apply(state, SymplecticTransform(("C2", "C3"), inv_cz))
    dcov = nullifier_cov(state, spec)
    reference = (dcov[0, 0] + dcov[1, 1], dcov[2, 2] + dcov[3, 3])

    angles, values = [], []
    for a, b in (("C1", "C2"), ("C3", "C4")):

        def cost(th, a=a, b=b):
            s = apply(unlinked, phase_rotation_matrix(a, th[0]))
            s = apply(s, phase_rotation_matrix(b, th[1]))
            return _epr_sum(s, a, b)

        ts = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
        start = min(((t1, t2) for t1 in ts for t2 in ts), key=lambda th: cost(th))
        res = optimize.minimize(cost, start, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
        angles.extend(res.x)
        values.append(float(res.fun))
    return EprEquivalence(np.array(angles), tuple(values), tuple(float(v) for v in reference))
