"""Phase-space representation of multimode Gaussian states.

Conventions used throughout the package:

* ``[x, p] = i/2`` so the vacuum variance of either quadrature is 1/4.
* Quadratures are interleaved per mode: ``(x_1, p_1, x_2, p_2, ...)``.
* The symplectic form is block diagonal with blocks ``((0, 1), (-1, 0))``.

All objects are immutable; every operation returns a new value.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

VACUUM_VARIANCE = 0.25

SYMMETRY_TOL = 1e-9
UNCERTAINTY_TOL = 1e-9
SYMPLECTIC_TOL = 1e-9
COMMUTATION_TOL = 1e-9
DEGENERACY_TOL = 1e-12

ModeLabel = Hashable


class GaussianError(ValueError):
    """Raised for invalid Gaussian states, transforms or measurements."""


class Quadrature(str, enum.Enum):
    X = "x"
    P = "p"

    @property
    def offset(self) -> int:
        return 0 if self is Quadrature.X else 1


def omega(n_modes: int) -> np.ndarray:
    """Symplectic form for ``n_modes`` modes in interleaved ordering."""
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.kron(np.eye(n_modes), block)


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


def _check_labels(modes: Sequence[ModeLabel]) -> tuple:
    modes = tuple(modes)
    if len(set(modes)) != len(modes):
        raise GaussianError(f"duplicate mode labels in {modes!r}")
    return modes


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and covariance matrix over an ordered set of labelled modes."""

    modes: tuple
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        modes = _check_labels(self.modes)
        if not modes:
            raise GaussianError("a Gaussian state needs at least one mode")
        mean = _frozen(self.mean)
        cov = _frozen(self.cov)
        dim = 2 * len(modes)
        if mean.shape != (dim,):
            raise GaussianError(f"mean has shape {mean.shape}, expected ({dim},)")
        if cov.shape != (dim, dim):
            raise GaussianError(f"cov has shape {cov.shape}, expected ({dim}, {dim})")
        if not np.all(np.isfinite(cov)) or not np.all(np.isfinite(mean)):
            raise GaussianError("state contains non-finite entries")
        if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(cov))):
            raise GaussianError("covariance matrix is not symmetric")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def index(self, mode: ModeLabel, quadrature: Quadrature | str = Quadrature.X) -> int:
        """Position of ``(mode, quadrature)`` in the interleaved vector."""
        try:
            pos = self.modes.index(mode)
        except ValueError:
            raise GaussianError(f"unknown mode {mode!r}; state has {self.modes!r}") from None
        return 2 * pos + Quadrature(quadrature).offset

    def mode_indices(self, modes: Iterable[ModeLabel]) -> list[int]:
        idx = []
        for m in modes:
            i = self.index(m)
            idx.extend([i, i + 1])
        return idx

    def relabel(self, mapping: Mapping[ModeLabel, ModeLabel]) -> "GaussianState":
        return GaussianState(tuple(mapping.get(m, m) for m in self.modes), self.mean, self.cov)

    def reorder(self, modes: Sequence[ModeLabel]) -> "GaussianState":
        if set(modes) != set(self.modes) or len(modes) != len(self.modes):
            raise GaussianError(f"{modes!r} is not a permutation of {self.modes!r}")
        idx = self.mode_indices(modes)
        return GaussianState(tuple(modes), self.mean[idx], self.cov[np.ix_(idx, idx)])


@dataclass(frozen=True)
class SymplecticTransform:
    """Affine phase-space map ``xi -> matrix @ xi + displacement`` on ``modes``.

    When applied to a larger state, the map acts on the listed modes and as the
    identity elsewhere.
    """

    modes: tuple
    matrix: np.ndarray
    displacement: np.ndarray = None
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        modes = _check_labels(self.modes)
        dim = 2 * len(modes)
        matrix = _frozen(self.matrix)
        disp = np.zeros(dim) if self.displacement is None else self.displacement
        disp = _frozen(disp)
        if matrix.shape != (dim, dim) or disp.shape != (dim,):
            raise GaussianError(
                f"transform on {len(modes)} modes needs a {dim}x{dim} matrix and a "
                f"length-{dim} displacement"
            )
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "displacement", disp)
        if self.check and symplectic_error(matrix) > SYMPLECTIC_TOL:
            raise GaussianError("matrix is not symplectic")

    @classmethod
    def identity(cls, modes: Sequence[ModeLabel]) -> "SymplecticTransform":
        return cls(tuple(modes), np.eye(2 * len(modes)))

    @classmethod
    def displacement_only(cls, modes, displacement) -> "SymplecticTransform":
        return cls(tuple(modes), np.eye(2 * len(modes)), displacement)

    def then(self, other: "SymplecticTransform") -> "SymplecticTransform":
        """Composite map: first ``self``, then ``other`` (same mode list)."""
        if other.modes != self.modes:
            raise GaussianError("composed transforms must act on the same modes")
        return SymplecticTransform(
            self.modes,
            other.matrix @ self.matrix,
            other.matrix @ self.displacement + other.displacement,
        )


def symplectic_error(matrix: np.ndarray) -> float:
    """Max-abs deviation of ``M Omega M^T`` from ``Omega``."""
    matrix = np.asarray(matrix, dtype=float)
    om = omega(matrix.shape[0] // 2)
    return float(np.max(np.abs(matrix @ om @ matrix.T - om)))


@dataclass(frozen=True)
class LinearForm:
    """Real linear combination of quadratures plus a constant offset.

    ``coeffs`` maps ``(mode, quadrature)`` pairs to coefficients, e.g.
    ``{("mu", "p"): 0.75, ("nu", "x"): -1.0}``.
    """

    coeffs: Mapping
    offset: float = 0.0

    def __post_init__(self):
        clean = {}
        for key, value in dict(self.coeffs).items():
            mode, quad = key
            k = (mode, Quadrature(quad))
            clean[k] = clean.get(k, 0.0) + float(value)
        if not any(v != 0.0 for v in clean.values()):
            raise GaussianError("a linear form needs at least one nonzero coefficient")
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def quadrature(cls, mode: ModeLabel, quad: Quadrature | str, coeff: float = 1.0) -> "LinearForm":
        return cls({(mode, quad): coeff})

    @property
    def modes(self) -> set:
        return {m for m, _ in self.coeffs}

    def vector(self, modes: Sequence[ModeLabel]) -> np.ndarray:
        """Dense coefficient vector in the interleaved ordering of ``modes``."""
        modes = tuple(modes)
        out = np.zeros(2 * len(modes))
        for (mode, quad), c in self.coeffs.items():
            try:
                pos = modes.index(mode)
            except ValueError:
                raise GaussianError(f"form references mode {mode!r} not in {modes!r}") from None
            out[2 * pos + quad.offset] += c
        return out

    def __add__(self, other: "LinearForm") -> "LinearForm":
        merged = dict(self.coeffs)
        for k, v in other.coeffs.items():
            merged[k] = merged.get(k, 0.0) + v
        return LinearForm(merged, self.offset + other.offset)

    def __neg__(self) -> "LinearForm":
        return LinearForm({k: -v for k, v in self.coeffs.items()}, -self.offset)

    def __sub__(self, other: "LinearForm") -> "LinearForm":
        return self + (-other)

    def __rmul__(self, scalar: float) -> "LinearForm":
        return LinearForm({k: scalar * v for k, v in self.coeffs.items()}, scalar * self.offset)


def commutator_form(f: LinearForm, g: LinearForm, modes: Sequence[ModeLabel]) -> float:
    """Symplectic product ``f^T Omega g``; zero iff the observables commute."""
    a, b = f.vector(modes), g.vector(modes)
    return float(a @ omega(len(modes)) @ b)


# -- state constructors -----------------------------------------------------------


def vacuum(modes: Sequence[ModeLabel]) -> GaussianState:
    modes = tuple(modes)
    if not modes:
        raise GaussianError("vacuum() needs at least one mode")
    dim = 2 * len(modes)
    return GaussianState(modes, np.zeros(dim), VACUUM_VARIANCE * np.eye(dim))


def coherent(mode: ModeLabel, mean_x: float, mean_p: float) -> GaussianState:
    if not (np.isfinite(mean_x) and np.isfinite(mean_p)):
        raise GaussianError("coherent amplitudes must be finite")
    return GaussianState((mode,), np.array([mean_x, mean_p]), VACUUM_VARIANCE * np.eye(2))


def squeezed_vacuum(mode: ModeLabel, r: float) -> GaussianState:
    """Squeezed vacuum; ``r > 0`` squeezes the p quadrature."""
    if not np.isfinite(r):
        raise GaussianError("squeezing parameter must be finite")
    cov = np.diag([np.exp(2 * r), np.exp(-2 * r)]) * VACUUM_VARIANCE
    return GaussianState((mode,), np.zeros(2), cov)


def squeezed_vacuum_s(mode: ModeLabel, s: float) -> GaussianState:
    """p-squeezed vacuum parameterised by ``s = exp(-2r)`` (so Var(p) = s/4)."""
    if not (s > 0 and np.isfinite(s)):
        raise GaussianError(f"squeezing factor must be positive and finite, got {s}")
    return GaussianState((mode,), np.zeros(2), np.diag([1.0 / s, s]) * VACUUM_VARIANCE)


def tensor(a: GaussianState, b: GaussianState) -> GaussianState:
    clash = set(a.modes) & set(b.modes)
    if clash:
        raise GaussianError(f"mode labels collide: {sorted(map(str, clash))}")
    da, db = 2 * a.n_modes, 2 * b.n_modes
    cov = np.zeros((da + db, da + db))
    cov[:da, :da] = a.cov
    cov[da:, da:] = b.cov
    return GaussianState(a.modes + b.modes, np.concatenate([a.mean, b.mean]), cov)


def tensor_all(states: Iterable[GaussianState]) -> GaussianState:
    states = list(states)
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


# -- evolution ------------------------------------------------------------------


def lift(t: SymplecticTransform, modes: Sequence[ModeLabel]) -> tuple[np.ndarray, np.ndarray]:
    """Embed ``t`` into the full phase space of ``modes`` (identity elsewhere)."""
    modes = tuple(modes)
    missing = [m for m in t.modes if m not in modes]
    if missing:
        raise GaussianError(f"transform acts on modes {missing!r} absent from the state")
    dim = 2 * len(modes)
    idx = []
    for m in t.modes:
        pos = modes.index(m)
        idx.extend([2 * pos, 2 * pos + 1])
    matrix = np.eye(dim)
    matrix[np.ix_(idx, idx)] = t.matrix
    disp = np.zeros(dim)
    disp[idx] = t.displacement
    return matrix, disp


def apply(state: GaussianState, t: SymplecticTransform) -> GaussianState:
    matrix, disp = lift(t, state.modes)
    return GaussianState(state.modes, matrix @ state.mean + disp, matrix @ state.cov @ matrix.T)


def loss_channel(state: GaussianState, mode: ModeLabel, eta: float) -> GaussianState:
    """Pure-loss channel of efficiency ``eta`` on one mode."""
    if not (0.0 <= eta <= 1.0):
        raise GaussianError(f"loss efficiency must lie in [0, 1], got {eta}")
    i = state.index(mode)
    scale = np.ones(2 * state.n_modes)
    scale[i : i + 2] = np.sqrt(eta)
    cov = state.cov * np.outer(scale, scale)
    cov[i : i + 2, i : i + 2] += (1.0 - eta) * VACUUM_VARIANCE * np.eye(2)
    return GaussianState(state.modes, state.mean * scale, cov)


# -- observables ----------------------------------------------------------------


def variance_of(state: GaussianState, f: LinearForm) -> float:
    c = f.vector(state.modes)
    return float(c @ state.cov @ c)


def mean_of(state: GaussianState, f: LinearForm) -> float:
    c = f.vector(state.modes)
    return float(c @ state.mean + f.offset)


def covariance_of(state: GaussianState, f: LinearForm, g: LinearForm) -> float:
    return float(f.vector(state.modes) @ state.cov @ g.vector(state.modes))


def form_matrix(forms: Sequence[LinearForm], modes: Sequence[ModeLabel]) -> np.ndarray:
    return np.array([f.vector(modes) for f in forms]).reshape(len(forms), 2 * len(tuple(modes)))


def condition_on_forms(
    state: GaussianState, forms: Sequence[LinearForm], outcomes: Sequence[float]
) -> GaussianState:
    """Gaussian update after jointly measuring commuting linear forms.

    Measured modes stay in the returned state in their collapsed form; use
    :func:`partial_trace` to discard them. Form offsets shift the reported
    outcome, i.e. the measured value is ``c^T xi + offset``.
    """
    forms = list(forms)
    outcomes = np.asarray(outcomes, dtype=float)
    if len(forms) == 0:
        return state
    if outcomes.shape != (len(forms),):
        raise GaussianError(f"{len(forms)} forms but {outcomes.size} outcomes")
    F = form_matrix(forms, state.modes)
    om = omega(state.n_modes)
    comm = F @ om @ F.T
    if np.max(np.abs(comm)) > COMMUTATION_TOL:
        raise GaussianError("measured forms do not commute")
    V = F @ state.cov @ F.T
    if np.min(np.diag(V)) <= DEGENERACY_TOL:
        raise GaussianError("a measured form has (near) zero variance")
    w = np.linalg.eigvalsh(V)
    if w[0] <= DEGENERACY_TOL * max(1.0, w[-1]):
        raise GaussianError("measured forms are linearly dependent on this state")
    gain = np.linalg.solve(V, F @ state.cov).T  # cov F^T V^-1
    offsets = np.array([f.offset for f in forms])
    innovation = outcomes - (F @ state.mean + offsets)
    mean = state.mean + gain @ innovation
    cov = state.cov - gain @ F @ state.cov
    cov = 0.5 * (cov + cov.T)
    return GaussianState(state.modes, mean, cov)


def partial_trace(state: GaussianState, drop: Iterable[ModeLabel]) -> GaussianState:
    drop = list(drop)
    for m in drop:
        state.index(m)
    keep = [m for m in state.modes if m not in drop]
    if not keep:
        raise GaussianError("cannot trace out every mode")
    idx = state.mode_indices(keep)
    return GaussianState(tuple(keep), state.mean[idx], state.cov[np.ix_(idx, idx)])


def check_uncertainty(state: GaussianState, tol: float = UNCERTAINTY_TOL) -> bool:
    """True iff ``cov + (i/4) Omega`` is positive semidefinite within ``tol``.

    ``tol`` is relative to ``max(1, largest covariance eigenvalue)``: rounding in
    a strongly antisqueezed covariance scales with its norm.
    """
    herm = state.cov + 0.25j * omega(state.n_modes)
    w = np.linalg.eigvalsh(herm)
    scale = max(1.0, float(np.max(np.abs(np.linalg.eigvalsh(state.cov)))))
    return bool(w[0] >= -tol * scale)


def purity_det(state: GaussianState) -> float:
    """``det(4 cov)``; equals 1 exactly for pure states."""
    return float(np.linalg.det(4.0 * state.cov))
