"""Optical element transforms and passive-network synthesis from nullifier rows.

Beamsplitter convention (same matrix on x and p)::

    x_A' =  sqrt(T) x_A + sqrt(1-T) x_B
    x_B' =  sqrt(1-T) x_A - sqrt(T) x_B

A passive (orthogonal symplectic) map on n modes is handled through its
complex unitary ``U`` acting on ``a = x + i p``; its real interleaved matrix
has per-mode blocks ``((Re U, -Im U), (Im U, Re U))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .gaussian_core import (
    GaussianError,
    LinearForm,
    ModeLabel,
    Quadrature,
    SymplecticTransform,
    lift,
)

COMPLETION_TOL = 1e-10
RESIDUAL_TOL = 1e-9


class InfeasibleConstraints(GaussianError):
    """No passive network reproduces the requested nullifier rows."""


@dataclass(frozen=True)
class Beamsplitter:
    mode_a: int
    mode_b: int
    transmittance: float

    def __post_init__(self):
        if not (0.0 < self.transmittance < 1.0):
            raise GaussianError(f"transmittance must lie in (0, 1), got {self.transmittance}")
        if self.mode_a == self.mode_b:
            raise GaussianError("beamsplitter needs two distinct modes")


@dataclass(frozen=True)
class PhaseRotation:
    mode: int
    theta: float


@dataclass(frozen=True)
class Squeezer:
    mode: int
    r: float


@dataclass(frozen=True)
class Displacement:
    mode: int
    dx: float
    dp: float


ElementSpec = Union[Beamsplitter, PhaseRotation, Squeezer, Displacement]


@dataclass(frozen=True)
class NullifierConstraint:
    """A nullifier on the output modes expressed through the source quadratures.

    ``source_expression`` is a form over the source modes; a valid constraint
    only weights squeezed quadratures (p of each p-squeezed source), with the
    common factor ``exp(-r)`` left implicit.
    """

    nullifier_form: LinearForm
    source_expression: LinearForm


# -- element matrices -------------------------------------------------------------


def passive_from_unitary(u: np.ndarray) -> np.ndarray:
    """Real interleaved symplectic matrix for the unitary ``u``."""
    u = np.asarray(u, dtype=complex)
    n = u.shape[0]
    m = np.zeros((2 * n, 2 * n))
    m[0::2, 0::2] = u.real
    m[0::2, 1::2] = -u.imag
    m[1::2, 0::2] = u.imag
    m[1::2, 1::2] = u.real
    return m


def unitary_from_passive(m: np.ndarray) -> np.ndarray:
    return m[0::2, 0::2] + 1j * m[1::2, 0::2]


def beamsplitter_matrix(mode_a: ModeLabel, mode_b: ModeLabel, transmittance: float) -> SymplecticTransform:
    if mode_a == mode_b:
        raise GaussianError("beamsplitter needs two distinct modes")
    if not (0.0 < transmittance < 1.0):
        raise GaussianError(f"transmittance must lie in (0, 1), got {transmittance}")
    t, r = np.sqrt(transmittance), np.sqrt(1.0 - transmittance)
    u = np.array([[t, r], [r, -t]])
    return SymplecticTransform((mode_a, mode_b), passive_from_unitary(u))


def phase_rotation_matrix(mode: ModeLabel, theta: float) -> SymplecticTransform:
    c, s = np.cos(theta), np.sin(theta)
    return SymplecticTransform((mode,), np.array([[c, -s], [s, c]]))


def squeezer_matrix(mode: ModeLabel, r: float) -> SymplecticTransform:
    """x -> e^r x, p -> e^-r p (p-squeezing for r > 0)."""
    return SymplecticTransform((mode,), np.diag([np.exp(r), np.exp(-r)]))


def cz_matrix(weight: float = 1.0) -> np.ndarray:
    """Controlled-phase block ``((I, S), (S, I))`` with ``S = ((0, 0), (weight, 0))``.

    Acting on ``(x_j, p_j, x_k, p_k)``: ``p_j += weight x_k`` and ``p_k += weight x_j``.
    """
    m = np.eye(4)
    m[1, 2] = weight
    m[3, 0] = weight
    return m


def displacement_transform(mode: ModeLabel, dx: float, dp: float) -> SymplecticTransform:
    return SymplecticTransform.displacement_only((mode,), np.array([dx, dp]))


def element_transform(element: ElementSpec) -> SymplecticTransform:
    if isinstance(element, Beamsplitter):
        return beamsplitter_matrix(element.mode_a, element.mode_b, element.transmittance)
    if isinstance(element, PhaseRotation):
        return phase_rotation_matrix(element.mode, element.theta)
    if isinstance(element, Squeezer):
        return squeezer_matrix(element.mode, element.r)
    if isinstance(element, Displacement):
        return displacement_transform(element.mode, element.dx, element.dp)
    raise TypeError(f"unknown optical element {element!r}")


def compose(elements: Sequence[ElementSpec], n_modes: int) -> SymplecticTransform:
    """Product of ``elements`` applied left to right, on modes ``0..n_modes-1``."""
    modes = tuple(range(n_modes))
    total = SymplecticTransform.identity(modes)
    for el in elements:
        t = element_transform(el)
        bad = [m for m in t.modes if not (isinstance(m, (int, np.integer)) and 0 <= m < n_modes)]
        if bad:
            raise GaussianError(f"element {el!r} references modes {bad} outside 0..{n_modes - 1}")
        matrix, disp = lift(t, modes)
        total = total.then(SymplecticTransform(modes, matrix, disp, check=False))
    return total


# -- synthesis from nullifier rows --------------------------------------------------


def _complex_rows(forms: Sequence[LinearForm], modes: Sequence[ModeLabel]) -> np.ndarray:
    vecs = np.array([f.vector(modes) for f in forms]).reshape(len(forms), 2 * len(modes))
    return (vecs[:, 0::2] + 1j * vecs[:, 1::2]).T


def complete_passive_map(
    constraints: Sequence[NullifierConstraint],
    modes: Sequence[ModeLabel],
    sources: Sequence[ModeLabel] | None = None,
) -> SymplecticTransform:
    """Passive map ``M`` with ``xi_out = M xi_src`` honouring every nullifier row.

    Source ``sources[j]`` feeds the slot of output ``modes[j]``. Each
    nullifier form ``c`` must satisfy ``M^T c = s`` for its source expression
    ``s``. Because ``M`` is orthogonal this reads ``M s = c``, i.e. a unitary
    sending the complex source rows onto the complex nullifier rows; the
    unitary Procrustes solution is exact whenever the Hermitian Gram matrices
    agree and is then verified explicitly.
    """
    modes = tuple(modes)
    sources = modes if sources is None else tuple(sources)
    if len(sources) != len(modes):
        raise GaussianError("need exactly one source per output mode")
    constraints = list(constraints)
    if not constraints:
        return SymplecticTransform.identity(modes)

    for k, c in enumerate(constraints):
        anti = [m for (m, q), v in c.source_expression.coeffs.items() if q is Quadrature.X and v != 0.0]
        if anti:
            raise InfeasibleConstraints(
                f"constraint {k} weights antisqueezed quadratures of sources {anti!r}"
            )

    sigma = _complex_rows([c.source_expression for c in constraints], sources)
    gamma = _complex_rows([c.nullifier_form for c in constraints], modes)

    gram_s = sigma.conj().T @ sigma
    gram_c = gamma.conj().T @ gamma
    scale = max(1.0, float(np.max(np.abs(gram_c))))
    if np.max(np.abs(gram_s - gram_c)) > RESIDUAL_TOL * scale:
        raise InfeasibleConstraints(
            "nullifier rows and source rows have different inner products or commutators; "
            "no passive network can map one set onto the other"
        )

    w, _, vh = np.linalg.svd(gamma @ sigma.conj().T)
    u = w @ vh
    residual = float(np.max(np.abs(u @ sigma - gamma)))
    if residual > COMPLETION_TOL * scale:
        raise InfeasibleConstraints(f"passive completion residual {residual:.3e} exceeds tolerance")

    t = SymplecticTransform(modes, passive_from_unitary(u))
    report = verify_nullifier_map(t, constraints, sources)
    if report.max_residual > RESIDUAL_TOL:
        raise InfeasibleConstraints(f"verification residual {report.max_residual:.3e}")
    return t


@dataclass(frozen=True)
class NullifierResidual:
    squeezed: float
    antisqueezed: float


@dataclass(frozen=True)
class NullifierMapReport:
    residuals: tuple[NullifierResidual, ...]

    @property
    def max_residual(self) -> float:
        return max((max(r.squeezed, r.antisqueezed) for r in self.residuals), default=0.0)


def verify_nullifier_map(
    t: SymplecticTransform,
    constraints: Sequence[NullifierConstraint],
    sources: Sequence[ModeLabel] | None = None,
) -> NullifierMapReport:
    """Residuals of ``M^T c - s`` split into squeezed (p) and antisqueezed (x) columns."""
    sources = t.modes if sources is None else tuple(sources)
    out = []
    for c in constraints:
        pulled = t.matrix.T @ c.nullifier_form.vector(t.modes)
        diff = pulled - c.source_expression.vector(sources)
        out.append(
            NullifierResidual(
                squeezed=float(np.max(np.abs(diff[1::2]))),
                antisqueezed=float(np.max(np.abs(diff[0::2]))),
            )
        )
    return NullifierMapReport(tuple(out))


def is_orthogonal(matrix: np.ndarray, tol: float = 1e-9) -> bool:
    matrix = np.asarray(matrix)
    return bool(np.max(np.abs(matrix @ matrix.T - np.eye(matrix.shape[0]))) <= tol)
