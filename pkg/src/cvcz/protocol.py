"""Measurement-based controlled-phase gate on a four-mode linear cluster.

The inputs ``alpha`` and ``beta`` are coupled to cluster modes C1 and C4 by
Bell measurements; displacements on C2 and C3 conditioned on the four
outcomes complete the gate, and C2, C3 are relabelled ``mu`` and ``nu``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .gaussian_core import (
    GaussianError,
    GaussianState,
    LinearForm,
    ModeLabel,
    SymplecticTransform,
    apply,
    condition_on_forms,
    form_matrix,
    partial_trace,
    tensor,
)
from .optics import cz_matrix

INPUT_MODES = ("alpha", "beta")
OUTPUT_MODES = ("mu", "nu")
MEASURED_CLUSTER_MODES = ("C1", "C4")
OUTPUT_RELABEL = {"C2": "mu", "C3": "nu"}

# Noise routing onto (x_mu, p_mu, x_nu, p_nu) from (delta_1, .., delta_4).
NOISE_ROUTING = np.array(
    [
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, -1.0],
        [0.0, 0.0, 0.0, -1.0],
        [-1.0, 0.0, 1.0, 0.0],
    ]
)


@dataclass(frozen=True)
class BellOutcomes:
    t_alpha: float
    t_1: float
    t_beta: float
    t_4: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise GaussianError("Bell outcomes must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.t_alpha, self.t_1, self.t_beta, self.t_4], dtype=float)

    def __add__(self, other: "BellOutcomes") -> "BellOutcomes":
        return BellOutcomes(*(self.as_array() + other.as_array()))


@dataclass(frozen=True)
class Average:
    """Outcome-averaged output: the ensemble over all Bell outcomes."""


@dataclass(frozen=True)
class Fixed:
    """Post-measurement output for one given set of Bell outcomes."""

    outcomes: BellOutcomes


@dataclass(frozen=True)
class Sample:
    """Draw the Bell outcomes from their joint distribution, then as :class:`Fixed`."""

    seed: int


OutcomePolicy = Union[Average, Fixed, Sample]


@dataclass(frozen=True)
class GateRunResult:
    output_state: GaussianState
    outcomes: BellOutcomes | None
    input_means: np.ndarray


def ideal_cz(state: GaussianState, mode_j: ModeLabel, mode_k: ModeLabel) -> GaussianState:
    if mode_j == mode_k:
        raise GaussianError("controlled-phase needs two distinct modes")
    return apply(state, SymplecticTransform((mode_j, mode_k), cz_matrix()))


def bell_forms(input_mode: ModeLabel, cluster_mode: ModeLabel) -> tuple[LinearForm, LinearForm]:
    """``(p_in - x_cl, x_in - p_cl)``; the pair commutes."""
    return (
        LinearForm({(input_mode, "p"): 1.0, (cluster_mode, "x"): -1.0}),
        LinearForm({(input_mode, "x"): 1.0, (cluster_mode, "p"): -1.0}),
    )


def all_bell_forms() -> list[LinearForm]:
    """Forms giving ``(t_alpha, t_1, t_beta, t_4)`` in that order."""
    fa, f1 = bell_forms("alpha", "C1")
    fb, f4 = bell_forms("beta", "C4")
    return [fa, f1, fb, f4]


# Rows: (x_C2, p_C2, x_C3, p_C3); columns: (t_alpha, t_1, t_beta, t_4).
FEEDFORWARD_GAIN = np.array(
    [
        [0.0, 1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 1.0, 1.0, 0.0],
    ]
)


def feedforward_transform(outcomes: BellOutcomes) -> SymplecticTransform:
    """X_C2(t_1) Z_C2(t_alpha + t_4) X_C3(t_4) Z_C3(t_beta + t_1) as a displacement."""
    return SymplecticTransform.displacement_only(("C2", "C3"), FEEDFORWARD_GAIN @ outcomes.as_array())


def _check_inputs(inp: GaussianState, cluster: GaussianState) -> None:
    if set(inp.modes) != set(INPUT_MODES):
        raise GaussianError(f"input state must be over {INPUT_MODES}, got {inp.modes}")
    if set(cluster.modes) != {"C1", "C2", "C3", "C4"}:
        raise GaussianError(f"cluster must be over C1..C4, got {cluster.modes}")


def _finish(state: GaussianState) -> GaussianState:
    out = partial_trace(state, INPUT_MODES + MEASURED_CLUSTER_MODES)
    return out.relabel(OUTPUT_RELABEL).reorder(OUTPUT_MODES)


def run_gate(
    inp: GaussianState,
    cluster: GaussianState,
    policy: OutcomePolicy = Average(),
) -> GateRunResult:
    """Couple ``inp`` to ``cluster`` by Bell measurements and apply feedforward.

    ``Fixed`` and ``Sample`` return the post-measurement state for one set of
    outcomes. ``Average`` returns the mixture over all outcomes: the state is
    conditioned on the mean outcome and the spread of the feedforward-corrected
    conditional mean across outcomes is added back (law of total covariance).
    """
    _check_inputs(inp, cluster)
    inp = inp.reorder(INPUT_MODES)
    joint = tensor(inp, cluster)
    forms = all_bell_forms()
    F = form_matrix(forms, joint.modes)
    t_mean = F @ joint.mean
    t_cov = F @ joint.cov @ F.T

    if isinstance(policy, Sample):
        rng = np.random.default_rng(policy.seed)
        policy = Fixed(BellOutcomes(*rng.multivariate_normal(t_mean, t_cov, method="eigh")))

    if isinstance(policy, Fixed):
        outcomes = policy.outcomes
        cond = condition_on_forms(joint, forms, outcomes.as_array())
        fed = apply(cond, feedforward_transform(outcomes))
        return GateRunResult(_finish(fed), outcomes, inp.mean.copy())

    if not isinstance(policy, Average):
        raise TypeError(f"unknown outcome policy {policy!r}")

    cond = condition_on_forms(joint, forms, t_mean)
    gain = np.linalg.solve(t_cov, F @ joint.cov).T
    ff = np.zeros((joint.mean.size, 4))
    ff[joint.mode_indices(("C2", "C3"))] = FEEDFORWARD_GAIN
    response = gain + ff
    mean = cond.mean + ff @ t_mean
    cov = cond.cov + response @ t_cov @ response.T
    mixed = GaussianState(joint.modes, mean, 0.5 * (cov + cov.T))
    return GateRunResult(_finish(mixed), None, inp.mean.copy())


def gate_matrix() -> np.ndarray:
    """Block ``((I, S), (S, I))`` acting on ``(x_alpha, p_alpha, x_beta, p_beta)``."""
    return cz_matrix()


def predict_output(inp: GaussianState, nullifier_cov: np.ndarray, psd_tol: float = 1e-6) -> GaussianState:
    """Closed-form output: ideal gate on the input plus routed nullifier noise."""
    if set(inp.modes) != set(INPUT_MODES):
        raise GaussianError(f"input state must be over {INPUT_MODES}, got {inp.modes}")
    sigma = np.asarray(nullifier_cov, dtype=float)
    if sigma.shape != (4, 4):
        raise GaussianError("nullifier covariance must be 4x4")
    if np.linalg.eigvalsh(0.5 * (sigma + sigma.T))[0] < -psd_tol:
        raise GaussianError("nullifier covariance is not positive semidefinite")
    inp = inp.reorder(INPUT_MODES)
    b = gate_matrix()
    cov = b @ inp.cov @ b.T + NOISE_ROUTING @ sigma @ NOISE_ROUTING.T
    return GaussianState(OUTPUT_MODES, b @ inp.mean, 0.5 * (cov + cov.T))
