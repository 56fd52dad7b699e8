"""Entanglement witness, optimal gain, squeezing threshold and dB bookkeeping.

All dB figures are relative to the vacuum (shot-noise) variance 1/4.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import optimize

from .gaussian_core import VACUUM_VARIANCE, GaussianError, GaussianState, LinearForm, variance_of

GAIN_BOUNDS = (0.0, 2.0)


def db_rel_snl(variance: float) -> float:
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    return 10.0 * np.log10(variance / VACUUM_VARIANCE)


def variance_from_db(db: float) -> float:
    return VACUUM_VARIANCE * 10.0 ** (db / 10.0)


def power_db_to_mean(power_db: float) -> float:
    """Coherent amplitude whose quadrature power sits ``power_db`` above shot noise.

    Power is modelled as ``mean**2 + 1/4`` for a coherent state.
    """
    ratio = 10.0 ** (power_db / 10.0)
    if ratio < 1.0:
        raise ValueError(f"power {power_db} dB lies below the shot-noise level")
    return float(np.sqrt((ratio - 1.0) * VACUUM_VARIANCE))


def power_db(mean: float, variance: float) -> float:
    return db_rel_snl(mean**2 + variance)


@dataclass(frozen=True)
class WitnessResult:
    g: float
    term_mu_nu: float
    term_nu_mu: float
    sum: float
    bound: float
    entangled: bool
    normalized_sum: float


def witness_forms(g: float) -> tuple[LinearForm, LinearForm]:
    """``(g p_mu - x_nu, g p_nu - x_mu)``."""
    return (
        LinearForm({("mu", "p"): g, ("nu", "x"): -1.0}),
        LinearForm({("nu", "p"): g, ("mu", "x"): -1.0}),
    )


def witness(state: GaussianState, g: float) -> WitnessResult:
    if not g > 0:
        raise ValueError(f"gain must be positive, got {g}")
    for m in ("mu", "nu"):
        if m not in state.modes:
            raise GaussianError(f"witness needs modes mu and nu, state has {state.modes}")
    f1, f2 = witness_forms(g)
    a, b = variance_of(state, f1), variance_of(state, f2)
    total = a + b
    return WitnessResult(g, a, b, total, g, bool(total < g), total / g)


def gain_sweep(state: GaussianState, g_values: Iterable[float]) -> list[WitnessResult]:
    return [witness(state, g) for g in g_values]


def normalized_witness(state: GaussianState, g: float) -> float:
    return witness(state, g).normalized_sum


def _ideal_sum(g):
    return 0.5 * (g**2 + (1.0 - g) ** 2)


def _noise_coefficient(g):
    # Witness excess per unit s = exp(-2r) for the experimental nullifier noise.
    return 0.5 * ((np.sqrt(2.0) - g / np.sqrt(2.0)) ** 2 + 2.5 * g**2)


def model_witness_sum(g: float, s: float) -> float:
    """Witness sum for vacuum inputs and equal source squeezing ``s``."""
    return float(_ideal_sum(g) + s * _noise_coefficient(g))


def squeezing_threshold(g: float) -> float:
    """Largest ``s = exp(-2r)`` for which the witness at gain ``g`` detects entanglement.

    Returns 0 when no squeezing level suffices at this gain.
    """
    if not g > 0:
        raise ValueError(f"gain must be positive, got {g}")
    numerator = 2.0 * g - g**2 - (1.0 - g) ** 2
    if numerator <= 0:
        return 0.0
    denominator = (np.sqrt(2.0) - g / np.sqrt(2.0)) ** 2 + 2.5 * g**2
    return float(numerator / denominator)


@dataclass(frozen=True)
class ThresholdResult:
    g_star: float
    s_max: float
    squeezing_db_required: float


def optimal_gain(tol: float = 1e-9) -> ThresholdResult:
    res = optimize.minimize_scalar(
        lambda g: -squeezing_threshold(g),
        bounds=(GAIN_BOUNDS[0] + 1e-12, GAIN_BOUNDS[1]),
        method="bounded",
        options={"xatol": tol},
    )
    g = float(res.x)
    s = squeezing_threshold(g)
    return ThresholdResult(g, s, 10.0 * np.log10(s))
