"""Trajectory sampling of the full protocol and moment estimation.

Because every state and measurement in the protocol is Gaussian, the Wigner
function is a proper probability density and homodyne statistics are its
marginals. A shot is therefore one phase-space point: squeezed sources and
inputs are drawn, pushed through the preparation network and loss, the Bell
observables are read off the point, and the feedforward displacement uses
those read-off values (:func:`sample_block`). Every step is linear, so
:func:`run_shots` composes the steps into one map per shot before reducing.
This sampler is not valid for non-Gaussian states.

Randomness: shot ``i`` belongs to block ``i // block_size`` and row
``i % block_size``. Block ``b`` draws its normals from
``Generator(Philox(SeedSequence(seed, spawn_key=(b,))))``. Blocks are
reduced independently and merged in block order, so results do not depend on
the number of worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import numpy as np

from ..cluster import CLUSTER_MODES, ClusterSpec, preparation_map
from ..gaussian_core import VACUUM_VARIANCE, GaussianError, GaussianState, form_matrix
from ..protocol import FEEDFORWARD_GAIN, INPUT_MODES, all_bell_forms

DEFAULT_BLOCK_SIZE = 8192
GENERATOR = "numpy.random.Philox via SeedSequence(seed, spawn_key=(block,))"
OUTPUT_NAMES = ("x_mu", "p_mu", "x_nu", "p_nu")

_N_NOISE = 24  # inputs 4 | sources 8 | cluster-loss vacua 8 | output-loss vacua 4
_MODES = INPUT_MODES + CLUSTER_MODES


def _as_tuple(value, n, name):
    vals = (float(value),) * n if np.isscalar(value) else tuple(float(v) for v in value)
    if len(vals) != n:
        raise GaussianError(f"{name} needs {n} values, got {len(vals)}")
    if not all(0.0 <= v <= 1.0 for v in vals):
        raise GaussianError(f"{name} efficiencies must lie in [0, 1], got {vals}")
    return vals


@dataclass(frozen=True)
class ShotConfig:
    n_shots: int
    seed: int
    inputs: GaussianState
    cluster: ClusterSpec
    cluster_loss: tuple = 1.0
    output_loss: tuple = 1.0
    gains: tuple = ()
    block_size: int = DEFAULT_BLOCK_SIZE
    workers: int = 1

    def __post_init__(self):
        if self.n_shots < 2:
            raise GaussianError("need at least 2 shots to estimate a variance")
        if set(self.inputs.modes) != set(INPUT_MODES):
            raise GaussianError(f"inputs must be over {INPUT_MODES}")
        object.__setattr__(self, "cluster_loss", _as_tuple(self.cluster_loss, 4, "cluster_loss"))
        object.__setattr__(self, "output_loss", _as_tuple(self.output_loss, 2, "output_loss"))
        object.__setattr__(self, "gains", tuple(float(g) for g in self.gains))
        if self.block_size < 1 or self.workers < 1:
            raise GaussianError("block_size and workers must be positive")


@dataclass(frozen=True)
class StatEstimate:
    mean: float
    variance: float
    std_error_of_variance: float
    n: int

    @property
    def std_error_of_mean(self) -> float:
        return float(np.sqrt(self.variance / self.n))


@dataclass(frozen=True)
class WitnessEstimate:
    g: float
    term_mu_nu: StatEstimate
    term_nu_mu: StatEstimate
    sum: float
    sum_err: float

    @property
    def normalized_sum(self) -> float:
        return self.sum / self.g

    @property
    def normalized_err(self) -> float:
        return self.sum_err / self.g

    @property
    def entangled(self) -> bool:
        return self.sum < self.g


@dataclass(frozen=True)
class ShotResult:
    outputs: dict
    witnesses: list
    output_cov: np.ndarray
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TrajectoryModel:
    """Linear maps of one shot; see ``_kernels_py.propagate`` for their roles."""

    offset: np.ndarray
    inject: np.ndarray
    prep: np.ndarray
    post: np.ndarray
    bell: np.ndarray
    select: np.ndarray
    feedforward: np.ndarray
    out_noise: np.ndarray

    def fused(self):
        """``(weights, bias)`` with outputs ``= bias + weights @ z`` per shot.

        Feedforward is linear in the Bell outcomes, which are linear in the
        shot's phase-space point, so the whole trajectory composes exactly.
        """
        pre = self.prep @ self.inject + self.post
        read = self.select + self.feedforward @ self.bell
        weights = read @ pre + self.out_noise
        bias = read @ (self.prep @ self.offset)
        return np.ascontiguousarray(weights), np.ascontiguousarray(bias)

    def arrays(self):
        return tuple(
            np.ascontiguousarray(a, dtype=float)
            for a in (
                self.offset, self.inject, self.prep, self.post,
                self.bell, self.select, self.feedforward, self.out_noise,
            )
        )


def symmetric_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix (clips tiny negative eigenvalues)."""
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def sample_initial(state: GaussianState, rng: np.random.Generator) -> np.ndarray:
    """One phase-space point drawn from the state's Wigner function."""
    return state.mean + symmetric_factor(state.cov) @ rng.standard_normal(state.mean.size)


def electronic_combination(x_series, p_series, g: float) -> np.ndarray:
    """Shot-wise ``g * p - x``: signals summed with power ratio g^2 : 1."""
    return g * np.asarray(p_series) - np.asarray(x_series)


def trajectory_model(config: ShotConfig) -> TrajectoryModel:
    inputs = config.inputs.reorder(INPUT_MODES)
    dim = 2 * len(_MODES)
    offset = np.zeros(dim)
    offset[:4] = inputs.mean

    inject = np.zeros((dim, _N_NOISE))
    inject[:4, :4] = symmetric_factor(inputs.cov)
    for j, s in enumerate(config.cluster.squeezing):
        row = 4 + 2 * j
        inject[row, 4 + 2 * j] = np.sqrt(VACUUM_VARIANCE / s)
        inject[row + 1, 4 + 2 * j + 1] = np.sqrt(VACUUM_VARIANCE * s)

    eta_c = np.repeat(config.cluster_loss, 2)
    prep = np.eye(dim)
    prep[4:, 4:] = np.sqrt(eta_c)[:, None] * preparation_map(config.cluster.construction).matrix
    post = np.zeros((dim, _N_NOISE))
    post[4:, 12:20] = np.diag(np.sqrt((1.0 - eta_c) * VACUUM_VARIANCE))

    bell = form_matrix(all_bell_forms(), _MODES)

    eta_o = np.repeat(config.output_loss, 2)
    select = np.zeros((4, dim))
    c2 = 2 * _MODES.index("C2")
    select[:, c2 : c2 + 4] = np.eye(4)  # C2 and C3 are adjacent
    select *= np.sqrt(eta_o)[:, None]
    feedforward = np.sqrt(eta_o)[:, None] * FEEDFORWARD_GAIN
    out_noise = np.zeros((4, _N_NOISE))
    out_noise[:, 20:24] = np.diag(np.sqrt((1.0 - eta_o) * VACUUM_VARIANCE))
    return TrajectoryModel(offset, inject, prep, post, bell, select, feedforward, out_noise)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _block_sizes(n_shots: int, block_size: int) -> list[int]:
    full, rest = divmod(n_shots, block_size)
    return [block_size] * full + ([rest] if rest else [])


def sample_block(config: ShotConfig, block: int, model: TrajectoryModel | None = None, kernels=None):
    """Raw trajectories ``(z, y, t, o)`` of one block (rows are shots)."""
    if kernels is None:
        from . import kernels
    model = model or trajectory_model(config)
    sizes = _block_sizes(config.n_shots, config.block_size)
    z = _block_rng(config.seed, block).standard_normal((sizes[block], _N_NOISE))
    y, t, o = kernels.propagate(z, *model.arrays())
    return z, y, t, o


def _merge(acc, part):
    """Chan et al. pairwise merge of (n, mean, comoment)."""
    if acc is None:
        return part
    na, ma, ca = acc
    nb, mb, cb = part
    n = na + nb
    delta = mb - ma
    return n, ma + delta * (nb / n), ca + cb + np.outer(delta, delta) * (na * nb / n)


def _estimate(n, mean, var):
    return StatEstimate(float(mean), float(var), float(var * np.sqrt(2.0 / (n - 1))), int(n))


def run_shots(config: ShotConfig, kernels=None) -> ShotResult:
    if kernels is None:
        from . import kernels
    weights, bias = trajectory_model(config).fused()
    gains = np.asarray(config.gains, dtype=float)
    sizes = _block_sizes(config.n_shots, config.block_size)

    def reduce_block(b):
        z = _block_rng(config.seed, b).standard_normal((sizes[b], _N_NOISE))
        mean, com = kernels.shot_statistics(z, weights, bias, gains)
        return sizes[b], mean, com

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            parts = list(pool.map(reduce_block, range(len(sizes))))
    else:
        parts = [reduce_block(b) for b in range(len(sizes))]

    acc = None
    for part in parts:
        acc = _merge(acc, part)
    n, mean, com = acc
    cov = com / (n - 1)

    outputs = {name: _estimate(n, mean[k], cov[k, k]) for k, name in enumerate(OUTPUT_NAMES)}
    witnesses = []
    for j, g in enumerate(config.gains):
        a, b = 4 + 2 * j, 5 + 2 * j
        ea, eb = _estimate(n, mean[a], cov[a, a]), _estimate(n, mean[b], cov[b, b])
        total = cov[a, a] + cov[b, b]
        # Gaussian fourth moments: Var(s_a^2 + s_b^2) = 2 (va^2 + vb^2 + 2 cab^2) / (n - 1)
        err = np.sqrt(2.0 * (cov[a, a] ** 2 + cov[b, b] ** 2 + 2.0 * cov[a, b] ** 2) / (n - 1))
        witnesses.append(WitnessEstimate(g, ea, eb, float(total), float(err)))

    from . import BACKEND

    metadata = {
        "n_shots": int(n),
        "seed": int(config.seed),
        "generator": GENERATOR,
        "block_size": config.block_size,
        "kernel_backend": getattr(kernels, "NAME", BACKEND),
    }
    return ShotResult(outputs, witnesses, cov[:4, :4].copy(), metadata)
