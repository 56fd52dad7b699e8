import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvcz.cluster import CLUSTER_MODES, ClusterSpec, build_cluster
from cvcz.gaussian_core import GaussianError, coherent, loss_channel, tensor, vacuum
from cvcz.montecarlo import (
    BACKEND,
    ShotConfig,
    electronic_combination,
    kernels,
    run_shots,
    sample_block,
    sample_initial,
    trajectory_model,
)
from cvcz.montecarlo import _kernels_py
from cvcz.protocol import INPUT_MODES, gate_matrix, run_gate

S5 = 10 ** -0.5


def config(**kw):
    base = dict(n_shots=20_000, seed=11, inputs=vacuum(INPUT_MODES), cluster=ClusterSpec((S5,) * 4))
    base.update(kw)
    return ShotConfig(**base)


def covariance_reference(cfg):
    cl = build_cluster(cfg.cluster)
    for m, eta in zip(CLUSTER_MODES, cfg.cluster_loss):
        cl = loss_channel(cl, m, eta)
    out = run_gate(cfg.inputs, cl).output_state
    for m, eta in zip(("mu", "nu"), cfg.output_loss):
        out = loss_channel(out, m, eta)
    return out


def test_config_validation():
    with pytest.raises(GaussianError):
        config(n_shots=1)
    with pytest.raises(GaussianError):
        config(cluster_loss=1.3)
    with pytest.raises(GaussianError):
        config(inputs=vacuum(["a", "b"]))
    with pytest.raises(GaussianError):
        config(workers=0)


def test_model_moments_are_exact():
    # The trajectory map is linear in z, so its implied moments are exact.
    cfg = config(cluster_loss=(0.9, 0.95, 0.97, 0.93), output_loss=(0.92, 0.96),
                 inputs=tensor(coherent("alpha", 1.0, -0.5), vacuum(["beta"])))
    m = trajectory_model(cfg)
    a = m.select @ m.prep @ m.inject + m.select @ m.post
    a = a + m.feedforward @ m.bell @ (m.prep @ m.inject + m.post) + m.out_noise
    mean = (m.select + m.feedforward @ m.bell) @ m.prep @ m.offset
    ref = covariance_reference(cfg)
    assert np.allclose(a @ a.T, ref.cov, atol=1e-12)
    assert np.allclose(mean, ref.mean, atol=1e-12)


def test_estimates_within_five_se():
    cfg = config(gains=(0.75,), inputs=tensor(coherent("alpha", 2.0, 0.0), vacuum(["beta"])))
    res = run_shots(cfg)
    ref = covariance_reference(cfg)
    for k, name in enumerate(("x_mu", "p_mu", "x_nu", "p_nu")):
        e = res.outputs[name]
        assert abs(e.mean - ref.mean[k]) < 5 * e.std_error_of_mean
        assert abs(e.variance - ref.cov[k, k]) < 5 * e.std_error_of_variance
    w = res.witnesses[0]
    assert abs(w.sum - 0.65837) < 5 * w.sum_err
    assert w.normalized_sum == pytest.approx(w.sum / 0.75)


def test_fused_statistics_match_pointwise_trajectories():
    # run_shots reduces with the composed map; sample_block applies the
    # feedforward shot by shot. Same draws must give the same moments.
    cfg = config(n_shots=3000, block_size=3000, gains=(0.75,),
                 inputs=tensor(coherent("alpha", 1.0, 0.0), vacuum(["beta"])))
    _, _, _, o = sample_block(cfg, 0)
    res = run_shots(cfg)
    assert np.allclose(np.cov(o.T), res.output_cov, rtol=1e-10, atol=1e-13)
    w = electronic_combination(o[:, 2], o[:, 1], 0.75)
    assert res.witnesses[0].term_mu_nu.variance == pytest.approx(np.var(w, ddof=1), rel=1e-10)


def test_determinism_across_workers():
    a = run_shots(config(n_shots=30_001, block_size=4096, workers=1, gains=(0.75,)))
    b = run_shots(config(n_shots=30_001, block_size=4096, workers=4, gains=(0.75,)))
    assert a.outputs == b.outputs
    assert np.array_equal(a.output_cov, b.output_cov)
    assert a.witnesses == b.witnesses


def test_seed_changes_results():
    a = run_shots(config(seed=1))
    b = run_shots(config(seed=2))
    assert a.outputs["x_mu"].variance != b.outputs["x_mu"].variance


def test_metadata():
    meta = run_shots(config(n_shots=100)).metadata
    assert meta["n_shots"] == 100 and meta["seed"] == 11
    assert meta["kernel_backend"] == BACKEND
    assert "Philox" in meta["generator"]


@pytest.mark.skipif(kernels is _kernels_py, reason="compiled kernels not built")
def test_backends_agree():
    cfg = config(n_shots=5000, gains=(0.5, 0.75))
    model = trajectory_model(cfg)
    z, *_ = sample_block(cfg, 0, model, _kernels_py)
    fast = kernels.propagate(z, *model.arrays())
    slow = _kernels_py.propagate(z, *model.arrays())
    for f, s in zip(fast, slow):
        assert np.allclose(f, s, atol=1e-12)
    mf, cf = kernels.moments(np.ascontiguousarray(fast[2]))
    ms, cs = _kernels_py.moments(slow[2])
    assert np.allclose(mf, ms, atol=1e-12) and np.allclose(cf, cs, rtol=1e-10)
    w, b = model.fused()
    gains = np.array([0.5, 0.75])
    for fa, sa in zip(kernels.shot_statistics(z, w, b, gains), _kernels_py.shot_statistics(z, w, b, gains)):
        assert np.allclose(fa, sa, rtol=1e-12, atol=1e-12)
    ra, rb = run_shots(cfg, kernels), run_shots(cfg, _kernels_py)
    for name in ra.outputs:
        assert ra.outputs[name].variance == pytest.approx(rb.outputs[name].variance, rel=1e-12)


def test_pure_python_forced_by_environment():
    env = dict(os.environ, CVCZ_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import cvcz.montecarlo as m; print(m.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_outcomes_cancel_pointwise_in_ideal_limit():
    # Each shot's output equals the gate applied to that shot's input draw.
    cfg = config(n_shots=2000, cluster=ClusterSpec((1e-10,) * 4),
                 inputs=tensor(coherent("alpha", 1.0, 2.0), coherent("beta", -1.0, 0.5)))
    z, y, t, o = sample_block(cfg, 0)
    expect = y[:, :4] @ gate_matrix().T
    assert np.max(np.abs(o - expect)) < 1e-3
    # Bell outcomes themselves are broad: the cancellation is not trivial.
    assert np.std(t[:, 0]) > 1e3


def test_outcomes_cancel_to_nullifier_noise():
    # At finite squeezing the residual is exactly the routed nullifier values.
    from cvcz.cluster import nullifier_forms
    from cvcz.gaussian_core import form_matrix
    from cvcz.protocol import NOISE_ROUTING

    cfg = config(n_shots=500)
    z, y, t, o = sample_block(cfg, 0)
    delta = y[:, 4:] @ form_matrix(nullifier_forms(), CLUSTER_MODES).T
    expect = y[:, :4] @ gate_matrix().T + delta @ NOISE_ROUTING.T
    assert np.max(np.abs(o - expect)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3))
def test_electronic_combination(seed, g):
    rng = np.random.default_rng(seed)
    x, p = rng.normal(size=10), rng.normal(size=10)
    assert np.allclose(electronic_combination(x, p, g), g * p - x)


def test_sample_initial_moments():
    rng = np.random.default_rng(0)
    state = tensor(coherent("a", 1.0, 0.0), vacuum(["b"]))
    draws = np.array([sample_initial(state, rng) for _ in range(20000)])
    assert np.allclose(draws.mean(axis=0), state.mean, atol=0.02)
    assert np.allclose(np.cov(draws.T), state.cov, atol=0.02)


def test_vacuum_shot_variance_through_engine():
    # With fully lossy paths every output is vacuum noise.
    cfg = config(n_shots=100_000, cluster_loss=0.0, output_loss=0.0)
    res = run_shots(cfg)
    for e in res.outputs.values():
        assert abs(e.variance - 0.25) < 4 * e.std_error_of_variance
        assert abs(e.mean) < 4 * e.std_error_of_mean
