import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvcz.cluster import CLUSTER_MODES, ClusterSpec, Construction, build_cluster, nullifier_cov
from cvcz.gaussian_core import (
    GaussianError,
    GaussianState,
    coherent,
    commutator_form,
    form_matrix,
    loss_channel,
    tensor,
    vacuum,
)
from cvcz.protocol import (
    FEEDFORWARD_GAIN,
    INPUT_MODES,
    Average,
    BellOutcomes,
    Fixed,
    Sample,
    all_bell_forms,
    bell_forms,
    gate_matrix,
    ideal_cz,
    predict_output,
    run_gate,
)

from conftest import random_state, seeds

S5 = 10 ** -0.5
MODES = INPUT_MODES + CLUSTER_MODES


def heisenberg_output(inp: GaussianState, cluster: GaussianState):
    """Oracle: outputs as linear functions of the pre-measurement quadratures.

    Feedforward adds the (linear) Bell outcomes to C2/C3 pointwise, so the
    unconditional output is ``A xi`` with ``A = select + FF bell``.
    """
    joint = tensor(inp.reorder(INPUT_MODES), cluster.reorder(CLUSTER_MODES))
    select = np.zeros((4, 12))
    select[:, 6:10] = np.eye(4)
    a = select + FEEDFORWARD_GAIN @ form_matrix(all_bell_forms(), MODES)
    return a @ joint.mean, a @ joint.cov @ a.T


def test_bell_forms_commute():
    forms = all_bell_forms()
    for f in forms:
        for g in forms:
            assert commutator_form(f, g, MODES) == pytest.approx(0.0)
    fa, f1 = bell_forms("alpha", "C1")
    assert fa.coeffs == {("alpha", "p"): 1.0, ("C1", "x"): -1.0}


def test_gate_matrix_action():
    out = ideal_cz(tensor(coherent("a", 1.0, 0.0), coherent("b", 2.0, 0.0)), "a", "b")
    assert np.allclose(out.mean, [1.0, 2.0, 2.0, 1.0])
    assert np.allclose(gate_matrix()[1], [0, 1, 1, 0])


@pytest.mark.parametrize("s", [1.0, S5, 0.05])
def test_vacuum_output_variances_closed_form(s):
    # Hand-derived: Var(x) = 1/4 + s/2, Var(p) = 1/2 + 3 s / 4 on both outputs.
    out = run_gate(vacuum(INPUT_MODES), build_cluster(ClusterSpec((s,) * 4))).output_state
    assert np.allclose(np.diag(out.cov), [0.25 + s / 2, 0.5 + 0.75 * s] * 2, atol=1e-12)
    assert out.modes == ("mu", "nu")


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(min_value=1e-3, max_value=1.0))
def test_average_matches_heisenberg_oracle(seed, s):
    rng = np.random.default_rng(seed)
    inp = random_state(INPUT_MODES, rng)
    cl = build_cluster(ClusterSpec(tuple(rng.uniform(s / 2, s, 4))))
    out = run_gate(inp, cl).output_state
    mean, cov = heisenberg_output(inp, cl)
    assert np.allclose(out.mean, mean, atol=1e-9)
    assert np.allclose(out.cov, cov, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from(list(Construction)))
def test_average_matches_predict_output(seed, construction):
    rng = np.random.default_rng(seed)
    inp = random_state(INPUT_MODES, rng)
    spec = ClusterSpec(tuple(rng.uniform(0.01, 1.0, 4)), construction)
    cl = build_cluster(spec)
    out = run_gate(inp, cl).output_state
    pred = predict_output(inp, nullifier_cov(cl, spec))
    assert np.allclose(out.mean, pred.mean, atol=1e-9)
    assert np.allclose(out.cov, pred.cov, atol=1e-9)


def test_predict_output_holds_with_cluster_loss():
    # Loss on cluster modes changes only the nullifier statistics seen by the relation.
    spec = ClusterSpec((S5,) * 4)
    cl = build_cluster(spec)
    for m, eta in zip(CLUSTER_MODES, (0.9, 0.95, 0.97, 0.92)):
        cl = loss_channel(cl, m, eta)
    inp = tensor(coherent("alpha", 0.4, -1.0), vacuum(["beta"]))
    out = run_gate(inp, cl).output_state
    pred = predict_output(inp, nullifier_cov(cl))
    assert np.allclose(out.cov, pred.cov, atol=1e-12)


def test_ideal_limit_is_outcome_independent():
    cl = build_cluster(ClusterSpec((1e-8,) * 4))
    inp = tensor(coherent("alpha", 1.0, 0.5), coherent("beta", -0.3, 2.0))
    ref = ideal_cz(inp, "alpha", "beta")
    for t in [(0, 0, 0, 0), (1.0, 2.0, -1.0, 3.0), (-4.0, 0.5, 2.5, -1.5)]:
        out = run_gate(inp, cl, Fixed(BellOutcomes(*t))).output_state
        assert np.allclose(out.mean, ref.mean, atol=1e-5)
        assert np.allclose(out.cov, ref.cov, atol=1e-5)


def test_fixed_outcome_state_is_linear_in_outcomes():
    # At finite squeezing the conditional mean moves linearly with the
    # outcomes while the conditional covariance does not move at all.
    cl = build_cluster(ClusterSpec((S5,) * 4))
    inp = vacuum(INPUT_MODES)
    zero = run_gate(inp, cl, Fixed(BellOutcomes(0, 0, 0, 0))).output_state
    cols = [run_gate(inp, cl, Fixed(BellOutcomes(*e))).output_state for e in np.eye(4)]
    t = np.array([0.3, -1.2, 2.0, 0.7])
    out = run_gate(inp, cl, Fixed(BellOutcomes(*t))).output_state
    slope = np.column_stack([c.mean - zero.mean for c in cols])
    assert np.allclose(out.mean, zero.mean + slope @ t, atol=1e-12)
    assert np.allclose(out.cov, zero.cov, atol=1e-12)


def test_sampled_runs_average_to_ensemble():
    # Law of total covariance: E[cond cov] + Cov[cond mean] = ensemble cov.
    cl = build_cluster(ClusterSpec((S5,) * 4))
    inp = tensor(coherent("alpha", 1.0, 0.0), vacuum(["beta"]))
    runs = [run_gate(inp, cl, Sample(k)) for k in range(4000)]
    means = np.array([r.output_state.mean for r in runs])
    ens = run_gate(inp, cl).output_state
    total = runs[0].output_state.cov + np.cov(means.T)
    assert np.allclose(means.mean(axis=0), ens.mean, atol=0.05)
    assert np.allclose(total, ens.cov, atol=0.05)


def test_sample_is_reproducible():
    cl = build_cluster(ClusterSpec((S5,) * 4))
    a = run_gate(vacuum(INPUT_MODES), cl, Sample(7))
    b = run_gate(vacuum(INPUT_MODES), cl, Sample(7))
    assert a.outcomes == b.outcomes
    assert np.array_equal(a.output_state.mean, b.output_state.mean)


def test_conditional_state_is_physical():
    from cvcz.gaussian_core import check_uncertainty

    cl = build_cluster(ClusterSpec((S5,) * 4))
    out = run_gate(vacuum(INPUT_MODES), cl, Fixed(BellOutcomes(1, 1, 1, 1))).output_state
    assert check_uncertainty(out)


def test_input_validation():
    cl = build_cluster(ClusterSpec((S5,) * 4))
    with pytest.raises(GaussianError):
        run_gate(vacuum(["alpha", "gamma"]), cl)
    with pytest.raises(GaussianError):
        run_gate(vacuum(INPUT_MODES), vacuum(["C1", "C2"]))
    with pytest.raises(GaussianError):
        BellOutcomes(np.nan, 0, 0, 0)
    with pytest.raises(GaussianError):
        predict_output(vacuum(INPUT_MODES), -np.eye(4))


@pytest.mark.parametrize(
    "inp, moved",
    [
        (("x", "alpha"), {0, 3}),
        (("p", "alpha"), {1}),
        (("x", "beta"), {1, 2}),
        (("p", "beta"), {3}),
    ],
)
def test_coherent_transfer_pattern(inp, moved):
    quad, mode = inp
    a = 3.0
    mx, mp = (a, 0.0) if quad == "x" else (0.0, a)
    other = "beta" if mode == "alpha" else "alpha"
    state = tensor(coherent(mode, mx, mp), vacuum([other]))
    out = run_gate(state, build_cluster(ClusterSpec((S5,) * 4))).output_state
    for k in range(4):
        if k in moved:
            assert out.mean[k] == pytest.approx(a)
        else:
            assert abs(out.mean[k]) < 1e-9
