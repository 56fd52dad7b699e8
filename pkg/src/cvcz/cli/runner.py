"""Execute scenarios with the covariance and/or Monte Carlo engines."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .. import analysis
from ..cluster import CLUSTER_MODES, build_cluster
from ..gaussian_core import GaussianState, loss_channel
from ..montecarlo import ShotConfig, run_shots
from ..protocol import run_gate
from .scenario import Scenario

QUADRATURES = ("x_mu", "p_mu", "x_nu", "p_nu")
CROSSCHECK_SIGMAS = 5.0
CSV_COLUMNS = ("quantity", "engine", "value", "unit", "err")


class EngineDisagreement(Exception):
    """Monte Carlo and covariance results differ beyond the allowed band (exit code 4)."""


@dataclass(frozen=True)
class ResultRow:
    quantity: str
    engine: str
    value: float
    unit: str
    err: float | None = None


def _tag(g: float) -> str:
    return f"@g={g!r}"


def covariance_output(sc: Scenario) -> GaussianState:
    """Output state over (mu, nu) for the scenario, from covariance propagation."""
    cluster = build_cluster(sc.cluster_spec)
    for mode, eta in zip(CLUSTER_MODES, sc.cluster_loss):
        cluster = loss_channel(cluster, mode, eta)
    out = run_gate(sc.input_state, cluster).output_state
    for mode, eta in zip(("mu", "nu"), sc.output_efficiency):
        out = loss_channel(out, mode, eta)
    return out


def _reference_db(term: float, g: float) -> float:
    # Level relative to two vacuum homodyne inputs combined at gain g.
    return 10.0 * math.log10(term / ((1.0 + g * g) * 0.25))


def covariance_rows(sc: Scenario) -> list[ResultRow]:
    out = covariance_output(sc)
    rows = []
    if "quadratures" in sc.outputs:
        for k, q in enumerate(QUADRATURES):
            m, v = float(out.mean[k]), float(out.cov[k, k])
            rows += [
                ResultRow(f"mean_{q}", "covariance", m, "mean"),
                ResultRow(f"var_{q}", "covariance", v, "variance"),
                ResultRow(f"db_{q}", "covariance", analysis.db_rel_snl(v), "dB-rel-SNL"),
                ResultRow(f"power_{q}", "covariance", analysis.power_db(m, v), "dB-rel-SNL"),
            ]
    if "witness" in sc.outputs:
        for w in analysis.gain_sweep(out, sc.gains):
            t = _tag(w.g)
            rows += [
                ResultRow(f"witness_term_mu_nu{t}", "covariance", w.term_mu_nu, "variance"),
                ResultRow(f"witness_term_nu_mu{t}", "covariance", w.term_nu_mu, "variance"),
                ResultRow(f"witness_term_mu_nu_rel_ref{t}", "covariance", _reference_db(w.term_mu_nu, w.g), "dB"),
                ResultRow(f"witness_term_nu_mu_rel_ref{t}", "covariance", _reference_db(w.term_nu_mu, w.g), "dB"),
                ResultRow(f"witness_sum{t}", "covariance", w.sum, "variance"),
                ResultRow(f"witness_bound{t}", "covariance", w.bound, "variance"),
                ResultRow(f"witness_normalized{t}", "covariance", w.normalized_sum, "ratio"),
                ResultRow(f"witness_entangled{t}", "covariance", float(w.entangled), "bool"),
            ]
    return rows


def threshold_rows(sc: Scenario) -> list[ResultRow]:
    rows = [
        ResultRow(f"threshold_s_max{_tag(g)}", "analytic", analysis.squeezing_threshold(g), "s")
        for g in sc.gains
    ]
    opt = analysis.optimal_gain()
    rows += [
        ResultRow("optimal_gain", "analytic", opt.g_star, "gain"),
        ResultRow("optimal_s_max", "analytic", opt.s_max, "s"),
        ResultRow("optimal_squeezing_db", "analytic", float(opt.squeezing_db_required), "dB"),
    ]
    return rows


def _db_err(v, err):
    return 10.0 / math.log(10.0) * err / v


def montecarlo_rows(sc: Scenario) -> tuple[list[ResultRow], dict]:
    cfg = ShotConfig(
        n_shots=sc.n_shots,
        seed=sc.seed,
        inputs=sc.input_state,
        cluster=sc.cluster_spec,
        cluster_loss=sc.cluster_loss,
        output_loss=sc.output_efficiency,
        gains=sc.gains if "witness" in sc.outputs else (),
        workers=sc.workers,
    )
    res = run_shots(cfg)
    rows = []
    if "quadratures" in sc.outputs:
        for q in QUADRATURES:
            e = res.outputs[q]
            power = e.mean**2 + e.variance
            power_err = math.hypot(2.0 * e.mean * e.std_error_of_mean, e.std_error_of_variance)
            rows += [
                ResultRow(f"mean_{q}", "montecarlo", e.mean, "mean", e.std_error_of_mean),
                ResultRow(f"var_{q}", "montecarlo", e.variance, "variance", e.std_error_of_variance),
                ResultRow(
                    f"db_{q}", "montecarlo", analysis.db_rel_snl(e.variance), "dB-rel-SNL",
                    _db_err(e.variance, e.std_error_of_variance),
                ),
                ResultRow(f"power_{q}", "montecarlo", analysis.db_rel_snl(power), "dB-rel-SNL", _db_err(power, power_err)),
            ]
    for w in res.witnesses:
        t = _tag(w.g)
        a, b = w.term_mu_nu, w.term_nu_mu
        rows += [
            ResultRow(f"witness_term_mu_nu{t}", "montecarlo", a.variance, "variance", a.std_error_of_variance),
            ResultRow(f"witness_term_nu_mu{t}", "montecarlo", b.variance, "variance", b.std_error_of_variance),
            ResultRow(
                f"witness_term_mu_nu_rel_ref{t}", "montecarlo", _reference_db(a.variance, w.g), "dB",
                _db_err(a.variance, a.std_error_of_variance),
            ),
            ResultRow(
                f"witness_term_nu_mu_rel_ref{t}", "montecarlo", _reference_db(b.variance, w.g), "dB",
                _db_err(b.variance, b.std_error_of_variance),
            ),
            ResultRow(f"witness_sum{t}", "montecarlo", w.sum, "variance", w.sum_err),
            ResultRow(f"witness_bound{t}", "montecarlo", w.g, "variance"),
            ResultRow(f"witness_normalized{t}", "montecarlo", w.normalized_sum, "ratio", w.normalized_err),
            ResultRow(f"witness_entangled{t}", "montecarlo", float(w.entangled), "bool"),
        ]
    return rows, res.metadata


@dataclass(frozen=True)
class Mismatch:
    quantity: str
    covariance: float
    montecarlo: float
    err: float

    @property
    def sigmas(self) -> float:
        return abs(self.montecarlo - self.covariance) / self.err


def crosscheck(rows: list[ResultRow], n_sigma: float = CROSSCHECK_SIGMAS) -> list[Mismatch]:
    """Monte Carlo rows whose value lies more than ``n_sigma`` errors from the covariance row."""
    cov = {r.quantity: r.value for r in rows if r.engine == "covariance"}
    bad = []
    for r in rows:
        if r.engine != "montecarlo" or r.err is None or r.quantity not in cov:
            continue
        if abs(r.value - cov[r.quantity]) > n_sigma * r.err:
            bad.append(Mismatch(r.quantity, cov[r.quantity], r.value, r.err))
    return bad


@dataclass
class RunResult:
    rows: list
    metadata: dict
    mismatches: list


def run(sc: Scenario) -> RunResult:
    rows, meta = [], {
        "scenario": sc.name,
        "engine": sc.engine,
        "squeezing_db": list(sc.squeezing_db),
        "cluster_loss": list(sc.cluster_loss),
        "output_loss": list(sc.output_loss),
        "visibility": sc.visibility,
        "tolerances": {"crosscheck_sigmas": CROSSCHECK_SIGMAS},
    }
    if sc.engine in ("covariance", "both") and set(sc.outputs) & {"quadratures", "witness"}:
        rows += covariance_rows(sc)
    if sc.engine in ("montecarlo", "both") and set(sc.outputs) & {"quadratures", "witness"}:
        mc_rows, mc_meta = montecarlo_rows(sc)
        rows += mc_rows
        meta["montecarlo"] = mc_meta
    if "threshold" in sc.outputs:
        rows += threshold_rows(sc)
    mismatches = crosscheck(rows) if sc.engine == "both" else []
    return RunResult(rows, meta, mismatches)


# -- table I/O ------------------------------------------------------------------


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def to_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.quantity, r.engine, _fmt(r.value), r.unit, _fmt(r.err)])
    return buf.getvalue()


def from_csv(text: str) -> list[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    return [
        ResultRow(
            d["quantity"], d["engine"], float(d["value"]), d["unit"],
            float(d["err"]) if d["err"] else None,
        )
        for d in reader
    ]


def to_json(result: RunResult) -> str:
    payload = {"metadata": result.metadata, "rows": [asdict(r) for r in result.rows]}
    return json.dumps(payload, indent=2, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def from_json(text: str) -> list[ResultRow]:
    return [ResultRow(**d) for d in json.loads(text)["rows"]]
