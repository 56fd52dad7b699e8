"""Scenario files: JSON documents describing one reproduction run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ..analysis import power_db_to_mean
from ..cluster import ClusterSpec, Construction, s_from_db
from ..gaussian_core import GaussianState, coherent, tensor, vacuum

# Path efficiencies for 3 % and 10 % propagation loss.
LOSS_PRESETS = {"low_loss": 0.97, "high_loss": 0.90}
ENGINES = ("covariance", "montecarlo", "both")


class ConfigError(Exception):
    """Malformed scenario (exit code 2)."""


class PhysicsError(Exception):
    """Well-formed scenario with unphysical or infeasible parameters (exit code 3)."""


def _schema() -> dict:
    return json.loads(resources.files("cvcz.cli").joinpath("schema.json").read_text())


def bundled_names() -> list[str]:
    root = resources.files("cvcz.cli").joinpath("scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str):
    return resources.files("cvcz.cli").joinpath("scenarios", f"{name}.json")


@dataclass(frozen=True)
class InputSpec:
    kind: str
    mean_x: float = 0.0
    mean_p: float = 0.0

    def state(self, mode: str) -> GaussianState:
        if self.kind == "vacuum":
            return vacuum([mode])
        return coherent(mode, self.mean_x, self.mean_p)


@dataclass(frozen=True)
class Scenario:
    name: str
    squeezing_db: tuple
    inputs: dict
    outputs: tuple
    description: str = ""
    construction: Construction = Construction.EXPERIMENTAL
    cluster_loss: tuple = (1.0,) * 4
    output_loss: tuple = (1.0, 1.0)
    visibility: float = 1.0
    gains: tuple = ()
    engine: str = "covariance"
    n_shots: int = 100_000
    seed: int = 20110610
    workers: int = 1
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def cluster_spec(self) -> ClusterSpec:
        return ClusterSpec(tuple(s_from_db(d) for d in self.squeezing_db), self.construction)

    @property
    def input_state(self) -> GaussianState:
        return tensor(self.inputs["alpha"].state("alpha"), self.inputs["beta"].state("beta"))

    @property
    def output_efficiency(self) -> tuple:
        """Output-path efficiency with interference visibility folded in as loss."""
        return tuple(eta * self.visibility**2 for eta in self.output_loss)

    def with_overrides(self, engine=None, n_shots=None, seed=None, workers=None) -> "Scenario":
        new = replace(
            self,
            engine=engine or self.engine,
            n_shots=self.n_shots if n_shots is None else n_shots,
            seed=self.seed if seed is None else seed,
            workers=self.workers if workers is None else workers,
        )
        _check_physics(new)
        return new


def _json_path(path) -> str:
    return "/".join(str(p) for p in path) or "<root>"


def _efficiency(value, n):
    if isinstance(value, str):
        return (LOSS_PRESETS[value],) * n
    if isinstance(value, (int, float)):
        return (float(value),) * n
    return tuple(float(v) for v in value)


def _input(doc: dict, where: str) -> InputSpec:
    kind = doc["type"]
    if kind == "vacuum":
        return InputSpec("vacuum")
    if kind == "coherent":
        return InputSpec("coherent", float(doc["mean_x"]), float(doc["mean_p"]))
    if doc["power_db"] < 0:
        raise PhysicsError(f"{where}/power_db: {doc['power_db']} dB lies below the shot-noise level")
    amp = power_db_to_mean(doc["power_db"])
    if doc["quadrature"] == "x":
        return InputSpec("coherent", amp, 0.0)
    return InputSpec("coherent", 0.0, amp)


def _check_physics(sc: Scenario) -> None:
    for label, values in (("cluster_loss", sc.cluster_loss), ("output_loss", sc.output_loss)):
        for k, eta in enumerate(values):
            if not (0.0 <= eta <= 1.0):
                raise PhysicsError(f"{label}/{k}: efficiency {eta} outside [0, 1]")
    if not (0.0 < sc.visibility <= 1.0):
        raise PhysicsError(f"visibility: {sc.visibility} outside (0, 1]")
    for k, g in enumerate(sc.gains):
        if not g > 0:
            raise PhysicsError(f"gains/{k}: gain must be positive, got {g}")
    for k, db in enumerate(sc.squeezing_db):
        if not np.isfinite(db):
            raise PhysicsError(f"squeezing_db/{k}: must be finite")
    if sc.engine not in ENGINES:
        raise ConfigError(f"engine: unknown engine {sc.engine!r}")
    if sc.engine != "covariance" and sc.n_shots < 2:
        raise PhysicsError(f"montecarlo/n_shots: need at least 2 shots, got {sc.n_shots}")
    if "witness" in sc.outputs and not sc.gains:
        raise ConfigError("gains: witness output requested but no gains given")


def parse_scenario(doc: dict) -> Scenario:
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"{_json_path(err.absolute_path)}: {err.message}")

    sq = doc["squeezing_db"]
    squeezing = (float(sq),) * 4 if isinstance(sq, (int, float)) else tuple(float(v) for v in sq)
    mc = doc.get("montecarlo", {})
    sc = Scenario(
        name=doc["name"],
        description=doc.get("description", ""),
        squeezing_db=squeezing,
        inputs={m: _input(doc["inputs"][m], f"inputs/{m}") for m in ("alpha", "beta")},
        outputs=tuple(doc["outputs"]),
        construction=Construction(doc.get("cluster_construction", "experimental")),
        cluster_loss=_efficiency(doc.get("cluster_loss", 1.0), 4),
        output_loss=_efficiency(doc.get("output_loss", 1.0), 2),
        visibility=float(doc.get("visibility", 1.0)),
        gains=tuple(float(g) for g in doc.get("gains", ())),
        engine=doc.get("engine", "covariance"),
        n_shots=int(mc.get("n_shots", 100_000)),
        seed=int(mc.get("seed", 20110610)),
        workers=int(mc.get("workers", 1)),
        raw=doc,
    )
    _check_physics(sc)
    return sc


def load_scenario(ref: str | Path) -> Scenario:
    """Load a scenario from a file path or a bundled scenario name."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    elif str(ref) in bundled_names():
        text = bundled_path(str(ref)).read_text()
    else:
        raise ConfigError(f"{ref}: no such file or bundled scenario")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{ref}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_scenario(doc)
