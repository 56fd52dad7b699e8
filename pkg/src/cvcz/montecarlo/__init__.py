"""Shot-level Monte Carlo of the gate protocol.

The per-shot kernels come from a compiled extension when it is importable and
from a numpy fallback otherwise. Set ``CVCZ_PURE_PYTHON=1`` to force the
fallback.
"""

import os

from . import _kernels_py

if os.environ.get("CVCZ_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        kernels = _kernels_py

BACKEND = kernels.NAME

from .engine import (  # noqa: E402
    DEFAULT_BLOCK_SIZE,
    GENERATOR,
    ShotConfig,
    ShotResult,
    StatEstimate,
    WitnessEstimate,
    electronic_combination,
    run_shots,
    sample_block,
    sample_initial,
    trajectory_model,
)

__all__ = [
    "BACKEND",
    "DEFAULT_BLOCK_SIZE",
    "GENERATOR",
    "ShotConfig",
    "ShotResult",
    "StatEstimate",
    "WitnessEstimate",
    "electronic_combination",
    "kernels",
    "run_shots",
    "sample_block",
    "sample_initial",
    "trajectory_model",
]
