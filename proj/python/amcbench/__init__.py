"""OFDM modulation-classifier backdoor benchmark."""

from ._core import (
    __version__,
    anomaly_indices,
    class_prototype,
    compose_trigger,
    constellation,
    denormalize,
    load_dataset,
    partition,
    phase_normalize,
    pooled_alpha,
    principal_component,
    rapp_pa,
    rho_v_percent,
    run,
    schemes,
    spearman,
    window_alpha,
)

__all__ = [
    "__version__",
    "anomaly_indices",
    "class_prototype",
    "compose_trigger",
    "constellation",
    "denormalize",
    "load_dataset",
    "partition",
    "phase_normalize",
    "pooled_alpha",
    "principal_component",
    "rapp_pa",
    "rho_v_percent",
    "run",
    "schemes",
    "spearman",
    "window_alpha",
]
