"""Knowledge-guided neural topic model."""

from ._kgntm import (
    Model,
    b_prime,
    classification_metrics,
    hungarian,
    run_cli,
    split_70_15_15,
    theorem_bound,
    theta_tilde,
    umass_coherence,
)

__all__ = [
    "Model",
    "b_prime",
    "classification_metrics",
    "hungarian",
    "run_cli",
    "split_70_15_15",
    "theorem_bound",
    "theta_tilde",
    "umass_coherence",
]
