"""Contrastive separative coding: joint speech separation and speaker embedding."""

__all__ = [
    "autodiff",
    "baselines",
    "cli",
    "config",
    "evaluation",
    "exceptions",
    "models",
    "network",
    "objectives",
    "persistence",
    "plots",
    "simulation",
    "training",
    "verification",
]
