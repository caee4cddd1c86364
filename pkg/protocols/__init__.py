"""DDCSieve protocols."""

from ddcsieve.protocols.transition import TransitionEstimator

__all__ = [
    "TransitionEstimator",
]
