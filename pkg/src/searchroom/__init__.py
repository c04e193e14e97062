"""searchroom: a self-hosted collaborative search agent for shared chat rooms."""

__version__ = "0.1.0"
