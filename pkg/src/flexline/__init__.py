"""Flexible production-line dispatching: simulator, rules, actor-critic agent and soft shield."""

__version__ = "0.1.0"
