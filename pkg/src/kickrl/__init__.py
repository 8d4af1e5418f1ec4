"""Decentralized Sarsa(lambda) over sparse finite-support basis features,
a 2D kinematic in-walk-kick environment, and an instrumented benchmark."""

__version__ = "0.1.0"
