"""Variance-reduced Nesterov-accelerated quasi-Newton training for small networks."""

from .model import NetworkSpec, Objective
from .numerics import Rng, uniform_init

__version__ = "0.1.0"
