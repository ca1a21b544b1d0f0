"""Adaptive MPC laboratory for single-rigid-body legged locomotion."""
__version__ = "0.1.0"
