"""Swarm confrontation simulator and bidirectional hierarchical RL."""
__version__ = "0.1.0"
