"""Cycle-level simulator of a chiplet tile architecture running task-based irregular workloads."""

__version__ = "0.1.0"
