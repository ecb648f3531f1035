"""Loop-free, super-stabilizing BFS spanning tree protocol and its checkers."""

__version__ = "0.1.0"
