"""Monitoring service for concurrent sketch-game sessions.

Rasterizes live canvas streams, detects atypical sketch content (text,
numbers, circles, icons) with an anchor-based detector, and routes
rule-violation alerts back to players.
"""

__version__ = "0.1.0"
