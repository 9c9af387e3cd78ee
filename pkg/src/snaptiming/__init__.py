"""Snap-timing variability from player-tracking data."""

__version__ = "0.1.0"
