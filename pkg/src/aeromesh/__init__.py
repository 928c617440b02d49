"""Planning, adaptation and migration for multi-hop mmWave UAV backhauls."""

__version__ = "0.1.0"
