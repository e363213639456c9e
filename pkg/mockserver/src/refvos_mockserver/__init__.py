"""Fixture-driven reference server for the refvos backend wire protocol."""

from .server import FixtureError, FixtureStore, MockBackendServer, serve

__all__ = ["FixtureError", "FixtureStore", "MockBackendServer", "serve"]

__version__ = "0.1.0"
