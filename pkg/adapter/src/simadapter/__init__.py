"""Reference stdio adapter for the black-box simulator wire protocol."""

from .server import AdapterSession, serve

__all__ = ["AdapterSession", "serve"]

__version__ = "0.1.0"
