"""HTTP model server speaking the simulstream remote-model protocol."""

from .app import create_app
from .server import app_from_flags, main

__all__ = ["create_app", "app_from_flags", "main"]
