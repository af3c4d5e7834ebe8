"""Embedding and re-ranking model server for the papertrail engine."""

__version__ = "0.1.0"

from .app import create_app

__all__ = ["create_app"]
