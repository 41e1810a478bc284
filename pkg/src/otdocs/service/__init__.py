"""HTTP service wrapping the otdocs core."""

from .app import app, create_app

__all__ = ["app", "create_app"]
