"""HTTP service wrapping the pipeline for camera clients and dashboards."""

from .app import create_app

__all__ = ["create_app"]
