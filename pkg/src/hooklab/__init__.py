"""Numerical experiments on thin hooks, symmetric Ricci flow and stable minimal slices."""

from __future__ import annotations

from .hookgen import HookSpec, ProfileMetric, TwistedMetric, ValidationError

__version__ = "0.1.0"

__all__ = ["HookSpec", "ProfileMetric", "TwistedMetric", "ValidationError", "__version__"]
