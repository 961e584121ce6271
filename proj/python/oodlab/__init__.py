"""Confidence scoring, selective-classification metrics and rank-based comparison for OOD detection."""

from ._oodlab import *  # noqa: F401,F403
from ._oodlab import __version__, OodlabError  # noqa: F401
