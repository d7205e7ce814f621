"""Spoken language identification toolkit.

Scoring protocol (average detection cost, equal error rate, submission
format) plus a baseline pipeline: log-mel front end, time-delay embedding
network with statistics pooling, closed-set and zero-resource back-ends,
and a synthetic corpus harness that makes the whole chain testable
without real speech data.
"""

from .errors import LidkitError

__version__ = "0.1.0"

__all__ = ["LidkitError", "__version__"]
