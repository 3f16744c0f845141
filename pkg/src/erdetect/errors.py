"""Exception hierarchy shared across the toolkit.

Every domain failure raises a subclass of ERDetectError so the CLI can map
them uniformly to exit status 1 (usage errors are argparse's status 2).
"""


class ERDetectError(Exception):
    """Base class for all toolkit errors."""


class CorpusError(ERDetectError):
    """Invalid corpus input (empty input, bad adapter, unreadable file)."""


class ParseError(CorpusError):
    """A malformed row; carries the 1-based row index."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class SplitError(ERDetectError):
    """Infeasible or inconsistent fold/subset construction."""


class MissingInstanceError(SplitError):
    """An instance id could not be resolved against the corpus."""


class EncodingError(ERDetectError):
    """Tokenization/alignment failure while building an input pair."""


class TargetTruncatedError(EncodingError):
    """The target word does not survive truncation to the maximum length."""


class ConfigurationError(ERDetectError):
    """Incompatible model/encoder/head configuration."""


class NumericError(ERDetectError):
    """A non-finite value appeared where a finite one is required."""


class CheckpointError(ERDetectError):
    """Checkpoint version or architecture mismatch, or unreadable file."""


class EvaluationError(ERDetectError):
    """Invalid metric computation input."""


class CoverageError(EvaluationError):
    """A test instance was scored twice or never across the fold grid."""


class EnsembleError(EvaluationError):
    """Ensemble members do not cover identical instance sets."""


class ReportError(EvaluationError):
    """Report is empty or internally inconsistent."""


class LLMError(ERDetectError):
    """LLM baseline failure (transport, cache miss in replay, bad prompt)."""


class LLMCacheMissError(LLMError):
    """Replay mode was asked for a response that is not in the cache."""
