"""Exception hierarchy for the analytics engine."""

from __future__ import annotations


class TgaError(Exception):
    """Base class for all engine errors."""


# behavior-code grammar

class CodeError(TgaError, ValueError):
    pass


class UnknownActorPrefix(CodeError):
    pass


class BadSuffixForActor(CodeError):
    pass


class MalformedCode(CodeError):
    pass


# ingest

class IngestError(TgaError):
    pass


class MissingMeta(IngestError):
    pass


class MissingScene(IngestError):
    pass


class DuplicateMeta(IngestError):
    pass


class DuplicateScene(IngestError):
    pass


class MalformedRecord(IngestError):
    def __init__(self, line: int, detail: str):
        super().__init__(f"line {line}: {detail}")
        self.line = line
        self.detail = detail


class ZeroGazeDirection(IngestError):
    pass


class TimestampOutOfRange(IngestError):
    pass


class IndexOutOfRange(IngestError):
    pass


class DuplicateIndex(IngestError):
    pass


# analyses

class AnalysisError(TgaError):
    pass


class PerplexityTooLarge(AnalysisError):
    pass


class DimensionMismatch(AnalysisError):
    pass


class TooFewPoints(AnalysisError):
    pass


class EmptyMatrix(AnalysisError):
    pass


class ZeroTotalDwell(AnalysisError):
    pass


class NothingToReport(AnalysisError):
    pass


class BadMetricPath(AnalysisError):
    pass


# synth

class ConfigError(TgaError):
    pass


class InvalidStochasticMatrix(ConfigError):
    pass
