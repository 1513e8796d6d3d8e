"""Typed exceptions shared across the toolkit."""


class ConvCorpusError(Exception):
    """Base class for all toolkit errors."""


class MalformedRecordError(ConvCorpusError):
    """Input line is not parseable as a JSON object."""


class SchemaViolationError(ConvCorpusError):
    """Record parses but violates the documented schema or an invariant."""


class EncodingError(ConvCorpusError):
    """Input bytes are not valid UTF-8."""


class EmptyDocumentError(ConvCorpusError):
    """Document tokenizes to zero tokens; an entropy score is undefined."""


class PolicyError(ConvCorpusError):
    """Anonymization policy is invalid (bad pattern, missing pool, ...)."""


class PoolExhaustedError(PolicyError):
    """A noise pool contains nothing but the surface form itself."""


class MissingSlotError(ConvCorpusError):
    """A prompt template placeholder was left unbound."""


class UnknownSlotValueError(ConvCorpusError):
    """A slot binding names an unknown slot or a disallowed value."""


class JudgeServiceError(ConvCorpusError):
    """Transport-level failure talking to the judge endpoint."""


class JudgeParseError(ConvCorpusError):
    """Judge answer did not contain the expected array of rating objects."""


class NoJudgedPairsError(ConvCorpusError):
    """Win rates requested but no pair carries a verdict."""


class ManifestMismatchError(ConvCorpusError):
    """Post-write verification found shards disagreeing with their manifest."""


class ConfigError(ConvCorpusError):
    """Configuration failed validation. Carries the full list of violations."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class StageError(ConvCorpusError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"stage '{stage}': {message}")
