"""Exception hierarchy and the process exit codes used by the CLI."""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class AfenError(Exception):
    """Base class for every toolkit error."""

    exit_code = 1


class ConfigError(AfenError):
    """Invalid run configuration or arguments."""

    exit_code = EXIT_CONFIG


class DataError(AfenError):
    """Missing, malformed, or inconsistent input data."""

    exit_code = EXIT_DATA


class NumericError(AfenError):
    """A numerical contract was violated at runtime."""

    exit_code = EXIT_NUMERIC


# --- audio containers ---

class MalformedRiff(DataError):
    pass


class UnsupportedEncoding(DataError):
    pass


class TruncatedData(DataError):
    pass


class EmptyClip(DataError):
    pass


class IoFailure(DataError):
    pass


# --- augmentation ---

class SilentClip(NumericError):
    pass


class InvalidBand(ConfigError):
    pass


# --- caches and persisted artifacts ---

class CacheFormatError(DataError):
    pass


# --- models and metrics ---

class ShapeMismatch(NumericError):
    pass


class LabelOutOfRange(DataError):
    pass


class WeightOutOfRange(ConfigError):
    pass


class DegenerateData(DataError):
    pass


class DegenerateLabels(DataError):
    pass


class EmptyDataset(DataError):
    pass


# --- corpus ingestion ---

class MalformedName(DataError):
    pass


class UnknownLabel(DataError):
    pass


class DuplicatePatient(DataError):
    pass


class EmptyCorpus(DataError):
    pass
