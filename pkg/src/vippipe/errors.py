"""Exception types shared across the pipeline."""


class VippipeError(Exception):
    """Base class for every error raised by this package."""


class UnsupportedFormat(VippipeError):
    """Image bytes are not binary PPM/PGM with maxval 255, or a dump has a bad magic."""


class Truncated(VippipeError):
    """Payload ends before the header-implied sample count."""


class InvalidFrame(VippipeError):
    """Frame or clip violates its shape/channel/dtype invariants."""


class MissingFrame(VippipeError):
    """A requested frame index has no file on disk."""


class ShapeMismatch(VippipeError):
    """Inputs that must share a shape do not."""


class ParseError(VippipeError):
    """File is not syntactically valid JSON/YAML."""


class SchemaError(VippipeError):
    """Required field missing or malformed; the message names the field path."""


class InfeasibleConfig(VippipeError):
    """Clip parameters cannot produce a plan for this video."""


class InfeasibleCrop(VippipeError):
    """Crop window does not fit inside the frame."""


class EmptyInput(VippipeError):
    """A metric was called on empty inputs."""


class NoGroundTruth(VippipeError):
    """No ground-truth instance exists for the requested class."""


class NoFixations(VippipeError):
    """Fixation map contains no fixated pixel."""


class DegenerateMap(VippipeError):
    """Saliency map is constant, so the score is undefined."""


class UnknownMetric(VippipeError):
    """Metric name not recognized (or not applicable to the model output)."""


class ConfigTypeError(VippipeError):
    """A known configuration key holds a value of the wrong type; message names the key."""


class UnknownOverride(VippipeError):
    """A command-line override is not of the form key=value."""


class MissingWeights(VippipeError):
    """Requested pretrained weights file does not exist."""


class EmptyBatch(VippipeError):
    """An optimizer step was requested with zero samples."""


class UnknownModel(VippipeError):
    """Model name not present in the micro-model registry."""


class RunDirectoryExists(VippipeError):
    """rerun=0 refuses to overwrite an existing run directory."""


class DigestMismatchWarning(UserWarning):
    """Checkpoint was produced by a config with a different digest."""
