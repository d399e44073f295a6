"""Exception types raised across the pipeline."""


class PipelineError(Exception):
    """Base class for all scvd errors."""


# -- corpus ------------------------------------------------------------------

class MissingData(PipelineError):
    """Dataset file has a header but no rows (or is empty)."""


class SchemaError(PipelineError):
    """Dataset file deviates from the expected column layout or row shape."""


class LabelError(PipelineError):
    """A label string is not one of RE, IO, TD, DD."""


class EncodingMismatch(PipelineError):
    """The encoded_label column disagrees with the label column."""


class DegenerateClass(PipelineError):
    """A class is too small to appear in every partition with nonzero ratio."""


# -- models ------------------------------------------------------------------

class ConfigError(PipelineError):
    """Model configuration is invalid (wrong kind, non-positive dimension)."""


class CheckpointError(PipelineError):
    """Checkpoint directory is missing, corrupt, or of the wrong kind."""


class VocabMismatch(PipelineError):
    """Tokenizer vocabulary and encoder embedding table disagree."""


class ShapeError(PipelineError):
    """Encoded inputs do not match what the model expects."""


# -- training ----------------------------------------------------------------

class EmptyDataset(PipelineError):
    """Training or evaluation was asked to run on an empty dataset."""


class DivergenceError(PipelineError):
    """Loss became non-finite; carries the partial history up to the abort.

    The ``run`` attribute holds the TrainingRun recorded before the abort,
    ``abort_epoch`` the epoch at which the non-finite value appeared.
    """

    def __init__(self, message, run=None, abort_epoch=None):
        super().__init__(message)
        self.run = run
        self.abort_epoch = abort_epoch


# -- evaluation --------------------------------------------------------------

class LengthMismatch(PipelineError):
    """y_true and y_pred have different lengths."""


class EmptyInput(PipelineError):
    """Metric computation needs at least one prediction."""


class SplitMismatch(PipelineError):
    """Reports being compared come from different dataset splits."""
