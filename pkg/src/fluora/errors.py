"""Exception types shared across the toolkit."""


class FluoraError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidParams(FluoraError, ValueError):
    """Synthetic generator parameters violate an invariant."""


class InvalidConfig(FluoraError, ValueError):
    """Training configuration violates an invariant."""


class InvalidFraction(FluoraError, ValueError):
    """Split fraction outside (0, 1)."""


class DecodeError(FluoraError):
    """Image or video bytes could not be decoded."""


class EmptyVideo(FluoraError):
    """Video opened but contained no frames."""


class SplitLeakage(FluoraError):
    """A patient id appears in both the train and holdout splits."""


class UnlabeledFrame(FluoraError):
    """A manifest record is missing its label."""


class DuplicateFrameId(FluoraError):
    """Two manifest records share a frame id."""


class CropTooLarge(FluoraError, ValueError):
    """Requested crop does not fit inside the source frame."""


class SingleClassDataset(FluoraError):
    """Training split does not contain both classes."""


class ArtifactCorrupt(FluoraError):
    """Model artifact directory is missing files or fails its checksum."""


class LengthMismatch(FluoraError, ValueError):
    """Prediction/truth/strata sequences differ in length."""


class NoSolution(FluoraError):
    """No integer confusion matrix reproduces the requested rates."""


class DimensionMismatch(FluoraError, ValueError):
    """Image and saliency map shapes differ."""


class ImageTooNarrow(FluoraError, ValueError):
    """Image extent along the tiling axis is smaller than one strip."""


class EmptyInput(FluoraError, ValueError):
    """Operation requires a non-empty sequence."""


class NoFluorescentRegion(FluoraError):
    """No strip was classified fluorescent.

    This is a legitimate clinical finding, not a failure; the strip
    classifications are attached so callers can still report them.
    """

    def __init__(self, message="no strip classified fluorescent", strips=None):
        super().__init__(message)
        self.strips = list(strips) if strips is not None else []
