"""Exception types raised by the augmentation engine."""


class AugmentationError(Exception):
    """Base class for every engine error."""


class MissingPathError(AugmentationError):
    """An input path does not exist or holds nothing loadable."""


class InconsistentFrameDimensionsError(AugmentationError):
    """A frame directory mixes images of different sizes."""


class BadHeaderError(AugmentationError):
    """A raw tensor file has a bad magic string, header, or payload."""


class UnsupportedChannelCountError(AugmentationError):
    """Clips must have exactly 3 channels."""


class DuplicateClipIdError(AugmentationError):
    """A manifest lists the same clip id twice."""


class MalformedLineError(AugmentationError):
    """A manifest line is not a valid entry."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class IoFailure(AugmentationError):
    """A filesystem read or write failed."""


class SingleFrameClipError(AugmentationError):
    """Motion intensity is undefined for single-frame clips."""


class ShapeMismatchError(AugmentationError):
    """Two clips, or a clip and a mask, disagree on shape."""


class InsufficientPositiveWeightError(AugmentationError):
    """More patches requested than there are positive-weight cells."""


class SingletonClassError(AugmentationError):
    """A class holds no partner clip besides the query itself."""


class OracleTooLargeError(AugmentationError):
    """The exact enumeration oracle only handles small grids."""
