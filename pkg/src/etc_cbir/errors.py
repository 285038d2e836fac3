"""Exception types shared across the toolkit."""


class EtcCbirError(Exception):
    """Base class for all toolkit errors."""


class ImageTooSmallError(EtcCbirError, ValueError):
    """Image is smaller than one 16x16 block in some dimension."""


class BlockAlignmentError(EtcCbirError, ValueError):
    """Image dimensions are not multiples of the 16-pixel block size."""


class EmptyGridError(EtcCbirError, ValueError):
    """Block grid contains no blocks."""


class EmptyTrainingSetError(EtcCbirError, ValueError):
    """No patches could be extracted from the training images."""


class TooFewPointsError(EtcCbirError, ValueError):
    """k-means received fewer points than requested clusters."""


class DuplicateIdError(EtcCbirError, ValueError):
    """An image id is already present in the index."""


class CodebookMismatchError(EtcCbirError, ValueError):
    """Vector was built against a different codebook than the index uses."""


class FileFormatError(EtcCbirError, ValueError):
    """Persisted file does not match its documented format."""


class FormatVersionError(FileFormatError):
    """Magic line or format version is not the one this code writes."""


class TruncatedFileError(FileFormatError):
    """File ends before all announced records were read."""


class EmptyTruthSetError(EtcCbirError, ValueError):
    """A query has no ground-truth images."""


class NoQueriesError(EtcCbirError, ValueError):
    """Evaluation was asked to average zero queries."""
