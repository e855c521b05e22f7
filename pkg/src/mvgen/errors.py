"""Exception types shared across the pipeline."""


class MvgenError(Exception):
    """Base class for all pipeline errors."""


# media
class CodecToolMissing(MvgenError):
    """The external codec tool could not be found or executed."""


class UndecodableMedia(MvgenError):
    """The codec tool could not decode the given file."""


class NoAudioStream(MvgenError):
    """The file contains no audio stream."""


class MissingSource(MvgenError):
    """An EDL entry references a source file that does not exist."""


class DurationMismatch(MvgenError):
    """EDL total duration disagrees with the audio duration."""


class EmptyInput(MvgenError):
    """An operation received an empty frame list."""


# shot detection
class DimensionMismatch(MvgenError):
    """Two frames being compared have different dimensions."""


class InsufficientFrames(MvgenError):
    """A detector needs at least two frames."""


# scene index
class EmptyScene(MvgenError):
    """A scene with no sampled frames cannot be profiled."""


class EmptyCorpus(MvgenError):
    """The corpus directory contains no decodable videos."""


class CorruptIndex(MvgenError):
    """A persisted index file violates the schema."""


# music structure
class SilentAudio(MvgenError):
    """The audio signal has zero total energy."""


class TooFewBeats(MvgenError):
    """Not enough beats for the requested neighbor count."""


class ColumnMismatch(MvgenError):
    """Feature matrices disagree on the number of beat columns."""


class DegenerateScatter(MvgenError):
    """All training features are identical; scatter matrices vanish."""


class InputLengthOutOfRange(MvgenError):
    """Input track duration falls outside the accepted range."""


# genre
class NotRecognized(MvgenError):
    """The fingerprint service found no match."""


class ServiceUnavailable(MvgenError):
    """A genre web service could not be reached or refused auth."""


# clustering / assembly
class EmptySlice(MvgenError):
    """No scenes exist for the requested genre slice."""


class InsufficientFootage(MvgenError):
    """The catalog does not hold enough footage to cover the track."""
