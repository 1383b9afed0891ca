"""Exception taxonomy shared by every adatok module.

Each error class carries the process exit code the CLI maps it to:
0 success, 2 usage, 3 format, 4 transport, 5 empty result.
"""


class AdatokError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class InvalidArgument(AdatokError):
    """A value is outside its documented range or combination."""

    exit_code = 2


class UnsupportedMode(InvalidArgument):
    """Operation invoked with a mode it does not implement."""


class MissingPrior(InvalidArgument):
    """A strategy needs a prior (attention scores, CLS vector) the input lacks."""


class FormatError(AdatokError):
    """Malformed file or frame: bad magic, bad header, bad structure."""

    exit_code = 3


class TruncationError(FormatError):
    """Payload ends before the header-declared length."""


class UnsupportedDtype(FormatError):
    """Dtype tag not in the format's enum."""


class ShapeError(FormatError):
    """Array dimensions disagree between coupled inputs."""


class EmptyMaskError(FormatError):
    """A mask with zero area reached an operation that requires area >= 1."""


class EncodingError(FormatError):
    """Values cannot be represented in the requested wire dtype."""


class FrameError(FormatError):
    """TOK frame failed validation; message includes the byte offset."""


class IoError(AdatokError):
    """Filesystem read/write failure outside format concerns."""


class TransportError(AdatokError):
    """Connection-level failure: refused, reset, or rejected by peer."""

    exit_code = 4


class AckTimeout(TransportError):
    """Server did not acknowledge within the deadline."""


class StartupError(TransportError):
    """Server could not bind or start."""


class NoMasksSurvived(AdatokError):
    """The mask pipeline filtered out every candidate."""

    exit_code = 5


def _registry() -> dict[str, type]:
    classes = {}
    stack = [AdatokError]
    while stack:
        cls = stack.pop()
        classes[cls.__name__] = cls
        stack.extend(cls.__subclasses__())
    return classes


def exit_code_for(error_name: str) -> int:
    """Exit code for an error class name; unknown names map to the generic 1."""
    cls = _registry().get(error_name)
    return cls.exit_code if cls is not None else 1
