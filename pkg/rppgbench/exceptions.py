__author__ = "rppgbench developers"
__copyright__ = "Copyright 2024, rppgbench developers"
__license__ = "MIT"

import traceback
from pathlib import Path
from typing import Optional, Union


EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_DATA_ERROR = 2
EXIT_INTERNAL_ERROR = 3


def format_error(ex, show_traceback=False):
    msg = str(ex)
    location = ""
    position = getattr(ex, "position", None)
    if position:
        location = f" in {position}"
    tb = ""
    if show_traceback:
        tb = "".join(traceback.format_tb(ex.__traceback__))
    return "{}{}{}{}".format(
        ex.__class__.__name__,
        location,
        ":\n" + msg if msg else ".",
        f"\n{tb}" if show_traceback and tb else "",
    )


def log_verbose_traceback(ex):
    from rppgbench.logging import logger

    tb = "Full " + "".join(traceback.format_exception(type(ex), ex, ex.__traceback__))
    logger.debug(tb)


def print_exception(ex):
    """
    Print an error message for a given exception.

    Arguments
    ex -- the exception
    """
    from rppgbench.logging import logger

    log_verbose_traceback(ex)
    if isinstance(ex, RppgError):
        logger.error(format_error(ex))
    elif isinstance(ex, CliException):
        logger.error(f"Error: {ex}")
    elif isinstance(ex, KeyboardInterrupt):
        logger.info("Cancelling rppgbench on user request.")
    else:
        traceback.print_exception(type(ex), ex, ex.__traceback__)


def exit_code_for(ex) -> int:
    if isinstance(ex, RppgError):
        return ex.exit_code
    if isinstance(ex, CliException):
        return EXIT_CONFIG_ERROR
    return EXIT_INTERNAL_ERROR


class RppgError(Exception):
    """
    Base class of all errors raised on purpose by rppgbench.

    The optional position names the file, line or byte the error refers to.
    """

    exit_code = EXIT_DATA_ERROR

    def __init__(self, message=None, position=None):
        super().__init__(message)
        self.position = position


class CliException(Exception):
    def __init__(self, msg):
        super().__init__(msg)


# configuration errors


class ConfigError(RppgError):
    exit_code = EXIT_CONFIG_ERROR


class ConfigInvalid(ConfigError):
    def __init__(self, msg, field: Optional[str] = None):
        if field:
            msg = f"{field}: {msg}"
        super().__init__(msg)
        self.field = field


class ConfigFileNotFound(ConfigError):
    def __init__(self, path):
        super().__init__(f"Config file {path} not found.", position=str(path))
        self.path = path


class InvalidSpec(ConfigError):
    pass


class OutOfScopeConfig(ConfigError):
    def __init__(self, field):
        super().__init__(
            f"Field '{field}' configures neural-network training, which rppgbench "
            "does not support. Remove it from the config file."
        )
        self.field = field


# data errors


class DataError(RppgError):
    pass


class InvalidTrace(DataError):
    pass


class TraceTooShort(InvalidTrace):
    pass


class NonFiniteInput(InvalidTrace):
    pass


class InvalidFrames(DataError):
    pass


class InvalidSignal(DataError):
    pass


class EmptyRoi(DataError):
    pass


class SignalTooShort(DataError):
    pass


class ConstantSignal(DataError):
    pass


class InvalidBand(DataError):
    pass


class GridLargerThanRoi(DataError):
    pass


class IncompatibleInput(DataError):
    pass


class RequiresPixelData(IncompatibleInput):
    def __init__(self, method):
        super().__init__(
            f"Method {method} operates on raw frames and cannot run on an RGB trace."
        )


class WindowLongerThanTrace(DataError):
    pass


class RankDeficient(DataError):
    pass


class SingularGram(DataError):
    pass


class DegenerateEigenstructure(DataError):
    pass


class WindowTooShort(DataError):
    pass


class EmptyBand(DataError):
    pass


class TooFewPeaks(DataError):
    pass


class LengthMismatch(DataError):
    pass


class ConstantInput(DataError):
    pass


class HrOutOfBand(DataError):
    pass


class ZeroTruth(DataError):
    pass


class MissingLabel(DataError):
    pass


class ClockMismatch(DataError):
    pass


class NoOverlap(DataError):
    pass


class DegenerateColor(DataError):
    pass


class EmptyDataset(DataError):
    pass


class MalformedFile(DataError):
    def __init__(
        self,
        path: Union[str, Path],
        msg: str,
        line: Optional[int] = None,
        byte: Optional[int] = None,
    ):
        position = str(path)
        if line is not None:
            position += f", line {line}"
        if byte is not None:
            position += f", byte {byte}"
        super().__init__(msg, position=position)
        self.path = path
        self.line = line
        self.byte = byte


class IoFailure(RppgError):
    exit_code = EXIT_DATA_ERROR

    def __init__(self, path, cause: Exception):
        super().__init__(f"Cannot access {path}: {cause}", position=str(path))
        self.path = path
