__author__ = "rppgbench developers"
__copyright__ = "Copyright 2024, rppgbench developers"
__license__ = "MIT"

import logging as _logging
import os
import platform
import sys
import threading
import time
from pathlib import Path

from humanfriendly import format_timespan


class ColorizingStreamHandler(_logging.StreamHandler):
    BLACK, RED, GREEN, YELLOW, BLUE, MAGENTA, CYAN, WHITE = range(8)
    RESET_SEQ = "\033[0m"
    COLOR_SEQ = "\033[%dm"
    BOLD_SEQ = "\033[1m"

    colors = {
        "WARNING": YELLOW,
        "INFO": GREEN,
        "DEBUG": BLUE,
        "CRITICAL": MAGENTA,
        "ERROR": RED,
    }

    def __init__(self, nocolor=False, stream=sys.stderr):
        super().__init__(stream=stream)
        self._output_lock = threading.Lock()
        self.nocolor = nocolor or not self.can_color_tty()

    def can_color_tty(self):
        if os.environ.get("RPPGBENCH_NOCOLOR"):
            return False
        if "TERM" in os.environ and os.environ["TERM"] == "dumb":
            return False
        return self.is_tty and not platform.system() == "Windows"

    @property
    def is_tty(self):
        isatty = getattr(self.stream, "isatty", None)
        return isatty and isatty()

    def emit(self, record):
        with self._output_lock:
            try:
                self.format(record)  # add the message to the record
                self.stream.write(self.decorate(record))
                self.stream.write(getattr(self, "terminator", "\n"))
                self.flush()
            except BrokenPipeError as e:
                raise e
            except (KeyboardInterrupt, SystemExit):
                pass
            except Exception:
                self.handleError(record)

    def decorate(self, record):
        message = [record.message]
        if not self.nocolor and record.levelname in self.colors:
            message.insert(0, self.COLOR_SEQ % (30 + self.colors[record.levelname]))
            message.append(self.RESET_SEQ)
        return "".join(message)


class Logger:
    """Dispatches message dicts to the registered handlers.

    Every message carries a ``level`` key; the default handler renders
    it to the python logger, custom handlers may receive it verbatim.
    """

    def __init__(self):
        self.logger = _logging.getLogger(__name__)
        self.log_handler = [self.text_handler]
        self.stream_handler = None
        self.quiet = False
        self.logfile = None
        self.logfile_handler = None

    def setup_logfile(self, path):
        self.logfile = Path(path).absolute()
        self.logfile.parent.mkdir(parents=True, exist_ok=True)
        self.logfile_handler = _logging.FileHandler(self.logfile)
        self.logger.addHandler(self.logfile_handler)

    def cleanup(self):
        if self.logfile_handler is not None:
            self.logger.removeHandler(self.logfile_handler)
            self.logfile_handler.close()
            self.logfile_handler = None
        self.log_handler = [self.text_handler]

    def handler(self, msg):
        msg["timestamp"] = time.time()
        for handler in self.log_handler:
            handler(msg)

    def set_stream_handler(self, stream_handler):
        if self.stream_handler is not None:
            self.logger.removeHandler(self.stream_handler)
        self.stream_handler = stream_handler
        self.logger.addHandler(stream_handler)

    def set_level(self, level):
        self.logger.setLevel(level)

    def info(self, msg):
        self.handler(dict(level="info", msg=msg))

    def warning(self, msg, *fmt_items):
        if fmt_items:
            msg = msg % fmt_items
        self.handler(dict(level="warning", msg=msg))

    def debug(self, msg):
        self.handler(dict(level="debug", msg=msg))

    def error(self, msg):
        self.handler(dict(level="error", msg=msg))

    def progress(self, done=None, total=None, what="records"):
        self.handler(dict(level="progress", done=done, total=total, what=what))

    def record_error(self, **msg):
        msg["level"] = "record_error"
        self.handler(msg)

    def run_finished(self, **msg):
        msg["level"] = "run_finished"
        self.handler(msg)

    def text_handler(self, msg):
        """The default rppgbench log handler.

        Prints the output to the console.

        Args:
            msg (dict):     the log message dictionary
        """
        level = msg["level"]
        if level == "info" and not self.quiet:
            self.logger.info(msg["msg"])
        elif level == "warning":
            self.logger.warning(msg["msg"])
        elif level == "error":
            self.logger.error(msg["msg"])
        elif level == "debug":
            self.logger.debug(msg["msg"])
        elif level == "progress" and not self.quiet:
            done = msg["done"]
            total = msg["total"]
            self.logger.info(
                "{} of {} {} ({}) done".format(
                    done, total, msg["what"], format_percentage(done, total)
                )
            )
        elif level == "record_error":
            self.logger.warning(
                "Record {subject_id} failed for {method}: {reason}".format(
                    subject_id=msg.get("subject_id", "?"),
                    method=msg.get("method", "-"),
                    reason=msg.get("reason", "unknown reason"),
                )
            )
        elif level == "run_finished" and not self.quiet:
            self.logger.info(
                "Finished {what} in {elapsed}.".format(
                    what=msg.get("what", "run"),
                    elapsed=format_timespan(msg["elapsed"]),
                )
            )


def format_percentage(done, total):
    """Format percentage from given fraction while avoiding superflous precision."""
    if done == total:
        return "100%"
    if done == 0:
        return "0%"
    precision = 0
    fraction = done / total
    fmt_precision = "{{:.{}%}}".format
    fmt = lambda fraction: fmt_precision(precision).format(fraction)
    while fmt(fraction) == "100%" or fmt(fraction) == "0%":
        precision += 1
    return fmt(fraction)


logger = Logger()


def setup_logger(
    handler=[],
    quiet=False,
    nocolor=False,
    stdout=False,
    debug=False,
    logfile=None,
):
    logger.log_handler.extend(handler)

    stream_handler = ColorizingStreamHandler(
        nocolor=nocolor,
        stream=sys.stdout if stdout else sys.stderr,
    )
    logger.set_stream_handler(stream_handler)
    logger.set_level(_logging.DEBUG if debug else _logging.INFO)
    logger.quiet = quiet
    if logfile is not None:
        logger.setup_logfile(logfile)
