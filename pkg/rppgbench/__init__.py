__author__ = "rppgbench developers"
__copyright__ = "Copyright 2024, rppgbench developers"
__license__ = "MIT"

from rppgbench.common import __version__

# Reexports that are part of the public API:
from rppgbench.methods import run_method
from rppgbench.settings import MethodConfig, MethodId
from rppgbench.signals import BvpSignal, FrameSequence, RgbTrace
