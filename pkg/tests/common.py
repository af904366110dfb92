import hashlib
import os
from os.path import join

import numpy as np

from rppgbench.signals import RgbTrace


def dpath(path):
    """get the path to a data file (relative to the directory this
    test lives in)"""
    return os.path.realpath(join(os.path.dirname(__file__), path))


def md5sum(filename, ignore_newlines=False):
    if ignore_newlines:
        with open(filename, "r", encoding="utf-8", errors="surrogateescape") as f:
            data = f.read().strip().encode("utf8", errors="surrogateescape")
    else:
        data = open(filename, "rb").read().strip()
    return hashlib.md5(data).hexdigest()


def times(duration_s=20.0, fs=30.0):
    return np.arange(int(round(duration_s * fs))) / fs


def sine(freq, duration_s=20.0, fs=30.0, phase=0.0):
    return np.sin(2 * np.pi * freq * times(duration_s, fs) + phase)


def make_trace(r, g, b, fs=30.0, normalized=False):
    return RgbTrace(np.column_stack([r, g, b]), fs, normalized=normalized)


def corr(a, b):
    return float(np.corrcoef(a, b)[0, 1])


def relative_error(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
