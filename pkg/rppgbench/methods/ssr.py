import numpy as np

from rppgbench.common import EPSILON, lexicographic_sign
from rppgbench.exceptions import (
    DegenerateEigenstructure,
    EmptyRoi,
    RequiresPixelData,
    SignalTooShort,
)
from rppgbench.logging import logger
from rppgbench.methods.common import resolve_config, std_ratio
from rppgbench.preprocess import bandpass
from rppgbench.settings import MethodConfig
from rppgbench.signals import BvpSignal, FrameSequence

# Output below this standard deviation means the eigenvectors never rotated.
STATIC_THRESHOLD = 1e-9


def frame_eigensystems(frames: FrameSequence):
    """Eigenvalues (T, 3) and eigenvectors (T, 3, 3) of each frame's pixel correlation.

    Eigenvalues are sorted in descending order, eigenvectors are signed so
    their first entry is positive. Black pixels are not skin and are ignored.
    """
    pixels = frames.roi_pixels()
    T = pixels.shape[0]
    V = pixels.reshape(T, -1, 3)
    eigvals = np.zeros((T, 3))
    eigvecs = np.zeros((T, 3, 3))
    perturbed = 0
    for k in range(T):
        v = V[k][np.any(V[k] > 0, axis=1)]
        if len(v) == 0:
            raise EmptyRoi(f"Frame {k} has no skin pixels.")
        w, u = np.linalg.eigh(v.T @ v / len(v))
        order = np.argsort(w)[::-1]
        w = w[order]
        if w[0] <= EPSILON:
            raise DegenerateEigenstructure(f"Frame {k} carries no energy.")
        if w[1] - w[2] <= EPSILON * w[0] or w[2] <= EPSILON * w[0]:
            perturbed += 1
        w[1:] = np.maximum(w[1:], EPSILON * w[0])
        eigvals[k] = w
        eigvecs[k] = lexicographic_sign(u[:, order])
    if perturbed:
        logger.debug(f"SSR: perturbed repeated eigenvalues in {perturbed} frames.")
    return eigvals, eigvecs


def ssr(frames: FrameSequence, cfg: MethodConfig = None) -> BvpSignal:
    """Spatial subspace rotation pulse.

    For every frame the rotation of the dominant eigenvector against the
    subspace of the frame one stride earlier is measured, and the R and G
    projections of that rotation are combined with std-ratio tuning.
    """
    if not isinstance(frames, FrameSequence):
        raise RequiresPixelData("SSR")
    cfg = resolve_config(cfg)
    stride = cfg.ssr_stride_frames
    T = len(frames)
    if T <= stride:
        raise SignalTooShort(f"SSR needs more than {stride} frames, got {T}.")
    eigvals, eigvecs = frame_eigensystems(frames)
    out = np.zeros(T)
    for k in range(stride, T):
        tau = k - stride
        u1 = eigvecs[tau:k, :, 0]
        lam1 = eigvals[tau:k, 0]
        u2 = eigvecs[tau, :, 1]
        u3 = eigvecs[tau, :, 2]
        r2 = np.sqrt(lam1 / eigvals[tau, 1]) * (u1 @ u2)
        r3 = np.sqrt(lam1 / eigvals[tau, 2]) * (u1 @ u3)
        sr = np.outer(r2, u2) + np.outer(r3, u3)
        p = sr[:, 0] - std_ratio(sr[:, 0], sr[:, 1]) * sr[:, 1]
        out[tau:k] += p - p.mean()
    if out.std() <= STATIC_THRESHOLD:
        out = np.zeros(T)
    else:
        out = bandpass(out, frames.fs, cfg.band)
        out = (out - out.mean()) / out.std()
    return BvpSignal(out, frames.fs, method_tag="SSR", t0=frames.t0)
