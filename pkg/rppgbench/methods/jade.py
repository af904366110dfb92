"""Blind source separation by joint approximate diagonalization of
fourth-order cumulant matrices (JADE), for real-valued signals.
"""

import numpy as np

from rppgbench.common import lexicographic_sign

MAX_SWEEPS = 100


def whiten(X: np.ndarray, m: int):
    """Return the whitening matrix (m, n) and the whitened data (m, T)."""
    T = X.shape[1]
    D, U = np.linalg.eigh(X @ X.T / T)
    order = np.argsort(D)[::-1][:m]
    U = lexicographic_sign(U[:, order])
    B = (U / np.sqrt(D[order])).T
    return B, B @ X


def cumulant_matrices(X: np.ndarray) -> np.ndarray:
    """Stack the m(m+1)/2 cumulant matrices of whitened data X (m, T) side by side."""
    m, T = X.shape
    Xt = X.T
    nbcm = m * (m + 1) // 2
    CM = np.zeros((m, m * nbcm))
    R = np.eye(m)
    cols = np.arange(m)
    for im in range(m):
        xim = Xt[:, im]
        Qij = ((xim * xim)[:, None] * Xt).T @ Xt / T - R - 2 * np.outer(R[:, im], R[:, im])
        CM[:, cols] = Qij
        cols = cols + m
        for jm in range(im):
            xijm = xim * Xt[:, jm]
            Qij = (
                np.sqrt(2) * (xijm[:, None] * Xt).T @ Xt / T
                - np.outer(R[:, im], R[:, jm])
                - np.outer(R[:, jm], R[:, im])
            )
            CM[:, cols] = Qij
            cols = cols + m
    return CM


def joint_diagonalize(CM: np.ndarray, T: int, max_sweeps: int = MAX_SWEEPS) -> np.ndarray:
    """Givens sweeps until every rotation angle falls below 1e-6 / sqrt(T)."""
    m = CM.shape[0]
    nbcm = CM.shape[1] // m
    V = np.eye(m)
    threshold = 1.0e-6 / np.sqrt(T)
    encore = True
    sweep = 0
    while encore and sweep < max_sweeps:
        encore = False
        sweep += 1
        for p in range(m - 1):
            for q in range(p + 1, m):
                Ip = np.arange(p, m * nbcm, m)
                Iq = np.arange(q, m * nbcm, m)
                g = np.vstack([CM[p, Ip] - CM[q, Iq], CM[p, Iq] + CM[q, Ip]])
                gg = g @ g.T
                ton = gg[0, 0] - gg[1, 1]
                toff = gg[0, 1] + gg[1, 0]
                theta = 0.5 * np.arctan2(toff, ton + np.sqrt(ton * ton + toff * toff))
                if abs(theta) > threshold:
                    encore = True
                    c, s = np.cos(theta), np.sin(theta)
                    G = np.array([[c, -s], [s, c]])
                    pair = [p, q]
                    V[:, pair] = V[:, pair] @ G
                    CM[pair, :] = G.T @ CM[pair, :]
                    cp = CM[:, Ip].copy()
                    cq = CM[:, Iq].copy()
                    CM[:, Ip] = c * cp + s * cq
                    CM[:, Iq] = -s * cp + c * cq
    return V


def jade(X: np.ndarray, m=None) -> np.ndarray:
    """Estimate the (m, n) separating matrix of the mixtures X (n, T).

    Rows are ordered by decreasing energy of the matching mixing column,
    and signed so that the first column is non-negative.
    """
    X = np.asarray(X, dtype=float)
    n, T = X.shape
    m = m or n
    X = X - X.mean(axis=1, keepdims=True)
    B, Xw = whiten(X, m)
    V = joint_diagonalize(cumulant_matrices(Xw), T)
    B = V.T @ B
    A = np.linalg.pinv(B)
    keys = np.argsort((A * A).sum(axis=0))[::-1]
    B = B[keys]
    signs = np.sign(np.sign(B[:, 0]) + 0.1)
    return signs[:, None] * B
