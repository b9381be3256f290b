"""Pure numpy versions of the compiled kernels (used when the extension is absent)."""
import numpy as np


def direct_convolve(K, g):
    """``out[..., i] = sum_j K[(i - j) mod 2N] g[..., j]`` over three axes.

    Parameters
    ----------
    K : ndarray, shape (2N, 2N, 2N)
        Kernel on the doubled difference grid in FFT order.
    g : ndarray, shape (..., N, N, N)
    """
    N = g.shape[-1]
    idx = np.arange(N)
    diff = (idx[:, None] - idx[None, :]) % (2 * N)  # (i, j)
    lead = g.shape[:-3]
    gf = g.reshape((-1, N, N, N))
    out = np.zeros_like(gf, dtype=float)
    for i1 in range(N):
        Ki = K[diff[i1]]  # (j1, 2N, 2N)
        for i2 in range(N):
            Kij = Ki[:, diff[i2]]  # (j1, j2, 2N)
            block = Kij[:, :, diff]  # (j1, j2, i3, j3)
            out[:, i1, i2, :] = np.einsum("abij,nabj->ni", block, gf)
    return out.reshape(lead + (N, N, N))


def dissipation_sum(points, F, gradlog, gamma):
    """Double sum ``1/2 sum_{i,j} F_i F_j d_ij^T a(v_i - v_j) d_ij``.

    Parameters
    ----------
    points : ndarray, shape (n, 3)
    F : ndarray, shape (n,)
    gradlog : ndarray, shape (n, 3)
        Discrete ``grad log F`` at the nodes; ``d_ij = gradlog_i - gradlog_j``.
    gamma : float
        Kernel exponent; the diagonal ``i = j`` contributes nothing.
    """
    n = len(F)
    total = 0.0
    chunk = max(1, 400000 // max(n, 1))
    for s in range(0, n, chunk):
        sl = slice(s, min(n, s + chunk))
        z = points[sl, None, :] - points[None, :, :]
        d = gradlog[sl, None, :] - gradlog[None, :, :]
        r2 = np.einsum("abi,abi->ab", z, z)
        zd = np.einsum("abi,abi->ab", z, d)
        dd = np.einsum("abi,abi->ab", d, d)
        safe = np.where(r2 == 0, 1.0, r2)
        # d^T a d = |z|^gamma (|z|^2 |d|^2 - (z.d)^2)
        q = np.where(r2 == 0, 0.0, safe ** (0.5 * gamma) * (safe * dd - zd * zd))
        total += float(np.sum(F[sl, None] * F[None, :] * q))
    return 0.5 * total
