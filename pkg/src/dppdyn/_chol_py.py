"""Pure NumPy implementation of the factorization hot kernels.

Same contract as the compiled module dppdyn._cholcore; one of the two is
selected at import time by dppdyn.backend. All functions operate in place
on a preallocated lower-triangular Cholesky buffer L whose active factor
is L[:k, :k] (real float64 or complex128, C-contiguous, real positive
diagonal).
"""

import numpy as np
from scipy.linalg import solve_triangular


def chol_append(L, k, col, diag):
    """Extend a k x k factor with one trailing row/column.

    col (length k) is overwritten with w = L^-1 col. Returns the Schur
    complement s = diag - ||w||^2; iff s > 0 the new row is written so the
    factor becomes (k+1) x (k+1).
    """
    if k > 0:
        w = solve_triangular(L[:k, :k], col, lower=True, check_finite=False)
        col[:] = w
        s = float(diag - np.real(np.vdot(w, w)))
    else:
        s = float(diag)
    if s > 0.0:
        if k > 0:
            L[k, :k] = np.conj(col)
        L[k, k] = np.sqrt(s)
    return s


def chol_drop(L, k, idx):
    """Delete position idx from a k x k factor, in place.

    Rows below idx shift up with their idx-th column folded back into the
    trailing block by a rank-one Cholesky update (always well posed).
    """
    m = k - idx - 1
    if m == 0:
        return
    v = L[idx + 1 : k, idx].copy()
    L[idx : k - 1, :idx] = L[idx + 1 : k, :idx]
    for c in range(m):
        L[idx + c : k - 1, idx + c] = L[idx + 1 + c : k, idx + 1 + c]
    # Rank-one update of the shifted trailing block T: T T* + v v*.
    for j in range(m):
        jj = idx + j
        a = L[jj, jj].real
        b = v[j]
        r = np.sqrt(a * a + abs(b) ** 2)
        c = a / r
        s = np.conj(b) / r
        L[jj, jj] = r
        if j + 1 < m:
            tail = L[jj + 1 : idx + m, jj].copy()
            L[jj + 1 : idx + m, jj] = c * tail + s * v[j + 1 : m]
            v[j + 1 : m] = c * v[j + 1 : m] - np.conj(s) * tail


def schur_batch(L, k, cols, diags, out):
    """Schur complements for m candidate extensions at once.

    cols (k x m) is overwritten with W = L^-1 cols; out[j] receives
    diags[j] - ||W[:, j]||^2.
    """
    if k == 0:
        out[:] = diags
        return
    w = solve_triangular(L[:k, :k], cols, lower=True, check_finite=False)
    cols[:] = w
    out[:] = diags - np.einsum("ij,ij->j", w.conj(), w).real


def backward_conj_solve(L, k, b):
    """In place b <- L^-H b (second half of a positive-definite solve)."""
    if k == 0:
        return
    b[:] = solve_triangular(
        L[:k, :k], b, lower=True, trans="C", check_finite=False
    )


def inv_diag(L, k, out):
    """Diagonal of (L L^H)^-1: squared column norms of L^-1."""
    if k == 0:
        return
    inv = solve_triangular(
        L[:k, :k], np.eye(k, dtype=L.dtype), lower=True, check_finite=False
    )
    out[:] = np.einsum("ij,ij->j", inv.conj(), inv).real


def projection_sample(H, m, uniforms, out):
    """Draw m sites from the projection kernel H by sequential conditioning.

    H (n x n, rank m) is destroyed. Selection sweeps sites in ascending
    index against uniforms[step]; after each pick the kernel is deflated by
    the rank-one conditional update.
    """
    for step in range(m):
        p = np.clip(np.real(np.diagonal(H)).copy(), 0.0, None)
        total = p.sum()
        cum = np.cumsum(p)
        target = uniforms[step] * total
        x = int(np.searchsorted(cum, target, side="right"))
        if x >= p.shape[0]:
            x = p.shape[0] - 1
        pivot = H[x, x].real
        colx = H[:, x].copy()
        rowx = H[x, :].copy()
        H -= np.outer(colx, rowx) / pivot
        # Exact-arithmetic zeros; clear the rounding residue so x cannot recur.
        H[x, :] = 0.0
        H[:, x] = 0.0
        out[step] = x
