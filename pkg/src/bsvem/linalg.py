"""Sparse linear algebra layer: block assembly, direct/iterative solves,
condition estimation and matrix/vector files.

Everything is CSR with sorted indices and deterministic given the same
inputs.  The primary solver is a sparse LU factorization that can be reused
across many right-hand sides (the parabolic stepper solves the same two
matrices thousands of times); restarted GMRES with an incomplete-LU
preconditioner is available as a fallback for systems too large to factor.
"""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularSystemError(Exception):
    """System solve failed: singular/ill-conditioned factorization."""


def spmv(a, x):
    """Sparse matrix-vector product."""
    return a @ np.asarray(x, dtype=float)


def add_scaled(a, b, c=1.0):
    """Return ``a + c * b`` as canonical CSR."""
    out = (a + c * b).tocsr()
    out.sort_indices()
    return out


def block_assemble(blocks):
    """Assemble a 2x2 (or larger) block layout into one CSR matrix.

    ``blocks`` is a nested list; ``None`` entries are zero blocks.
    """
    out = sp.bmat(blocks, format="csr")
    out.sort_indices()
    return out


class LinearSolver:
    """Factorized solver for repeated solves against one matrix.

    method "lu" uses a sparse LU with column reordering; "gmres" builds an
    incomplete-LU preconditioned restarted GMRES.  Every solve verifies the
    relative residual against ``tol`` and raises SingularSystemError when
    the factorization or the residual check fails.
    """

    def __init__(self, a, tol=1e-10, method="lu"):
        if method not in ("lu", "gmres"):
            raise ValueError("method must be 'lu' or 'gmres'")
        self.a = a.tocsc()
        self.tol = float(tol)
        self.method = method
        if method == "lu":
            try:
                self._lu = spla.splu(self.a)
            except RuntimeError as exc:
                raise SingularSystemError("LU factorization failed: %s" % exc) from None
        else:
            try:
                ilu = spla.spilu(self.a, drop_tol=1e-6, fill_factor=20)
            except RuntimeError as exc:
                raise SingularSystemError("ILU factorization failed: %s" % exc) from None
            n = self.a.shape[0]
            self._precond = spla.LinearOperator((n, n), ilu.solve)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if self.method == "lu":
            x = self._lu.solve(b)
        else:
            x, info = spla.gmres(
                self.a, b, rtol=self.tol, atol=0.0, restart=60,
                maxiter=200, M=self._precond,
            )
            if info != 0:
                raise SingularSystemError("GMRES did not converge (info=%d)" % info)
        resid = np.linalg.norm(self.a @ x - b)
        if not np.isfinite(resid) or resid > self.tol * max(1.0, np.linalg.norm(b)):
            raise SingularSystemError(
                "solution residual %.3e exceeds tolerance %.1e" % (resid, self.tol)
            )
        return x


def solve(a, b, tol=1e-10, method="auto"):
    """Solve ``a x = b`` once; ``method`` in {"auto", "lu", "gmres"}.

    "auto" tries the LU path and falls back to preconditioned GMRES when
    the factorization fails; a system that defeats both raises
    SingularSystemError.
    """
    if method in ("auto", "lu"):
        try:
            return LinearSolver(a, tol=tol, method="lu").solve(b)
        except SingularSystemError:
            if method == "lu":
                raise
    return LinearSolver(a, tol=tol, method="gmres").solve(b)


def condition_estimate(a, iters=128):
    """Two-sided power iteration estimate of the 2-norm condition number.

    The largest singular value comes from power iteration on ``A^T A``; the
    smallest from inverse iteration using one LU factorization.  The start
    vector is fixed, so the estimate is deterministic.
    """
    a = a.tocsc()
    n = a.shape[0]
    v = 1.5 + np.cos(0.7 * np.arange(n))
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = a.T @ (a @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise SingularSystemError("matrix is zero")
        v = w / nw
    sigma_max = np.linalg.norm(a @ v)

    try:
        lu = spla.splu(a)
    except RuntimeError as exc:
        raise SingularSystemError("LU factorization failed: %s" % exc) from None
    u = 1.5 + np.cos(0.7 * np.arange(n))
    u /= np.linalg.norm(u)
    lam = 0.0
    for _ in range(iters):
        w = lu.solve(lu.solve(u, trans="T"))
        lam = np.linalg.norm(w)
        if not np.isfinite(lam) or lam == 0.0:
            raise SingularSystemError("inverse iteration broke down")
        u = w / lam
    sigma_min = 1.0 / np.sqrt(lam)
    return float(sigma_max / sigma_min)


def write_matrix(a, path):
    """Write a sparse matrix in MatrixMarket coordinate format."""
    scipy.io.mmwrite(path, a.tocoo())


def read_matrix(path):
    """Read a MatrixMarket file as canonical CSR."""
    out = scipy.io.mmread(path).tocsr()
    out.sort_indices()
    return out


def write_vector(x, path):
    """Write a dense vector as one full-precision value per line."""
    with open(path, "w") as fh:
        for v in np.asarray(x, dtype=float):
            fh.write("%.17g\n" % v)


def read_vector(path):
    """Read a vector written by :func:`write_vector`."""
    with open(path) as fh:
        return np.array([float(line) for line in fh if line.strip()])
