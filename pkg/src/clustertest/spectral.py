"""Exact linear algebra: walk distributions, Gram matrices, eigenvalues.

Two routes compute ``D^{-1/2} M^t 1_a``:

* ``"power"`` applies the lazy walk ``t`` times to sparse indicator columns
  (column sums stay 1 throughout);
* ``"eig"`` uses the eigendecomposition of the symmetric matrix
  ``I - L/2 = D^{-1/2} ((D + A)/2) D^{-1/2}``, for which
  ``D^{-1/2} M^t 1_a = (I - L/2)^t D^{-1/2} 1_a``.  This is what makes the
  long walks the tester asks for (hundreds to thousands of steps) cheap.

Eigenvalues of small symmetric matrices come from a cyclic Jacobi solver.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .graph import Graph

DENSE_GUARD = 5000
JACOBI_MAX_DIM = 64
_POWER_WORK_LIMIT = 5e7

_eig_cache: "weakref.WeakKeyDictionary[Graph, tuple[np.ndarray, np.ndarray]]" = weakref.WeakKeyDictionary()


class AsymmetricMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class WalkColumns:
    """Columns ``D^{-1/2} M^t 1_a`` for each ``a`` in the ordered source list."""

    sources: np.ndarray
    t: int
    columns: np.ndarray


@dataclass(frozen=True)
class SpectralSummary:
    dimension: int
    eigenvalues: np.ndarray  # descending
    k_plus_1: float


def lazy_step(g: Graph, p: np.ndarray) -> np.ndarray:
    """One application of ``M = (I + A D^{-1}) / 2`` to the columns of ``p``."""
    deg = g.deg.astype(float)
    scaled = p / deg[:, None] if p.ndim == 2 else p / deg
    return 0.5 * (p + g.adjacency() @ scaled)


def walk_distributions(g: Graph, sources, t: int) -> np.ndarray:
    """Dense ``n x s`` matrix ``M^t S`` by repeated sparse application."""
    if t < 0:
        raise ValueError("t must be non-negative")
    sources = np.asarray(sources, dtype=np.int64)
    p = np.zeros((g.n, len(sources)))
    p[sources, np.arange(len(sources))] = 1.0
    for _ in range(t):
        p = lazy_step(g, p)
    return p


def lazy_walk_eigensystem(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs ``(w, V)`` of ``I - L/2``; cached per graph."""
    if g.n > DENSE_GUARD:
        raise ValueError(f"dense eigensolve refused for n={g.n} > {DENSE_GUARD}")
    cached = _eig_cache.get(g)
    if cached is None:
        inv_sqrt = 1.0 / np.sqrt(g.deg.astype(float))
        a = g.adjacency().toarray()
        mbar = 0.5 * (np.eye(g.n) + inv_sqrt[:, None] * a * inv_sqrt[None, :])
        w, v = np.linalg.eigh(mbar)
        cached = (np.clip(w, 0.0, 1.0), v)
        _eig_cache[g] = cached
    return cached


def _choose_method(g: Graph, n_sources: int, t: int, method: str) -> str:
    if method != "auto":
        return method
    work = t * (g.vol + g.n) * max(n_sources, 1)
    return "power" if work <= _POWER_WORK_LIMIT or g.n > DENSE_GUARD else "eig"


def exact_walk_columns(g: Graph, sources, t: int, method: str = "auto") -> WalkColumns:
    sources = np.asarray(sources, dtype=np.int64)
    if t < 0:
        raise ValueError("t must be non-negative")
    inv_sqrt = 1.0 / np.sqrt(g.deg.astype(float))
    method = _choose_method(g, len(np.unique(sources)), t, method)
    if method == "power":
        cols = walk_distributions(g, sources, t) * inv_sqrt[:, None]
    elif method == "eig":
        w, v = lazy_walk_eigensystem(g)
        cols = (v * w**t) @ (v[sources].T * inv_sqrt[sources])
    else:
        raise ValueError(f"unknown method {method!r}")
    return WalkColumns(sources=sources, t=t, columns=cols)


def gram(cols: WalkColumns | np.ndarray) -> np.ndarray:
    c = cols.columns if isinstance(cols, WalkColumns) else np.asarray(cols)
    if not np.all(np.isfinite(c)):
        raise ValueError("walk columns must be finite")
    out = c.T @ c
    return 0.5 * (out + out.T)


def exact_gram(g: Graph, sources, t: int, method: str = "auto") -> np.ndarray:
    """Gram matrix of the walk columns for ``sources``.

    With ``method="eig"`` the entries are formed as
    ``sum_i w_i^{2t} v_i(a) v_i(b) / sqrt(deg a deg b)`` without building the
    ``n x s`` columns.
    """
    sources = np.asarray(sources, dtype=np.int64)
    method = _choose_method(g, len(np.unique(sources)), t, method)
    if method != "eig":
        return gram(exact_walk_columns(g, sources, t, method))
    w, v = lazy_walk_eigensystem(g)
    rows = v[sources] * (1.0 / np.sqrt(g.deg[sources].astype(float)))[:, None]
    out = (rows * w ** (2 * t)) @ rows.T
    return 0.5 * (out + out.T)


def jacobi_eigenvalues(m: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.

    Sweeps visit ``(p, q)`` pairs in row-major order and stop once the
    off-diagonal Frobenius norm is at most ``tol`` times the matrix norm.
    """
    a = np.array(m, dtype=float, copy=True)
    n = a.shape[0]
    scale = np.linalg.norm(a)
    if n <= 1 or scale == 0.0:
        return np.sort(np.diag(a))[::-1]
    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(np.triu(a, 1) ** 2) * 2.0)
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                h = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * abs(h):
                    t = apq / h
                else:
                    theta = h / (2.0 * apq)
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    return np.sort(np.diag(a))[::-1]


def symmetric_eigenvalues(m: np.ndarray, method: str = "auto") -> np.ndarray:
    """Descending eigenvalues; Jacobi up to ``JACOBI_MAX_DIM``, LAPACK above."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(np.abs(m).max(initial=0.0), 1.0)
    if np.abs(m - m.T).max(initial=0.0) > 1e-10 * scale:
        raise AsymmetricMatrixError("matrix is not symmetric within 1e-10")
    if method == "auto":
        method = "jacobi" if m.shape[0] <= JACOBI_MAX_DIM else "lapack"
    if method == "jacobi":
        return jacobi_eigenvalues(m)
    if method == "lapack":
        return np.linalg.eigvalsh(0.5 * (m + m.T))[::-1]
    raise ValueError(f"unknown method {method!r}")


def kth_largest_eigenvalue(m: np.ndarray, k: int, method: str = "auto") -> float:
    m = np.asarray(m, dtype=float)
    if not 1 <= k <= m.shape[0]:
        raise IndexError(f"k={k} out of range for dimension {m.shape[0]}")
    return float(symmetric_eigenvalues(m, method)[k - 1])


def multiset_kth_eigenvalue(unique_gram: np.ndarray, multiplicity, k: int, method: str = "auto") -> float:
    """``mu_k`` of the Gram of a multiset, from the Gram of its distinct elements.

    If ``P`` duplicates rows, ``P^T B P`` and ``W^{1/2} B W^{1/2}``
    (``W`` = multiplicities) share their nonzero spectrum; the remaining
    eigenvalues of the full PSD matrix are zero.
    """
    w = np.sqrt(np.asarray(multiplicity, dtype=float))
    reduced = w[:, None] * unique_gram * w[None, :]
    if k > reduced.shape[0]:
        return 0.0
    return kth_largest_eigenvalue(0.5 * (reduced + reduced.T), k, method)


def summarize(m: np.ndarray, k: int, method: str = "auto") -> SpectralSummary:
    ev = symmetric_eigenvalues(m, method)
    return SpectralSummary(dimension=len(ev), eigenvalues=ev, k_plus_1=float(ev[k]) if k < len(ev) else 0.0)


def normalized_laplacian(g: Graph) -> np.ndarray:
    inv_sqrt = 1.0 / np.sqrt(g.deg.astype(float))
    a = g.adjacency().toarray()
    return np.eye(g.n) - inv_sqrt[:, None] * a * inv_sqrt[None, :]


def laplacian_spectrum(g: Graph, count: int | None = None) -> np.ndarray:
    """Smallest ``count`` eigenvalues of the normalized Laplacian, ascending."""
    if g.n > DENSE_GUARD:
        raise ValueError(f"dense eigensolve refused for n={g.n} > {DENSE_GUARD}")
    if np.any(g.deg == 0):
        raise ValueError("normalized Laplacian needs min degree >= 1")
    count = g.n if count is None else min(int(count), g.n)
    lap = normalized_laplacian(g)
    ev = scipy.linalg.eigh(lap, eigvals_only=True, subset_by_index=[0, count - 1])
    return np.clip(ev, 0.0, 2.0)
