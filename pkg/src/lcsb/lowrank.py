"""Truncated SVD compression of learning curves and data-driven rank choice.

The right singular vectors are obtained from the symmetric eigenproblem of
the Gram matrix S^T S, solved with a cyclic Jacobi method in round-robin
(parallel) ordering so each sweep is a handful of vectorised updates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_K = 6
DEFAULT_K_MAX = 20


@dataclass(frozen=True, eq=False)
class SvdBasis:
    k: int
    vectors: np.ndarray  # (k, E_max), orthonormal rows
    singular_values: np.ndarray  # (k,), nonincreasing

    def __post_init__(self):
        v = np.array(self.vectors, dtype=float)
        s = np.array(self.singular_values, dtype=float)
        if v.ndim != 2 or v.shape[0] != self.k or len(s) != self.k:
            raise ValueError("basis shape does not match k")
        if not 1 <= self.k <= v.shape[1]:
            raise ValueError(f"k={self.k} outside [1, {v.shape[1]}]")
        v.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "singular_values", s)

    @property
    def e_max(self) -> int:
        return self.vectors.shape[1]

    def truncate(self, k: int) -> "SvdBasis":
        if not 1 <= k <= self.k:
            raise ValueError(f"cannot truncate a rank-{self.k} basis to k={k}")
        return SvdBasis(k, self.vectors[:k], self.singular_values[:k])


def _round_robin(n: int):
    """Pairings of the circle method: n-1 rounds (n even) of n/2 disjoint pairs."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p = np.array(players[: m // 2])
        q = np.array(players[m // 2:][::-1])
        keep = (p < n) & (q < n)
        rounds.append((p[keep], q[keep]))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(a: np.ndarray, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors-as-columns) sorted by descending
    eigenvalue.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    rounds = _round_robin(n)
    eps = np.finfo(float).eps
    # couplings below this are rounding noise and cannot move any eigenvalue
    floor = eps * np.linalg.norm(a) + np.finfo(float).tiny
    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            apq = a[p, q]
            # rotate only where the coupling is significant relative to the diagonal
            active = np.abs(apq) > eps * np.sqrt(np.abs(a[p, p] * a[q, q])) + floor
            if not active.any():
                continue
            rotated = True
            p, q, apq = p[active], q[active], apq[active]
            tau = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        if not rotated:
            break
    w = a.diagonal().copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    idx = np.abs(vectors).argmax(axis=1)
    signs = np.sign(vectors[np.arange(len(vectors)), idx])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def full_svd(curve_matrix) -> SvdBasis:
    """All min(N, E_max) right singular vectors of the curve matrix."""
    s = np.asarray(curve_matrix, dtype=float)
    if s.ndim != 2 or s.shape[0] == 0:
        raise ValueError("curve matrix must be a nonempty 2-D array")
    if not np.all(np.isfinite(s)):
        raise ValueError("curve matrix contains non-finite values")
    w, vecs = jacobi_eigh(s.T @ s)
    r = min(s.shape)
    sv = np.sqrt(np.clip(w[:r], 0.0, None))
    return SvdBasis(r, _fix_signs(vecs[:, :r].T), sv)


def truncated_svd(curve_matrix, k: int) -> SvdBasis:
    s = np.asarray(curve_matrix, dtype=float)
    if s.ndim != 2:
        raise ValueError("curve matrix must be 2-D")
    if not 1 <= k <= min(s.shape):
        raise ValueError(f"k={k} must lie in [1, min(N, E_max)={min(s.shape)}]")
    return full_svd(s).truncate(k)


def compress(curve, basis: SvdBasis) -> np.ndarray:
    """Coefficients of one curve (or a stack of curves) in the basis.

    Coefficients are unbounded reals; only decompress clips.
    """
    c = np.asarray(curve, dtype=float)
    if c.shape[-1] != basis.e_max:
        raise ValueError(f"curve length {c.shape[-1]} != basis E_max {basis.e_max}")
    return c @ basis.vectors.T


def decompress(coefficients, basis: SvdBasis, clip: bool = True) -> np.ndarray:
    z = np.asarray(coefficients, dtype=float)
    if z.shape[-1] != basis.k:
        raise ValueError(f"expected {basis.k} coefficients, got {z.shape[-1]}")
    out = z @ basis.vectors
    return np.clip(out, 0.0, 1.0) if clip else out


def reconstruct(curves, basis: SvdBasis, clip: bool = True) -> np.ndarray:
    """(d_k o c_k)(y): the de-noised version of each curve."""
    return decompress(compress(curves, basis), basis, clip=clip)


def rank_mse_profile(train_curves, val_groups: Sequence, k_max: int = DEFAULT_K_MAX) -> np.ndarray:
    """Validation MSE of reconstructions for k = 1..k_max.

    Each validation curve is reconstructed and compared with the mean of
    the *other* seeds of its architecture, an estimate of the mean curve
    that is independent of the curve being reconstructed.
    """
    groups = [np.asarray(g, dtype=float) for g in val_groups]
    if not groups or any(g.ndim != 2 or len(g) < 2 for g in groups):
        raise ValueError("rank selection needs validation architectures with at least 2 seeds each")
    basis = full_svd(train_curves)
    k_max = min(k_max, basis.k)
    curves = np.vstack(groups)
    loo = np.vstack([(g.sum(axis=0, keepdims=True) - g) / (len(g) - 1) for g in groups])
    coeffs = compress(curves, basis)
    mse = np.empty(k_max)
    for k in range(1, k_max + 1):
        rec = np.clip(coeffs[:, :k] @ basis.vectors[:k], 0.0, 1.0)
        mse[k - 1] = np.mean((rec - loo) ** 2)
    return mse


def select_rank(train_curves, val_groups: Sequence, k_max: int = DEFAULT_K_MAX) -> int:
    """Rank with the lowest validation MSE; near-ties go to the smaller k."""
    mse = rank_mse_profile(train_curves, val_groups, k_max)
    scale = np.mean([np.mean(np.asarray(g) ** 2) for g in val_groups])
    tol = 1e-10 * max(scale, 1e-300)
    return int(np.flatnonzero(mse <= mse.min() + tol)[0]) + 1
