"""Dense complex third-order tensor algebra.

Fiber-ordering convention, fixed once and used everywhere in this package:
a tensor of dims (d1, d2, d3) is stored so that the first index runs fastest
(``ndarray.ravel(order="F")`` gives the linear layout), and the mode-n
unfolding places the mode-n fibers as columns with the remaining indices
ordered smallest-mode-fastest. Under this convention a PARAFAC tensor with
factors (F1, F2, F3) satisfies

    unfold(t, 1) = F1 @ khatri_rao(F3, F2).T
    unfold(t, 2) = F2 @ khatri_rao(F3, F1).T
    unfold(t, 3) = F3 @ khatri_rao(F2, F1).T

Mixing this convention with another one (e.g. building data with one and
unfolding with another) is the classic failure mode of ALS code; keep every
reshape in this module.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class RankDeficiencyWarning(UserWarning):
    """Least-squares coefficient matrix was rank deficient at the SVD cutoff."""


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Columnwise Kronecker product.

    Parameters
    ----------
    a : (d_a, L) array
    b : (d_b, L) array

    Returns
    -------
    (d_a * d_b, L) array whose column l is ``kron(a[:, l], b[:, l])``, i.e.
    the b index runs fastest.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"column counts must match, got {a.shape} and {b.shape}")
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def unfold(tensor: np.ndarray, mode: int) -> np.ndarray:
    """Mode-n unfolding of a third-order tensor.

    ``mode`` is 1, 2 or 3. The result has shape (d_mode, prod of the other
    dims) with the remaining indices varying smallest-mode-fastest along the
    columns (see module docstring for the factor identities this induces).
    """
    tensor = np.asarray(tensor)
    if tensor.ndim != 3:
        raise ValueError(f"expected a third-order tensor, got ndim={tensor.ndim}")
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    return np.moveaxis(tensor, mode - 1, 0).reshape(tensor.shape[mode - 1], -1, order="F")


def fold(matrix: np.ndarray, mode: int, dims: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild the (d1, d2, d3) tensor from its
    mode-n unfolding."""
    matrix = np.asarray(matrix)
    if mode not in (1, 2, 3):
        raise ValueError(f"mode must be 1, 2 or 3, got {mode}")
    if len(dims) != 3:
        raise ValueError("dims must have three entries")
    rest = [dims[i] for i in range(3) if i != mode - 1]
    if matrix.shape != (dims[mode - 1], rest[0] * rest[1]):
        raise ValueError(f"matrix shape {matrix.shape} inconsistent with dims {dims} at mode {mode}")
    moved = matrix.reshape(dims[mode - 1], rest[0], rest[1], order="F")
    return np.moveaxis(moved, 0, mode - 1)


@dataclass(frozen=True)
class FactorTriple:
    """PARAFAC factors (d_n x L each) plus per-component weights (length L)."""

    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        cols = {self.f1.shape[1], self.f2.shape[1], self.f3.shape[1]}
        if len(cols) != 1:
            raise ValueError("factor matrices must share their column count")
        if self.weights is None:
            object.__setattr__(self, "weights", np.ones(self.f1.shape[1], dtype=complex))
        else:
            object.__setattr__(self, "weights", np.asarray(self.weights, dtype=complex))
        if self.weights.shape != (self.f1.shape[1],):
            raise ValueError("weights length must equal the factor column count")

    @property
    def rank(self) -> int:
        return self.f1.shape[1]


def parafac_reconstruct(factors: FactorTriple) -> np.ndarray:
    """Dense tensor with entry (i1, i2, i3) = sum_l w_l F1[i1,l] F2[i2,l] F3[i3,l]."""
    return np.einsum(
        "l,il,jl,kl->ijk", factors.weights, factors.f1, factors.f2, factors.f3
    )


def _svd_pinv(a: np.ndarray) -> tuple[np.ndarray, bool]:
    """Moore-Penrose pseudo-inverse via SVD with the standard relative cutoff
    max(shape) * eps * sigma_max. Returns (pinv, rank_deficient)."""
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(a.shape[::-1], dtype=a.dtype), True
    cutoff = max(a.shape) * np.finfo(s.dtype).eps * s[0]
    keep = s > cutoff
    rank = int(np.count_nonzero(keep))
    inv = (vh[keep].conj().T / s[keep]) @ u[:, keep].conj().T
    return inv, rank < min(a.shape)


def ls_solve(coeff: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution X of ``X @ coeff ~ rhs``.

    Computed through an SVD pseudo-inverse; singular values below
    ``max(coeff.shape) * eps * sigma_max`` are truncated. Rank deficiency is
    reported through a :class:`RankDeficiencyWarning`, not an exception, so
    iterative callers can proceed.
    """
    coeff = np.asarray(coeff)
    rhs = np.asarray(rhs)
    if coeff.ndim != 2 or rhs.ndim != 2 or rhs.shape[1] != coeff.shape[1]:
        raise ValueError(f"inconsistent shapes: coeff {coeff.shape}, rhs {rhs.shape}")
    pinv, deficient = _svd_pinv(coeff)
    if deficient:
        warnings.warn(
            f"coefficient matrix of shape {coeff.shape} is rank deficient",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return rhs @ pinv


def ls_solve_left(coeff: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution X of ``coeff @ X ~ rhs``."""
    return ls_solve(np.asarray(coeff).T, np.asarray(rhs).T).T
