"""Dense reference computations for small instances.

The matrix here is built in the monomial basis of X_N, independently of the
kernel sums used by :class:`~mlmoment.operators.MomentOperator`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularNormalMatrixError
from .operators import MomentOperator
from .sampling import FrameBounds, SamplingSet
from .spaces import Spectrum

__all__ = ["DenseOperator", "dense_frame_bounds", "dense_least_squares", "densify"]


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """M[j, N + n] = s_N sqrt(w_j) exp(2 pi i n t_j)."""

    matrix: np.ndarray
    level: int
    sampling: SamplingSet
    scale: float

    def __matmul__(self, a):
        if isinstance(a, Spectrum):
            a = a.coefficients
        return self.matrix @ a

    def unscaled(self) -> np.ndarray:
        return self.matrix / self.scale


def densify(op: MomentOperator) -> DenseOperator:
    N = op.level
    n = np.arange(-N, N + 1)
    t = op.sampling.points
    mat = op.scale * np.sqrt(op.sampling.weights)[:, None] * np.exp(2j * np.pi * np.outer(t, n))
    return DenseOperator(mat, N, op.sampling, op.scale)


def dense_least_squares(D: DenseOperator, y) -> Spectrum:
    """Minimizer of ||D a - y|| from the normal equations D^H D a = D^H y."""
    M = D.matrix
    gram = M.conj().T @ M
    # frame condition <=> gram positive definite; reject numerically singular cases
    if np.linalg.cond(gram) > 1e13:
        raise SingularNormalMatrixError("normal matrix is singular: the sampling family is not a frame")
    return Spectrum(np.linalg.solve(gram, M.conj().T @ np.asarray(y)))


def dense_frame_bounds(D: DenseOperator) -> FrameBounds:
    """Extreme eigenvalues of the unscaled D^H D."""
    U = D.unscaled()
    eig = np.linalg.eigvalsh(U.conj().T @ U)
    return FrameBounds(float(eig[0]), float(eig[-1]), "dense")
