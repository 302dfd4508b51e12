"""Complex dense linear algebra on numpy complex128 arrays.

Vectors are 1-D arrays, or 2-D arrays whose leading axis is a batch of vectors.
Matrices are 2-D, row-major (numpy C order), rows = outputs, cols = inputs.
"""

import numpy as np
import numpy.typing as npt
from scipy import linalg

from ..core.exceptions import DegeneracyError, NumericalError, ShapeError

CVector = npt.NDArray[np.complex128]
CMatrix = npt.NDArray[np.complex128]
RVector = npt.NDArray[np.float64]

# smallest singular value, relative to the largest, accepted by project_unitary
RANK_TOL = 1e-12


def as_cvector(data: npt.ArrayLike) -> CVector:
    out = np.asarray(data, dtype=np.complex128)
    if out.ndim not in (1, 2):
        raise ShapeError(f"expected a vector or a batch of vectors, got shape {out.shape}")
    return out


def as_cmatrix(data: npt.ArrayLike) -> CMatrix:
    out = np.ascontiguousarray(data, dtype=np.complex128)
    if out.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {out.shape}")
    return out


def cmatvec(W: CMatrix, x: CVector) -> CVector:
    """W·x for a single vector, or row-wise for a batch of vectors."""
    if W.ndim != 2 or x.shape[-1] != W.shape[1]:
        raise ShapeError(f"cannot multiply matrix {W.shape} by vector(s) {x.shape}")
    return x @ W.T


def hadamard(a: npt.NDArray, b: npt.NDArray) -> npt.NDArray:
    if a.shape != b.shape:
        raise ShapeError(f"hadamard operands differ in shape: {a.shape} vs {b.shape}")
    return a * b


def hermitian(W: CMatrix) -> CMatrix:
    return np.ascontiguousarray(W.conj().T)


def real_block(W: CMatrix) -> npt.NDArray[np.float64]:
    """The 2N real representation [[Re W, -Im W], [Im W, Re W]] acting on stacked (Re x, Im x)."""
    return np.block([[W.real, -W.imag], [W.imag, W.real]])


def unitarity_error(W: CMatrix) -> float:
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ShapeError(f"unitarity is defined for square matrices, got {W.shape}")
    gram = hermitian(W) @ W
    return float(np.linalg.norm(gram - np.eye(W.shape[0]), "fro"))


def project_unitary(W: CMatrix) -> CMatrix:
    """Nearest unitary matrix in Frobenius norm: the unitary polar factor of W."""
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ShapeError(f"project_unitary needs a square matrix, got {W.shape}")
    singular = np.linalg.svd(W, compute_uv=False)
    if not np.all(np.isfinite(singular)):
        raise NumericalError("project_unitary: matrix has non-finite entries")
    if singular[-1] <= RANK_TOL * max(singular[0], 1.0):
        raise DegeneracyError(
            f"project_unitary: matrix is rank deficient (smallest singular value {singular[-1]:.3e})"
        )
    unitary, _ = linalg.polar(W, side="right")
    return np.ascontiguousarray(unitary, dtype=np.complex128)


def ensure_finite(name: str, value: npt.NDArray | float) -> None:
    if not np.all(np.isfinite(value)):
        raise NumericalError(f"non-finite values in {name}")
