"""Gradient contract and the finite-difference verification harness.

Every backward pass in the engine returns, for a real loss L and a complex
tensor p, the gradient G = dL/dRe(p) + i·dL/dIm(p), which equals 2·dL/dp*.
Steepest descent is -G. Real tensors carry plain real gradients.
"""

from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from ..core.exceptions import NumericalError, ShapeError
from ..schemas.report import GradCheckReport

# denominator floor of the relative error
REL_FLOOR = 1e-8


@dataclass(frozen=True, slots=True)
class CogradientPair:
    d_dz: npt.NDArray[np.complex128]
    d_dzbar: npt.NDArray[np.complex128]

    @classmethod
    def from_gradient(cls, grad: npt.NDArray) -> "CogradientPair":
        """View an engine gradient dL/dRe + i·dL/dIm as its Wirtinger pair."""
        grad = np.asarray(grad, dtype=np.complex128)
        return wirtinger_from_real_grads(grad.real, grad.imag)

    def steepest_descent(self) -> npt.NDArray[np.complex128]:
        return -2.0 * self.d_dzbar


def wirtinger_from_real_grads(df_dx: npt.ArrayLike, df_dy: npt.ArrayLike) -> CogradientPair:
    df_dx = np.asarray(df_dx, dtype=np.float64)
    df_dy = np.asarray(df_dy, dtype=np.float64)
    if df_dx.shape != df_dy.shape:
        raise ShapeError(f"real and imaginary partials differ in shape: {df_dx.shape} vs {df_dy.shape}")
    return CogradientPair(d_dz=0.5 * (df_dx - 1j * df_dy), d_dzbar=0.5 * (df_dx + 1j * df_dy))


def _evaluate(loss_fn: Callable[[], float]) -> float:
    value = float(loss_fn())
    if not np.isfinite(value):
        raise NumericalError(f"loss is not finite during gradient check: {value}")
    return value


def finite_diff_check(
    loss_fn: Callable[[], float],
    params: Mapping[str, npt.NDArray],
    analytic_grad: Mapping[str, npt.NDArray],
    op_name: str,
    eps: float = 1e-6,
    tol: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients with central differences on every real component.

    `loss_fn` closes over the arrays in `params`; each component is perturbed in
    place, evaluated at +eps and -eps, and restored to its exact original value.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    _evaluate(loss_fn)

    max_rel_err = 0.0
    count = 0
    for name, tensor in params.items():
        grad = np.asarray(analytic_grad[name])
        if grad.shape != tensor.shape:
            raise ShapeError(f"gradient for {name} has shape {grad.shape}, parameter has {tensor.shape}")
        flat = tensor.reshape(-1)
        if not np.shares_memory(flat, tensor):
            raise ShapeError(f"parameter {name} must be contiguous to be perturbed in place")
        grad_flat = grad.reshape(-1)
        axes = (1.0, 1j) if np.iscomplexobj(tensor) else (1.0,)
        for index in range(flat.size):
            original = flat[index]
            for axis in axes:
                flat[index] = original + eps * axis
                plus = _evaluate(loss_fn)
                flat[index] = original - eps * axis
                minus = _evaluate(loss_fn)
                flat[index] = original

                numeric = (plus - minus) / (2.0 * eps)
                analytic = float(grad_flat[index].real if axis == 1.0 else grad_flat[index].imag)
                err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_FLOOR)
                max_rel_err = max(max_rel_err, err)
                count += 1

    return GradCheckReport(op_name=op_name, max_rel_err=max_rel_err, param_count=count, tolerance=tol)
