"""Adam over complex parameters, applied to the real and imaginary planes independently."""

from collections import OrderedDict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from ..core.exceptions import NumericalError, ShapeError
from ..schemas.config import TrainConfig
from .ctensor import project_unitary


@dataclass(slots=True)
class AdamMoments:
    """First moments in `m`; second moments in `v` (real plane in .real, imaginary plane in .imag)."""

    m: "OrderedDict[str, np.ndarray]"
    v: "OrderedDict[str, np.ndarray]"

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "AdamMoments":
        return cls(
            m=OrderedDict((name, np.zeros_like(p)) for name, p in params.items()),
            v=OrderedDict((name, np.zeros_like(p)) for name, p in params.items()),
        )


def _planes_squared(g: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(g):
        return g.real**2 + 1j * g.imag**2
    return g * g


def _normalized(m_hat: np.ndarray, v_hat: np.ndarray, eps: float) -> np.ndarray:
    if np.iscomplexobj(m_hat):
        return m_hat.real / (np.sqrt(v_hat.real) + eps) + 1j * (m_hat.imag / (np.sqrt(v_hat.imag) + eps))
    return m_hat / (np.sqrt(v_hat) + eps)


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    moments: AdamMoments,
    t: int,
    cfg: TrainConfig,
    constrained: Iterable[str] = (),
) -> None:
    """One in-place Adam update at step t (1-based), then re-projection of the constrained matrices."""
    if t < 1:
        raise ValueError("Adam step counter starts at 1")
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter has {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for {name} at step {t}")

    beta1, beta2 = cfg.adam_beta1, cfg.adam_beta2
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in params.items():
        g = grads[name]
        m, v = moments.m[name], moments.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * _planes_squared(g)
        p -= cfg.learning_rate * _normalized(m / bc1, v / bc2, cfg.adam_eps)

    for name in constrained:
        params[name][...] = project_unitary(params[name])
