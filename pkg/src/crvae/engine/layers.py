"""Complex-valued layers with hand-derived backward passes.

Inputs are single vectors (n,) or batches (B, n). Backward functions take the
upstream gradient G = dL/dRe + i·dL/dIm of the layer output and return the
same kind of gradient for inputs and parameters; parameter gradients are
summed over the batch.
"""

from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
from scipy.special import expit

from ..core.exceptions import ShapeError
from .ctensor import CMatrix, CVector, RVector, cmatvec, project_unitary

MODSIGMOID_ALPHA = 0.5
GATE_BIAS_INIT = 4.0
# gate values are kept to the open interval (0, 1) in float64
GATE_LOW = float(np.finfo(np.float64).tiny)
GATE_HIGH = float(np.nextafter(1.0, 0.0))

Grads = dict[str, np.ndarray]


def _batch_rows(a: np.ndarray) -> np.ndarray:
    return a.reshape(-1, a.shape[-1])


def _weight_grad(g: np.ndarray, x: np.ndarray) -> CMatrix:
    return _batch_rows(g).T @ _batch_rows(x).conj()


def _bias_grad(g: np.ndarray) -> np.ndarray:
    return _batch_rows(g).sum(axis=0)


# ── parameter bundles ─────────────────────────────────────────────────────────


@dataclass(slots=True)
class DenseParams:
    W: CMatrix
    b: CVector

    def __post_init__(self) -> None:
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ShapeError(f"dense parameters inconsistent: W {self.W.shape}, b {self.b.shape}")

    def named(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "b": self.b}


@dataclass(slots=True)
class ModReluParams:
    b: RVector

    def named(self) -> dict[str, np.ndarray]:
        return {"b": self.b}


@dataclass(slots=True)
class RnnParams:
    W: CMatrix
    V: CMatrix
    b: CVector
    modrelu_b: RVector

    def named(self) -> dict[str, np.ndarray]:
        return {"W": self.W, "V": self.V, "b": self.b, "modrelu_b": self.modrelu_b}


@dataclass(slots=True)
class GruParams:
    W: CMatrix
    V: CMatrix
    b: CVector
    W_r: CMatrix
    V_r: CMatrix
    b_r: CVector
    W_z: CMatrix
    V_z: CMatrix
    b_z: CVector
    modrelu_b: RVector

    def __post_init__(self) -> None:
        n_h, n_x = self.V.shape
        for name in ("W", "W_r", "W_z"):
            if getattr(self, name).shape != (n_h, n_h):
                raise ShapeError(f"GRU {name} must be {n_h}x{n_h}, got {getattr(self, name).shape}")
        for name in ("V_r", "V_z"):
            if getattr(self, name).shape != (n_h, n_x):
                raise ShapeError(f"GRU {name} must be {n_h}x{n_x}, got {getattr(self, name).shape}")
        for name in ("b", "b_r", "b_z", "modrelu_b"):
            if getattr(self, name).shape != (n_h,):
                raise ShapeError(f"GRU {name} must have {n_h} entries, got {getattr(self, name).shape}")

    @property
    def n_hidden(self) -> int:
        return self.W.shape[0]

    @property
    def n_input(self) -> int:
        return self.V.shape[1]

    def named(self) -> dict[str, np.ndarray]:
        return {
            "W": self.W,
            "V": self.V,
            "b": self.b,
            "W_r": self.W_r,
            "V_r": self.V_r,
            "b_r": self.b_r,
            "W_z": self.W_z,
            "V_z": self.V_z,
            "b_z": self.b_z,
            "modrelu_b": self.modrelu_b,
        }


@dataclass(slots=True)
class GruState:
    h: CVector


@dataclass(frozen=True, slots=True)
class GateOverride:
    """Pin gate outputs to constants; a pinned gate passes no gradient to its parameters."""

    reset: float | None = None
    update: float | None = None


# ── dense ─────────────────────────────────────────────────────────────────────


def dense_forward(p: DenseParams, x: CVector) -> CVector:
    return cmatvec(p.W, x) + p.b


def dense_backward(p: DenseParams, x: CVector, g: CVector) -> tuple[CVector, Grads]:
    return g @ p.W.conj(), {"W": _weight_grad(g, x), "b": _bias_grad(g)}


# ── activations ───────────────────────────────────────────────────────────────


def modrelu(z: CVector, b: RVector) -> CVector:
    """(|z| + b)·z/|z| where |z| + b > 0, zero elsewhere and at z = 0."""
    if z.shape[-1] != b.shape[-1]:
        raise ShapeError(f"modrelu bias has {b.shape[-1]} entries, input has {z.shape[-1]}")
    r = np.abs(z)
    active = (r + b > 0) & (r > 0)
    scale = np.divide(r + b, r, out=np.zeros_like(r), where=active)
    return z * scale


def modrelu_backward(z: CVector, b: RVector, g: CVector) -> tuple[CVector, RVector]:
    r = np.abs(z)
    active = (r + b > 0) & (r > 0)
    safe_r = np.where(active, r, 1.0)
    u = np.where(active, z / safe_r, 0.0)
    radial = np.where(active, (g.conj() * u).real, 0.0)
    ratio = np.where(active, b / safe_r, 0.0)
    gz = np.where(active, (1.0 + ratio) * g - ratio * radial * u, 0.0)
    return gz, _bias_grad(radial)


def modsigmoid(z: CVector, alpha: float = MODSIGMOID_ALPHA) -> RVector:
    return np.clip(expit(alpha * z.real + (1.0 - alpha) * z.imag), GATE_LOW, GATE_HIGH)


def modsigmoid_backward(s: RVector, g: RVector, alpha: float = MODSIGMOID_ALPHA) -> CVector:
    slope = g * s * (1.0 - s)
    return slope * (alpha + 1j * (1.0 - alpha))


def gate_backward(gate: RVector, value: CVector, g: CVector) -> tuple[RVector, CVector]:
    """Backward of gate·value for a real gate scaling a complex vector."""
    return (g.conj() * value).real, gate * g


# ── basic complex RNN ─────────────────────────────────────────────────────────


@dataclass(slots=True)
class RnnCache:
    h_prev: CVector
    x: CVector
    a: CVector


def rnn_cell_forward(p: RnnParams, h: CVector, x: CVector) -> tuple[CVector, RnnCache]:
    a = cmatvec(p.W, h) + cmatvec(p.V, x) + p.b
    return modrelu(a, p.modrelu_b), RnnCache(h_prev=h, x=x, a=a)


def rnn_cell_backward(p: RnnParams, cache: RnnCache, g: CVector) -> tuple[CVector, CVector, Grads]:
    ga, g_mb = modrelu_backward(cache.a, p.modrelu_b, g)
    grads = {
        "W": _weight_grad(ga, cache.h_prev),
        "V": _weight_grad(ga, cache.x),
        "b": _bias_grad(ga),
        "modrelu_b": g_mb,
    }
    return ga @ p.W.conj(), ga @ p.V.conj(), grads


def rnn_sequence_forward(p: RnnParams, h0: CVector, xs: CVector) -> tuple[CVector, list[RnnCache]]:
    states, caches = [], []
    h = h0
    for x in xs:
        h, cache = rnn_cell_forward(p, h, x)
        states.append(h)
        caches.append(cache)
    return _stack_states(states, h0), caches


def rnn_sequence_backward(
    p: RnnParams, caches: list[RnnCache], g_states: CVector
) -> tuple[CVector, CVector, Grads]:
    return _sequence_backward(rnn_cell_backward, p, caches, g_states)


# ── complex GRU ───────────────────────────────────────────────────────────────


@dataclass(slots=True)
class GruCache:
    h_prev: CVector
    x: CVector
    g_r: RVector
    g_z: RVector
    rh: CVector
    a_c: CVector
    c: CVector
    override: GateOverride = field(default_factory=GateOverride)


def gru_cell_forward(
    p: GruParams, h: CVector, x: CVector, override: GateOverride | None = None
) -> tuple[CVector, GruCache]:
    override = override or GateOverride()
    if x.shape[-1] != p.n_input or h.shape[-1] != p.n_hidden:
        raise ShapeError(
            f"GRU expects input {p.n_input} and state {p.n_hidden}, got {x.shape[-1]} and {h.shape[-1]}"
        )

    if override.reset is None:
        g_r = modsigmoid(cmatvec(p.W_r, h) + cmatvec(p.V_r, x) + p.b_r)
    else:
        g_r = np.full(h.shape, override.reset)
    if override.update is None:
        g_z = modsigmoid(cmatvec(p.W_z, h) + cmatvec(p.V_z, x) + p.b_z)
    else:
        g_z = np.full(h.shape, override.update)

    rh = g_r * h
    a_c = cmatvec(p.W, rh) + cmatvec(p.V, x) + p.b
    c = modrelu(a_c, p.modrelu_b)
    h_new = g_z * c + (1.0 - g_z) * h
    return h_new, GruCache(h_prev=h, x=x, g_r=g_r, g_z=g_z, rh=rh, a_c=a_c, c=c, override=override)


def gru_cell_backward(p: GruParams, cache: GruCache, g: CVector) -> tuple[CVector, CVector, Grads]:
    """Returns (gradient w.r.t. h_prev, gradient w.r.t. x, parameter gradients)."""
    h, x = cache.h_prev, cache.x
    zeros_h = np.zeros_like(p.W)
    zeros_x = np.zeros_like(p.V)
    zeros_b = np.zeros_like(p.b)

    g_gz, g_c = gate_backward(cache.g_z, cache.c - h, g)
    g_h = (1.0 - cache.g_z) * g

    g_ac, g_mb = modrelu_backward(cache.a_c, p.modrelu_b, g_c)
    grads: Grads = {
        "W": _weight_grad(g_ac, cache.rh),
        "V": _weight_grad(g_ac, x),
        "b": _bias_grad(g_ac),
        "modrelu_b": g_mb,
    }
    g_rh = g_ac @ p.W.conj()
    g_x = g_ac @ p.V.conj()
    g_gr, g_h_reset = gate_backward(cache.g_r, h, g_rh)
    g_h = g_h + g_h_reset

    for gate, g_gate, pinned in (
        ("r", g_gr, cache.override.reset),
        ("z", g_gz, cache.override.update),
    ):
        if pinned is not None:
            grads[f"W_{gate}"], grads[f"V_{gate}"], grads[f"b_{gate}"] = zeros_h, zeros_x, zeros_b
            continue
        s = cache.g_r if gate == "r" else cache.g_z
        g_a = modsigmoid_backward(s, g_gate)
        W_gate = p.W_r if gate == "r" else p.W_z
        V_gate = p.V_r if gate == "r" else p.V_z
        grads[f"W_{gate}"] = _weight_grad(g_a, h)
        grads[f"V_{gate}"] = _weight_grad(g_a, x)
        grads[f"b_{gate}"] = _bias_grad(g_a)
        g_h = g_h + g_a @ W_gate.conj()
        g_x = g_x + g_a @ V_gate.conj()

    return g_h, g_x, grads


def gru_cell(p: GruParams, h_prev: GruState, x: CVector, override: GateOverride | None = None) -> GruState:
    h_new, _ = gru_cell_forward(p, h_prev.h, x, override)
    return GruState(h=h_new)


def gru_sequence_forward(
    p: GruParams, h0: CVector, xs: CVector, override: GateOverride | None = None
) -> tuple[CVector, list[GruCache]]:
    """Unroll over the leading (time) axis of `xs`; returns stacked states and per-step caches."""
    states, caches = [], []
    h = h0
    for x in xs:
        h, cache = gru_cell_forward(p, h, x, override)
        states.append(h)
        caches.append(cache)
    return _stack_states(states, h0), caches


def gru_sequence_backward(
    p: GruParams, caches: list[GruCache], g_states: CVector
) -> tuple[CVector, CVector, Grads]:
    """Backpropagation through time over the whole sequence.

    `g_states[t]` is the gradient arriving at state t from outside the recurrence.
    Returns (gradient w.r.t. h0, gradients w.r.t. inputs, summed parameter gradients).
    """
    return _sequence_backward(gru_cell_backward, p, caches, g_states)


def gru_sequence(p: GruParams, h0: GruState, xs: list[CVector] | CVector) -> list[GruState]:
    if len(xs) == 0:
        return []
    states, _ = gru_sequence_forward(p, h0.h, np.asarray(xs, dtype=np.complex128))
    return [GruState(h=h) for h in states]


def _stack_states(states: list[CVector], h0: CVector) -> CVector:
    if not states:
        return np.zeros((0, *h0.shape), dtype=np.complex128)
    return np.stack(states)


def _sequence_backward(cell_backward, p, caches, g_states):  # type: ignore[no-untyped-def]
    grads: Grads = {name: np.zeros_like(value) for name, value in p.named().items()}
    g_xs = [np.zeros(0, dtype=np.complex128)] * len(caches)
    g_h = np.zeros_like(caches[0].h_prev) if caches else np.zeros(0, dtype=np.complex128)
    for t in range(len(caches) - 1, -1, -1):
        g_h, g_x, step = cell_backward(p, caches[t], g_h + g_states[t])
        g_xs[t] = g_x
        for name, value in step.items():
            grads[name] += value
    g_x_seq = np.stack(g_xs) if caches else np.zeros((0,), dtype=np.complex128)
    return g_h, g_x_seq, grads


# ── initialization ────────────────────────────────────────────────────────────


class BiasKind(StrEnum):
    PLAIN = "plain"
    GATE = "gate"


def init_glorot_complex(n_in: int, n_out: int, rng: np.random.Generator) -> CMatrix:
    """Real and imaginary parts i.i.d. uniform on [-A, A], A = sqrt(6 / (n_in + n_out))."""
    if n_in <= 0 or n_out <= 0:
        raise ShapeError(f"layer dimensions must be positive, got {n_in}x{n_out}")
    bound = np.sqrt(6.0 / (n_in + n_out))
    real = rng.uniform(-bound, bound, size=(n_out, n_in))
    imag = rng.uniform(-bound, bound, size=(n_out, n_in))
    return np.ascontiguousarray(real + 1j * imag)


def init_biases(kind: BiasKind | str, dim: int) -> CVector:
    value = GATE_BIAS_INIT if BiasKind(kind) is BiasKind.GATE else 0.0
    return np.full(dim, value + 0j, dtype=np.complex128)


def init_dense(n_in: int, n_out: int, rng: np.random.Generator) -> DenseParams:
    return DenseParams(W=init_glorot_complex(n_in, n_out, rng), b=init_biases(BiasKind.PLAIN, n_out))


def init_modrelu(dim: int) -> ModReluParams:
    return ModReluParams(b=np.zeros(dim))


def init_rnn(n_x: int, n_h: int, rng: np.random.Generator) -> RnnParams:
    return RnnParams(
        W=project_unitary(init_glorot_complex(n_h, n_h, rng)),
        V=init_glorot_complex(n_x, n_h, rng),
        b=init_biases(BiasKind.PLAIN, n_h),
        modrelu_b=np.zeros(n_h),
    )


def init_gru(n_x: int, n_h: int, rng: np.random.Generator, constrain_all: bool = False) -> GruParams:
    W = project_unitary(init_glorot_complex(n_h, n_h, rng))
    V = init_glorot_complex(n_x, n_h, rng)
    W_r = init_glorot_complex(n_h, n_h, rng)
    V_r = init_glorot_complex(n_x, n_h, rng)
    W_z = init_glorot_complex(n_h, n_h, rng)
    V_z = init_glorot_complex(n_x, n_h, rng)
    if constrain_all:
        W_r, W_z = project_unitary(W_r), project_unitary(W_z)
    return GruParams(
        W=W,
        V=V,
        b=init_biases(BiasKind.PLAIN, n_h),
        W_r=W_r,
        V_r=V_r,
        b_r=init_biases(BiasKind.GATE, n_h),
        W_z=W_z,
        V_z=V_z,
        b_z=init_biases(BiasKind.GATE, n_h),
        modrelu_b=np.zeros(n_h),
    )
