"""Finite-difference verification of every hand-written backward pass.

Each check builds a tiny random instance of an operation, scores it with a
random linear projection of its outputs and compares the analytic gradient
with central differences. Backward functions are looked up through their
modules at call time.
"""

from collections.abc import Callable, Iterable
from typing import Any

import numpy as np
import structlog

from ..core.exceptions import ConfigError
from ..engine import cgrad, cvae, layers
from ..engine.model import CrvaeModel
from ..schemas.config import Arch, ModelConfig
from ..schemas.report import GradCheckReport

logger = structlog.get_logger(__name__)

Check = Callable[[np.random.Generator, float, float], GradCheckReport]


def _cnormal(rng: np.random.Generator, *shape: int, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _project(c: np.ndarray, y: np.ndarray) -> float:
    """Re(sum(conj(c)·y)); its gradient with respect to y is c."""
    return float(np.sum(np.real(c.conj() * y)))


def _posterior(rng: np.random.Generator, n: int) -> cvae.LatentPosterior:
    sigma = rng.uniform(0.5, 1.5, n)
    delta = sigma * rng.uniform(0.1, 0.7, n) * np.exp(1j * rng.uniform(-np.pi, np.pi, n))
    return cvae.LatentPosterior(mu=_cnormal(rng, n), sigma=sigma, delta=delta)


def _gru(rng: np.random.Generator, n_x: int, n_h: int) -> layers.GruParams:
    p = layers.init_gru(n_x, n_h, rng)
    # unsaturated gates and a mix of active and inactive modReLU units
    p.b_r[...] = _cnormal(rng, n_h, scale=0.5)
    p.b_z[...] = _cnormal(rng, n_h, scale=0.5)
    p.modrelu_b[...] = rng.uniform(-0.3, 0.3, n_h)
    return p


# ── single operations ─────────────────────────────────────────────────────────


def check_dense(rng: np.random.Generator, eps: float, tol: float) -> GradCheckReport:
    p = layers.DenseParams(W=_cnormal(rng, 4, 3), b=_cnormal(rng, 4))
    x = _cnormal(rng, 2, 3)
    c = _cnormal(rng, 2, 4)
    g_x, grads = layers.dense_backward(p, x, c)
    return cgrad.finite_diff_check(
        lambda: _project(c, layers.dense_forward(p, x)),
        {"W": p.W, "b": p.b, "x": x},
        {**grads, "x": g_x},
        "dense",
        eps,
        tol,
    )


def check_modrelu(rng: np.random.Generator, eps: float, tol: float) -> GradCheckReport:
    z = _cnormal(rng, 3, 5)
    b = rng.uniform(-0.5, 0.5, 5)
    c = _cnormal(rng, 3, 5)
    g_z, g_b = layers.modrelu_backward(z, b, c)
    return cgrad.finite_diff_check(
        lambda: _project(c, layers.modrelu(z, b)), {"z": z, "b": b}, {"z": g_z, "b": g_b}, "modrelu", eps, tol
    )


def check_modsigmoid(rng: np.random.Generator, eps: float, tol: float) -> GradCheckReport:
    z = _cnormal(rng, 2, 4)
    c = rng.standard_normal((2, 4))
    g_z = layers.modsigmoid_backward(layers.modsigmoid(z), c)
    return cgrad.finite_diff_check(
        lambda: float(np.sum(c * layers.modsigmoid(z))), {"z": z}, {"z": g_z}, "modsigmoid", eps, tol
    )


def check_rnn_cell(rng: np.random.Generator, eps: float, tol: float) -> GradCheckReport:
    p = layers.init_rnn(3, 4, rng)
    p.b[...] = _cnormal(rng, 4, scale=0.3)
    p.modrelu_b[...] = rng.uniform(-0.3, 0.3, 4)
    h, x = _cnormal(rng, 2, 4), _cnormal(rng, 2, 3)
    c = _cnormal(rng, 2, 4)
    _, cache = layers.rnn_cell_forward(p, h, x)
    g_h, g_x, grads = layers.rnn_cell_backward(p, cache, c)
    return cgrad.finite_diff_check(
        lambda: _project(c, layers.rnn_cell_forward(p, h, x)[0]),
        {**p.named(), "h": h, "x": x},
        {**grads, "h": g_h, "x": g_x},
        "rnn_cell",
        eps,
        tol,
    )


def check_rnn_sequence(rng: np.random.Generator, eps: float, tol: float) -> GradCheckReport:
    p = layers.init_rnn(2, 3, rng)
    p.b[...] = _cnormal(rng, 3, scale=0.3)
    p.modrelu_b[...] = rng.uniform(-0.3, 0.3, 3)
    h0, xs = _cnormal(rng, 3), _cnormal(rng, 4, 2)
    c = _cnormal(rng, 4, 3)
    _, caches = layers.rnn_sequence_forward(p, h0, xs)
    g_h0, g_xs, grads = layers.rnn_sequence_backward(p, caches, c)
    return cgrad.finite_diff_check(
        lambda: _project(c, layers.rnn_sequence_forward(p, h0, xs)[0]),
        {**p.named(), "h0": h0, "xs": xs},
        {**grads, "h0": g_h0, "xs": g_xs},
        "rnn_sequence",
        eps,
        tol,
    )


def check_gru_cell(rng: np.random.Generator, eps: float, tol: float) -> GradCheckReport:
    p = _gru(rng, 3, 4)
    h, x = _cnormal(rng, 2, 4), _cnormal(rng, 2, 3)
    c = _cnormal(rng, 2, 4)
    _, cache = layers.gru_cell_forward(p, h, x)
    g_h, g_x, grads = layers.gru_cell_backward(p, cache, c)
    return cgrad.finite_diff_check(
        lambda: _project(c, layers.gru_cell_forward(p, h, x)[0]),
        {**p.named(), "h": h, "x": x},
        {**grads, "h": g_h, "x": g_x},
        "gru_cell",
        eps,
        tol,
    )


def check_gru_sequence(rng: np.random.Generator, eps: float, tol: float) -> GradCheckReport:
    p = _gru(rng, 2, 3)
    h0, xs = _cnormal(rng, 3), _cnormal(rng, 4, 2)
    c = _cnormal(rng, 4, 3)
    _, caches = layers.gru_sequence_forward(p, h0, xs)
    g_h0, g_xs, grads = layers.gru_sequence_backward(p, caches, c)
    return cgrad.finite_diff_check(
        lambda: _project(c, layers.gru_sequence_forward(p, h0, xs)[0]),
        {**p.named(), "h0": h0, "xs": xs},
        {**grads, "h0": g_h0, "xs": g_xs},
        "gru_sequence",
        eps,
        tol,
    )


def check_reparameterize(rng: np.random.Generator, eps: float, tol: float) -> GradCheckReport:
    q = _posterior(rng, 4)
    eps_r, eps_i = rng.standard_normal(4), rng.standard_normal(4)
    c = _cnormal(rng, 4)
    g_mu, g_sigma, g_delta = cvae.reparameterize_backward(q, eps_r, eps_i, c)
    return cgrad.finite_diff_check(
        lambda: _project(c, cvae.reparameterize(q, eps_r, eps_i)),
        {"mu": q.mu, "sigma": q.sigma, "delta": q.delta},
        {"mu": g_mu, "sigma": g_sigma, "delta": g_delta},
        "reparameterize",
        eps,
        tol,
    )


def check_kl(rng: np.random.Generator, eps: float, tol: float) -> GradCheckReport:
    q = _posterior(rng, 4)
    g_mu, g_sigma, g_delta = cvae.kl_backward(q)
    return cgrad.finite_diff_check(
        lambda: cvae.kl_divergence(q),
        {"mu": q.mu, "sigma": q.sigma, "delta": q.delta},
        {"mu": g_mu, "sigma": g_sigma, "delta": g_delta},
        "kl",
        eps,
        tol,
    )


def _reconstruction_check(term: str) -> Check:
    index = ("rec_real", "rec_imag", "rec_mag").index(term)

    def check(rng: np.random.Generator, eps: float, tol: float) -> GradCheckReport:
        x, xhat = _cnormal(rng, 6), _cnormal(rng, 6)
        grad = cvae.reconstruction_term_grads(x, xhat)[term]
        return cgrad.finite_diff_check(
            lambda: cvae.reconstruction_loss(x, xhat)[index], {"xhat": xhat}, {"xhat": grad}, term, eps, tol
        )

    return check


def check_gaussian(rng: np.random.Generator, eps: float, tol: float) -> GradCheckReport:
    x, xhat = _cnormal(rng, 6), _cnormal(rng, 6)
    grad = cvae.reconstruction_backward(x, xhat, cvae.LossMode.L2_GAUSSIAN)
    return cgrad.finite_diff_check(
        lambda: sum(cvae.reconstruction_loss(x, xhat, cvae.LossMode.L2_GAUSSIAN)),
        {"xhat": xhat},
        {"xhat": grad},
        "gaussian",
        eps,
        tol,
    )


def check_posterior_heads(rng: np.random.Generator, eps: float, tol: float) -> GradCheckReport:
    heads = [layers.DenseParams(W=_cnormal(rng, 3, 4, scale=0.3), b=_cnormal(rng, 3, scale=0.3)) for _ in range(3)]
    h = _cnormal(rng, 2, 4)
    c_mu, c_delta = _cnormal(rng, 2, 3), _cnormal(rng, 2, 3)
    c_sigma = rng.standard_normal((2, 3))

    def loss() -> float:
        q, _ = cvae.posterior_heads_forward(*heads, h)
        return _project(c_mu, q.mu) + float(np.sum(c_sigma * q.sigma)) + _project(c_delta, q.delta)

    _, cache = cvae.posterior_heads_forward(*heads, h)
    g_h, grads = cvae.posterior_heads_backward(*heads, cache, c_mu, c_sigma, c_delta)
    params: dict[str, np.ndarray] = {"h": h}
    analytic: dict[str, np.ndarray] = {"h": g_h}
    for key, head in zip(("mu", "s", "delta"), heads, strict=True):
        for name, tensor in head.named().items():
            params[f"{key}.{name}"] = tensor
            analytic[f"{key}.{name}"] = grads[key][name]
    return cgrad.finite_diff_check(loss, params, analytic, "posterior_heads", eps, tol)


# ── whole model ───────────────────────────────────────────────────────────────

# Central differences at eps 1e-6 cannot resolve a component this far below the
# largest one; such instances are redrawn before checking.
MIN_RESOLVED_FRACTION = 2e-4
MAX_DRAWS = 100


def _jitter_parameters(model: CrvaeModel, rng: np.random.Generator, scale: float = 0.3) -> None:
    """Move every tensor off its initial value so no gradient is structurally tiny."""
    for tensor in model.named_parameters().values():
        if np.iscomplexobj(tensor):
            tensor += _cnormal(rng, *tensor.shape, scale=scale)
        else:
            tensor += rng.uniform(-scale, scale, tensor.shape)
    model.project_constrained()


def _resolvable(grads: dict[str, np.ndarray]) -> bool:
    magnitudes = np.concatenate([np.abs(np.stack([g.real, g.imag])).ravel() for g in grads.values()])
    nonzero = magnitudes[magnitudes > 0]
    return nonzero.size == 0 or bool(nonzero.min() >= MIN_RESOLVED_FRACTION * nonzero.max())


def _model_check(arch: Arch) -> Check:
    def check(rng: np.random.Generator, eps: float, tol: float) -> GradCheckReport:
        config = ModelConfig(input_dim=4, frames_per_step=1, gru_units=4, latent_dim=3, arch=arch)
        model = CrvaeModel.initialize(config, rng)
        _jitter_parameters(model, rng)
        shape, latent = (2, 1, config.step_dim), (2, 1, config.latent_dim)
        for _ in range(MAX_DRAWS):
            x, target = _cnormal(rng, *shape, scale=0.5), _cnormal(rng, *shape, scale=0.5)
            eps_r, eps_i = rng.standard_normal(latent), rng.standard_normal(latent)
            _, grads = model.loss_and_grads(x, target, eps_r, eps_i)
            if _resolvable(grads):
                break
        else:
            logger.warning("No well-conditioned draw for the model check", arch=arch.value, draws=MAX_DRAWS)
        return cgrad.finite_diff_check(
            lambda: model.loss_and_grads(x, target, eps_r, eps_i)[0].total,
            model.named_parameters(),
            grads,
            f"model_{arch.value}",
            eps,
            tol,
        )

    return check


CHECKS: dict[str, Check] = {
    "dense": check_dense,
    "modrelu": check_modrelu,
    "modsigmoid": check_modsigmoid,
    "rnn_cell": check_rnn_cell,
    "rnn_sequence": check_rnn_sequence,
    "gru_cell": check_gru_cell,
    "gru_sequence": check_gru_sequence,
    "reparameterize": check_reparameterize,
    "kl": check_kl,
    "rec_real": _reconstruction_check("rec_real"),
    "rec_imag": _reconstruction_check("rec_imag"),
    "rec_mag": _reconstruction_check("rec_mag"),
    "gaussian": check_gaussian,
    "posterior_heads": check_posterior_heads,
    "model_recurrent": _model_check(Arch.RECURRENT),
    "model_feedforward": _model_check(Arch.FEEDFORWARD),
}


def run_gradcheck(
    eps: float = 1e-6, tol: float = 1e-4, seed: int = 0, ops: Iterable[str] | None = None
) -> list[GradCheckReport]:
    names = list(CHECKS) if ops is None else list(ops)
    unknown = [name for name in names if name not in CHECKS]
    if unknown:
        raise ConfigError(f"unknown gradient checks: {', '.join(unknown)}")

    reports = []
    order = list(CHECKS)
    for name in names:
        rng = np.random.default_rng([seed, order.index(name)])
        report = CHECKS[name](rng, eps, tol)
        log: Any = logger.info if report.passed else logger.error
        log("Gradient check", op=name, max_rel_err=report.max_rel_err, components=report.param_count)
        reports.append(report)
    return reports
