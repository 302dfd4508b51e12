"""Complex-Gaussian latent machinery: density, KL, reparameterization and the ELBO terms."""

from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from ..core.exceptions import DegeneracyError, DomainError, ShapeError
from .ctensor import CMatrix, CVector, RVector, hermitian
from .layers import DenseParams, dense_backward, dense_forward

# head outputs are clipped here before exp/tanh
S_CLIP = 15.0
M_CLIP = 8.0


# ── types ─────────────────────────────────────────────────────────────────────


class LossMode(StrEnum):
    L1_COMPOSITE = "l1_composite"
    L2_GAUSSIAN = "l2_gaussian"


@dataclass(slots=True)
class LatentPosterior:
    """Diagonal complex normal N_c(mu, diag(sigma), diag(delta)), elementwise over any leading axes."""

    mu: CVector
    sigma: RVector
    delta: CVector

    def validate(self) -> None:
        if not (self.mu.shape == self.sigma.shape == self.delta.shape):
            raise ShapeError(
                f"posterior parts differ in shape: {self.mu.shape}, {self.sigma.shape}, {self.delta.shape}"
            )
        if np.any(self.sigma <= 0):
            raise DomainError("posterior covariance must be positive")
        if np.any(self.sigma**2 - np.abs(self.delta) ** 2 <= 0):
            raise DomainError("posterior pseudo-covariance must satisfy |delta| < sigma")

    @classmethod
    def prior(cls, shape: tuple[int, ...]) -> "LatentPosterior":
        return cls(
            mu=np.zeros(shape, dtype=np.complex128),
            sigma=np.ones(shape),
            delta=np.zeros(shape, dtype=np.complex128),
        )


@dataclass(slots=True)
class ComplexNormalParams:
    a: CVector
    Gamma: CMatrix
    C: CMatrix

    def __post_init__(self) -> None:
        n = self.a.shape[0]
        if self.Gamma.shape != (n, n) or self.C.shape != (n, n):
            raise ShapeError(f"complex normal of dim {n} needs {n}x{n} covariance and pseudo-covariance")
        if np.max(np.abs(self.Gamma - hermitian(self.Gamma)), initial=0.0) > 1e-10:
            raise DomainError("covariance matrix is not Hermitian")


@dataclass(slots=True)
class LossBreakdown:
    rec_real: float = 0.0
    rec_imag: float = 0.0
    rec_mag: float = 0.0
    kl: float = 0.0
    total: float = 0.0

    def __add__(self, other: "LossBreakdown") -> "LossBreakdown":
        return LossBreakdown(
            rec_real=self.rec_real + other.rec_real,
            rec_imag=self.rec_imag + other.rec_imag,
            rec_mag=self.rec_mag + other.rec_mag,
            kl=self.kl + other.kl,
            total=self.total + other.total,
        )

    def scaled(self, factor: float) -> "LossBreakdown":
        return LossBreakdown(
            rec_real=self.rec_real * factor,
            rec_imag=self.rec_imag * factor,
            rec_mag=self.rec_mag * factor,
            kl=self.kl * factor,
            total=self.total * factor,
        )


# ── densities ─────────────────────────────────────────────────────────────────


def complex_normal_logpdf(h: CVector, p: ComplexNormalParams) -> float:
    """Log density of a (possibly improper) complex normal via its augmented covariance."""
    if h.shape != p.a.shape:
        raise ShapeError(f"sample has shape {h.shape}, mean has {p.a.shape}")
    n = h.shape[0]
    e = h - p.a
    augmented = np.block([[p.Gamma, p.C], [p.C.conj(), p.Gamma.conj()]])
    e_aug = np.concatenate([e, e.conj()])

    sign, logdet = np.linalg.slogdet(augmented)
    if not np.isfinite(logdet) or abs(sign - 1.0) > 1e-8:
        raise DegeneracyError("augmented covariance is singular or not positive definite")
    try:
        solved = np.linalg.solve(augmented, e_aug)
    except np.linalg.LinAlgError as err:
        raise DegeneracyError(f"augmented covariance is singular: {err}") from err
    quad = float(np.real(e_aug.conj() @ solved))
    return float(-n * np.log(np.pi) - 0.5 * logdet - 0.5 * quad)


def diagonal_logpdf(h: CVector, mu: CVector, sigma: RVector, delta: CVector) -> np.ndarray:
    """Closed form of the log density for diagonal covariance and pseudo-covariance.

    Sums over the last axis; leading axes (e.g. samples) are kept.
    """
    q = sigma**2 - np.abs(delta) ** 2
    if np.any(q <= 0):
        raise DegeneracyError("diagonal complex normal has |delta| >= sigma")
    e = h - mu
    quad = (sigma * np.abs(e) ** 2 - np.real(delta.conj() * e**2)) / q
    return np.sum(-np.log(np.pi) - 0.5 * np.log(q) - quad, axis=-1)


# ── KL divergence ─────────────────────────────────────────────────────────────


def kl_divergence(q: LatentPosterior) -> float:
    """KL(q || N_c(0, I, 0)) = mu^H mu + sum(sigma - 1 - log(sigma^2 - |delta|^2) / 2)."""
    q.validate()
    det = q.sigma**2 - np.abs(q.delta) ** 2
    return float(np.sum(np.abs(q.mu) ** 2) + np.sum(q.sigma - 1.0 - 0.5 * np.log(det)))


def kl_backward(q: LatentPosterior) -> tuple[CVector, RVector, CVector]:
    det = q.sigma**2 - np.abs(q.delta) ** 2
    return 2.0 * q.mu, 1.0 - q.sigma / det, q.delta / det


# ── reparameterization ────────────────────────────────────────────────────────


def _reparam_terms(q: LatentPosterior) -> tuple[RVector, RVector, RVector]:
    denom = 2.0 * q.sigma + 2.0 * q.delta.real
    if np.any(denom <= 0):
        raise DomainError("reparameterization denominator 2*sigma + 2*Re(delta) must be positive")
    det = q.sigma**2 - np.abs(q.delta) ** 2
    if np.any(det < 0):
        raise DomainError("posterior pseudo-covariance must satisfy |delta| <= sigma")
    return denom, np.sqrt(denom), np.sqrt(det)


def reparameterization_coefficients(q: LatentPosterior) -> tuple[CVector, CVector]:
    _, root_d, root_q = _reparam_terms(q)
    return (q.sigma + q.delta) / root_d, 1j * root_q / root_d


def reparameterize(q: LatentPosterior, eps_r: RVector, eps_i: RVector) -> CVector:
    """mu + k_r·eps_r + k_i·eps_i: a draw whose covariance is sigma and pseudo-covariance delta."""
    if eps_r.shape != q.mu.shape or eps_i.shape != q.mu.shape:
        raise ShapeError(f"noise shapes {eps_r.shape}, {eps_i.shape} do not match posterior {q.mu.shape}")
    k_r, k_i = reparameterization_coefficients(q)
    return q.mu + k_r * eps_r + k_i * eps_i


def reparameterize_backward(
    q: LatentPosterior, eps_r: RVector, eps_i: RVector, g: CVector
) -> tuple[CVector, RVector, CVector]:
    denom, root_d, root_q = _reparam_terms(q)
    cr = g.conj() * eps_r
    ci = g.conj() * eps_i
    p1 = np.real(cr * (q.sigma + q.delta)) / (2.0 * denom * root_d)
    p2 = -np.imag(ci)
    safe_q = np.where(root_q > 0, root_q, np.inf)
    tail = p2 * root_q / (denom * root_d)

    g_sigma = np.real(cr) / root_d - 2.0 * p1 + p2 * q.sigma / (safe_q * root_d) - tail
    g_delta = g * eps_r / root_d - 2.0 * p1 - p2 * q.delta / (safe_q * root_d) - tail
    return g, g_sigma, g_delta


def sample_complex_normal(q: LatentPosterior, rng: np.random.Generator, n: int) -> CVector:
    """Draw n samples of shape q.mu.shape; returns an array of shape (n, *q.mu.shape)."""
    shape = (n, *q.mu.shape)
    eps_r = rng.standard_normal(shape)
    eps_i = rng.standard_normal(shape)
    k_r, k_i = reparameterization_coefficients(q)
    return q.mu + k_r * eps_r + k_i * eps_i


# ── posterior heads ───────────────────────────────────────────────────────────


@dataclass(slots=True)
class HeadCache:
    h: CVector
    s_pre: RVector
    m_pre: RVector
    phi: RVector
    tanh_m: RVector
    posterior: LatentPosterior


def posterior_heads_forward(
    mu_head: DenseParams, s_head: DenseParams, delta_head: DenseParams, h: CVector
) -> tuple[LatentPosterior, HeadCache]:
    """sigma = exp(s), delta = sigma·tanh(m)·exp(i·phi), so that |delta| < sigma holds by construction."""
    mu = dense_forward(mu_head, h)
    s_pre = dense_forward(s_head, h).real
    sigma = np.exp(np.clip(s_pre, -S_CLIP, S_CLIP))
    w = dense_forward(delta_head, h)
    m_pre, phi = w.real, w.imag
    tanh_m = np.tanh(np.clip(m_pre, -M_CLIP, M_CLIP))
    delta = sigma * tanh_m * np.exp(1j * phi)
    posterior = LatentPosterior(mu=mu, sigma=sigma, delta=delta)
    return posterior, HeadCache(h=h, s_pre=s_pre, m_pre=m_pre, phi=phi, tanh_m=tanh_m, posterior=posterior)


def posterior_heads_backward(
    mu_head: DenseParams,
    s_head: DenseParams,
    delta_head: DenseParams,
    cache: HeadCache,
    g_mu: CVector,
    g_sigma: RVector,
    g_delta: CVector,
) -> tuple[CVector, dict[str, dict[str, np.ndarray]]]:
    q = cache.posterior
    rotation = np.exp(1j * cache.phi)
    g_s = q.sigma * g_sigma + np.real(g_delta.conj() * q.delta)
    g_s = np.where(np.abs(cache.s_pre) <= S_CLIP, g_s, 0.0)
    g_m = np.real(g_delta.conj() * q.sigma * (1.0 - cache.tanh_m**2) * rotation)
    g_m = np.where(np.abs(cache.m_pre) <= M_CLIP, g_m, 0.0)
    g_phi = np.real(g_delta.conj() * 1j * q.delta)

    g_h_mu, grads_mu = dense_backward(mu_head, cache.h, g_mu)
    g_h_s, grads_s = dense_backward(s_head, cache.h, g_s.astype(np.complex128))
    g_h_delta, grads_delta = dense_backward(delta_head, cache.h, g_m + 1j * g_phi)
    return g_h_mu + g_h_s + g_h_delta, {"mu": grads_mu, "s": grads_s, "delta": grads_delta}


# ── reconstruction and ELBO ───────────────────────────────────────────────────


def reconstruction_loss(
    x: CVector, xhat: CVector, mode: LossMode = LossMode.L1_COMPOSITE
) -> tuple[float, float, float]:
    """(rec_real, rec_imag, rec_mag); the L2 mode is the Gaussian likelihood up to a constant."""
    if x.shape != xhat.shape:
        raise ShapeError(f"target {x.shape} and reconstruction {xhat.shape} differ in shape")
    diff = xhat - x
    if mode == LossMode.L2_GAUSSIAN:
        return float(np.sum(diff.real**2)), float(np.sum(diff.imag**2)), 0.0
    return (
        float(np.sum(np.abs(diff.real))),
        float(np.sum(np.abs(diff.imag))),
        float(np.sum(np.abs(np.abs(x) - np.abs(xhat)))),
    )


def reconstruction_term_grads(x: CVector, xhat: CVector) -> dict[str, CVector]:
    """Per-term gradients of the composite L1 loss w.r.t. xhat; ties and xhat = 0 get zero."""
    diff = xhat - x
    modulus = np.abs(xhat)
    unit = np.divide(xhat, modulus, out=np.zeros_like(xhat), where=modulus > 0)
    return {
        "rec_real": np.sign(diff.real) + 0j,
        "rec_imag": 1j * np.sign(diff.imag),
        "rec_mag": np.sign(modulus - np.abs(x)) * unit,
    }


def reconstruction_backward(x: CVector, xhat: CVector, mode: LossMode = LossMode.L1_COMPOSITE) -> CVector:
    diff = xhat - x
    if mode == LossMode.L2_GAUSSIAN:
        return 2.0 * diff
    terms = reconstruction_term_grads(x, xhat)
    return terms["rec_real"] + terms["rec_imag"] + terms["rec_mag"]


def elbo_loss(
    x: CVector,
    xhat: CVector,
    q: LatentPosterior,
    kl_weight: float,
    mode: LossMode = LossMode.L1_COMPOSITE,
) -> LossBreakdown:
    if kl_weight < 0:
        raise DomainError("kl_weight must be non-negative")
    rec_real, rec_imag, rec_mag = reconstruction_loss(x, xhat, mode)
    kl = kl_divergence(q)
    return LossBreakdown(
        rec_real=rec_real,
        rec_imag=rec_imag,
        rec_mag=rec_mag,
        kl=kl,
        total=rec_real + rec_imag + rec_mag + kl_weight * kl,
    )
