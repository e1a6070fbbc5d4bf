"""Correlation, variance and signal-to-noise formulas for limited targets.

All sample variances and covariances use the unbiased ``n - 1`` estimator,
except :func:`mse_decomposition`, whose identity is exact only for ``1/n``
moments of the empirical distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from limdep.errors import (
    EmptyPositiveSubset,
    NegativeSnr,
    RequiresLatents,
    ZeroMean,
    ZeroNoise,
    ZeroVariance,
)


def _vec(u, name: str = "vector") -> np.ndarray:
    u = np.asarray(u, dtype=np.float64).ravel()
    if u.shape[0] < 2:
        raise ValueError(f"{name} needs at least 2 entries")
    return u


def _is_constant(u: np.ndarray) -> bool:
    return bool(np.all(u == u[0]))


def var(u, ddof: int = 1) -> float:
    u = _vec(u)
    d = u - u.mean()
    return float(np.dot(d, d) / (u.shape[0] - ddof))


def cov(u, v, ddof: int = 1) -> float:
    u, v = _vec(u), _vec(v)
    if u.shape != v.shape:
        raise ValueError("vectors must have equal length")
    return float(np.dot(u - u.mean(), v - v.mean()) / (u.shape[0] - ddof))


def pearson(u, v) -> float:
    """Sample Pearson correlation; raises :class:`ZeroVariance` on constant input."""
    u, v = _vec(u, "u"), _vec(v, "v")
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    if _is_constant(u) or _is_constant(v):
        raise ZeroVariance("correlation undefined for a constant vector")
    du = u - u.mean()
    dv = v - v.mean()
    denom = math.sqrt(float(np.dot(du, du)) * float(np.dot(dv, dv)))
    if denom == 0.0:
        raise ZeroVariance("correlation undefined for a constant vector")
    return min(1.0, max(-1.0, float(np.dot(du, dv)) / denom))


def coefficient_of_variation(u) -> float:
    u = _vec(u)
    m = float(u.mean())
    if m == 0.0:
        raise ZeroMean("coefficient of variation undefined for zero mean")
    return math.sqrt(var(u)) / m


@dataclass(frozen=True)
class MseDecomposition:
    mse: float
    var_y: float
    var_f: float
    correlation_term: float
    bias_sq: float

    def reassembled(self) -> float:
        return self.var_y + self.var_f + self.correlation_term + self.bias_sq


def mse_decomposition(f, y) -> MseDecomposition:
    """Split the MSE of ``f`` against ``y`` into spread, correlation and bias parts.

    ``correlation_term`` is ``-2 Cor(f, y) sqrt(Var f Var y)``, evaluated as
    ``-2 Cov(f, y)`` so that a constant ``f`` is allowed.
    """
    f, y = _vec(f, "f"), _vec(y, "y")
    if f.shape != y.shape:
        raise ValueError("f and y must have equal length")
    if _is_constant(y):
        raise ZeroVariance("target is constant")
    resid = y - f
    return MseDecomposition(
        mse=float(np.dot(resid, resid) / y.shape[0]),
        var_y=var(y, ddof=0),
        var_f=var(f, ddof=0),
        correlation_term=-2.0 * cov(f, y, ddof=0),
        bias_sq=float((y.mean() - f.mean()) ** 2),
    )


@dataclass(frozen=True)
class CorrelationDecomposition:
    cor_f_y: float
    cor_f_zeta: float
    attenuation: float
    residual: float


def correlation_decomposition(f, zeta, y) -> CorrelationDecomposition:
    """Compare Cor(f, y) with Cor(f, zeta) times the attenuation sqrt(Var zeta / Var y)."""
    f, zeta, y = _vec(f), _vec(zeta), _vec(y)
    if not f.shape == zeta.shape == y.shape:
        raise ValueError("f, zeta and y must have equal length")
    cor_f_y = pearson(f, y)
    cor_f_zeta = pearson(f, zeta)
    attenuation = math.sqrt(var(zeta) / var(y))
    return CorrelationDecomposition(
        cor_f_y=cor_f_y,
        cor_f_zeta=cor_f_zeta,
        attenuation=attenuation,
        residual=cor_f_y - cor_f_zeta * attenuation,
    )


def snr(zeta, eps) -> float:
    zeta, eps = _vec(zeta), _vec(eps)
    noise = var(eps)
    if _is_constant(eps) or noise == 0.0:
        raise ZeroNoise("noise has zero variance")
    if _is_constant(zeta):
        return 0.0
    return var(zeta) / noise


def snr_performance_cap(snr_value: float) -> float:
    """Best correlation with the observable target a perfect model can reach."""
    if not snr_value >= 0.0:
        raise NegativeSnr(f"signal-to-noise ratio must be >= 0, got {snr_value}")
    if math.isinf(snr_value):
        return 1.0
    return math.sqrt(snr_value / (snr_value + 1.0))


@dataclass(frozen=True)
class VarianceDecomposition:
    """Both sides of ``Var[ac] = E[p] Var[a|c=1] + Var[c] E[mu|c=1]^2`` and friends.

    ``mean_mu`` and ``mean_mu_shift`` need the latent ``mu_x`` and are ``None``
    for plug-in estimates computed from observed data only.
    """

    var_ac: float
    term_amount: float
    term_binary: float
    cor_ac_c_closed: float
    cv_a: float
    mean_mu_shift: float | None
    mean_p: float
    mean_mu_given_c: float
    mean_mu: float | None
    plug_in: bool

    @property
    def relative_gap(self) -> float:
        return abs(self.var_ac - (self.term_amount + self.term_binary)) / self.var_ac


def _latent_arrays(source):
    names = ("y", "c", "a", "p_x", "mu_x")
    if isinstance(source, (tuple, list)):
        return source
    return tuple(getattr(source, k) for k in names)


def variance_decomposition(source, *, plug_in: bool | None = None) -> VarianceDecomposition:
    """Evaluate the variance identity for ``ac`` and the closed-form Cor(ac, c).

    ``source`` is a synthetic population (anything with ``y, c, a, p_x, mu_x``
    attributes) or a tuple ``(y, c, a, p_x, mu_x)``. ``a`` may cover all rows
    or only the ``c = 1`` rows. If ``p_x``/``mu_x`` are ``None`` the observed
    occurrence share and positive-subset mean stand in for them (plug-in mode).
    """
    y, c, a, p_x, mu_x = _latent_arrays(source)
    y = _vec(y, "y")
    c = np.asarray(c).ravel()
    a = np.asarray(a, dtype=np.float64).ravel()
    pos = c == 1
    n_pos = int(np.count_nonzero(pos))
    if n_pos < 2:
        raise EmptyPositiveSubset("need at least two rows with c = 1")
    a_pos = a[pos] if a.shape[0] == c.shape[0] else a
    if a_pos.shape[0] != n_pos:
        raise ValueError("a must cover all rows or exactly the c = 1 rows")

    if plug_in is None:
        plug_in = p_x is None or mu_x is None
    if plug_in:
        mean_p = float(c.mean())
        mean_mu_c = float(a_pos.mean())
        mean_mu = None
        shift = None
    else:
        if p_x is None or mu_x is None:
            raise RequiresLatents("p_x and mu_x are required outside plug-in mode")
        p_x = _vec(p_x)
        mu_x = _vec(mu_x)
        mean_p = float(p_x.mean())
        mean_mu_c = float(mu_x[pos].mean())
        mean_mu = float(mu_x.mean())
        shift = cov(p_x, mu_x) / mean_p

    var_a = var(a_pos)
    cv_a = math.sqrt(var_a) / mean_mu_c
    return VarianceDecomposition(
        var_ac=var(y),
        term_amount=mean_p * var_a,
        term_binary=var(c.astype(np.float64)) * mean_mu_c**2,
        cor_ac_c_closed=math.sqrt(1.0 / (1.0 + cv_a**2 / (1.0 - mean_p))),
        cv_a=cv_a,
        mean_mu_shift=shift,
        mean_p=mean_p,
        mean_mu_given_c=mean_mu_c,
        mean_mu=mean_mu,
        plug_in=plug_in,
    )


@dataclass(frozen=True)
class SnrMixture:
    snr_y: float
    snr_a: float
    snr_c: float
    alpha: float
    psi: float
    d_eps: float
    signal_y: float
    noise_y: float

    @property
    def weighted_sum(self) -> float:
        return self.alpha * self.snr_a + (1.0 - self.alpha) * self.snr_c


def snr_mixture(population) -> SnrMixture:
    """Signal-to-noise ratio of ``y = ca`` against those of its components.

    Needs a population with ``p_x, mu_x, c, eps_p, eps_mu`` retained for every
    row. ``psi`` is the residual ``snr_y - alpha snr_a - (1 - alpha) snr_c``;
    ``d_eps`` is the dependence component evaluated from its explicit form.
    """
    try:
        p_x = _vec(population.p_x)
        mu_x = _vec(population.mu_x)
        c = np.asarray(population.c).ravel()
        eps_p = _vec(population.eps_p)
        eps_mu = _vec(population.eps_mu)
    except AttributeError as exc:
        raise RequiresLatents("snr_mixture needs a population with latents") from exc
    pos = c == 1
    if np.count_nonzero(pos) < 2:
        raise EmptyPositiveSubset("need at least two rows with c = 1")

    mean_p = float(p_x.mean())
    mean_mu_c = float(mu_x[pos].mean())
    noise_mu = var(eps_mu[pos])
    noise_p = var(eps_p)
    if noise_mu == 0.0 or noise_p == 0.0:
        raise ZeroNoise("a component has zero noise")

    snr_a = var(mu_x[pos]) / noise_mu
    snr_c = var(p_x) / noise_p
    signal_y = var(p_x * mu_x)
    noise_y = mean_p * noise_mu + float(np.mean(mu_x**2 * eps_p**2))
    snr_y = signal_y / noise_y

    amount_part = mean_p * noise_mu
    alpha = amount_part / (amount_part + mean_mu_c**2 * noise_p)
    shift = cov(p_x, mu_x) / mean_p
    d_eps = (
        var(mu_x) * noise_p
        + (shift - 2.0 * mean_mu_c) * shift * noise_p
        + cov(mu_x**2, eps_p**2)
    )
    return SnrMixture(
        snr_y=snr_y,
        snr_a=snr_a,
        snr_c=snr_c,
        alpha=alpha,
        psi=snr_y - alpha * snr_a - (1.0 - alpha) * snr_c,
        d_eps=d_eps,
        signal_y=signal_y,
        noise_y=noise_y,
    )
