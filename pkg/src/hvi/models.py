"""Latent-variable test models and dense-grid quadrature oracles.

Each built-in bundles an unnormalized target log density log p(x, z), a
normalized proposal log q(z|x), a proposal sampler, and log-density gradients
with respect to the flat parameter vector lambda = (theta, phi).  Evaluators
are pure functions of (z, lambda); all randomness lives in the sampler, which
takes a caller-owned Generator.

The quadrature helpers integrate on dense trapezoid grids in log space.  For
the 1-D and 2-D built-ins their error is far below every test tolerance, which
makes them usable as ground truth for the sample-based estimators.

Built-ins (addressable by string id through ``make_model``):

  scaled_factor       pi_1 = c * pi_0 with pi_0 = N(0, 1); log p(x) = log c.
  conjugate_gaussian  z ~ N(0,1), x|z ~ N(z, sigma^2); closed-form marginal
                      N(x; 0, 1+sigma^2) and posterior N(x/(1+sigma^2),
                      sigma^2/(1+sigma^2)), which is the default proposal.
  sin_toy             x ~ N(sin z, 0.1^2), z ~ N(0,1), proposal N(0, 1.5^2).
  ring                y = sqrt(z1^2+z2^2) + N(0, 0.1^2), z ~ N(0, I); the
                      posterior is a ring of radius ~y.
  bayes_regression    y_i ~ N(a + b*x_i, s^2) with prior (1+b^2)^(-3/2) on
                      (a, b) and 1/s on s; latent coordinates (a, b, log s).
"""

from __future__ import annotations

import inspect
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .paths import PathSpec, blend_integrand_parts, blend_log_density

__all__ = [
    "ModelParameters",
    "LatentModel",
    "BayesRegressionDataset",
    "make_scaled_factor",
    "make_conjugate_gaussian",
    "conjugate_exact_log_marginal",
    "make_sin_toy",
    "make_ring",
    "simulate_bayes_dataset",
    "make_bayes_regression",
    "make_model",
    "MODEL_IDS",
    "GridSpec",
    "quadrature_grid",
    "quadrature_log_marginal",
    "quadrature_local_evidence",
    "quadrature_local_evidence_curve",
    "quadrature_curve_slope",
    "quadrature_rvi",
]

_LOG_2PI = math.log(2.0 * math.pi)

SIN_TOY_OBS_STD = 0.1      # observation noise of the sin toy, variance 1e-2
RING_OBS_STD = 0.1         # observation noise of the ring model
BAYES_TRUE_INTERCEPT = 25.0
BAYES_TRUE_SLOPE = 0.5
BAYES_TRUE_NOISE_VAR = 10.0


def _norm_logpdf(x, mean, std):
    u = (x - mean) / std
    return -0.5 * u * u - np.log(std) - 0.5 * _LOG_2PI


@dataclass(frozen=True)
class ModelParameters:
    """Flat parameter vector lambda with named components.

    The first ``theta_size`` entries belong to the model (theta), the rest to
    the proposal (phi).
    """

    names: tuple[str, ...]
    values: np.ndarray
    theta_size: int

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))
        if len(self.names) != values.size:
            raise ValueError("names and values must have equal length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("parameter names must be unique")
        if not 0 <= self.theta_size <= values.size:
            raise ValueError("theta_size out of range")

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def theta(self) -> np.ndarray:
        return self.values[: self.theta_size]

    @property
    def phi(self) -> np.ndarray:
        return self.values[self.theta_size :]

    @property
    def theta_names(self) -> tuple[str, ...]:
        return self.names[: self.theta_size]

    @property
    def phi_names(self) -> tuple[str, ...]:
        return self.names[self.theta_size :]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown parameter {name!r}") from None

    def with_values(self, values) -> "ModelParameters":
        return ModelParameters(self.names, np.asarray(values, dtype=float),
                               self.theta_size)


def _as_points(z, dim: int) -> tuple[np.ndarray, bool]:
    """Canonicalize latent input to shape (n, dim); flag single-point input."""
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 0:
        if dim != 1:
            raise ValueError(f"scalar z given but latent_dim = {dim}")
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if dim == 1:
            return arr.reshape(-1, 1), False
        if arr.shape[0] == dim:
            return arr.reshape(1, dim), True
        raise ValueError(f"1-d z of length {arr.shape[0]} does not match latent_dim {dim}")
    if arr.ndim == 2 and arr.shape[1] == dim:
        return arr, False
    raise ValueError(f"z with shape {arr.shape} does not match latent_dim {dim}")


@dataclass(frozen=True)
class LatentModel:
    """A latent-variable model: target and proposal log densities plus sampler.

    ``log_target`` is unnormalized in z (log p(x, z)); ``log_proposal`` is a
    normalized density (log q(z|x)).  Gradients, when provided, are with
    respect to the full flat parameter vector and have shape (n, size).
    Evaluators are pure; the model carries no mutable state.
    """

    model_id: str
    latent_dim: int
    default_params: ModelParameters
    quadrature_domain: tuple[tuple[float, float], ...]
    _log_target: Callable
    _log_proposal: Callable
    _sample_proposal: Callable
    _grad_log_target: Optional[Callable] = None
    _grad_log_proposal: Optional[Callable] = None

    def _resolve(self, params) -> np.ndarray:
        if params is None:
            return self.default_params.values
        if isinstance(params, ModelParameters):
            return params.values
        lam = np.asarray(params, dtype=float).reshape(-1)
        if lam.size != self.default_params.size:
            raise ValueError(
                f"expected {self.default_params.size} parameters, got {lam.size}")
        return lam

    @property
    def has_gradients(self) -> bool:
        return self._grad_log_target is not None and self._grad_log_proposal is not None

    def log_target(self, z, params=None):
        pts, single = _as_points(z, self.latent_dim)
        out = self._log_target(pts, self._resolve(params))
        return float(out[0]) if single else out

    def log_proposal(self, z, params=None):
        pts, single = _as_points(z, self.latent_dim)
        out = self._log_proposal(pts, self._resolve(params))
        return float(out[0]) if single else out

    def sample_proposal(self, rng: np.random.Generator, size: int, params=None):
        return self._sample_proposal(rng, self._resolve(params), int(size))

    def grad_log_target(self, z, params=None):
        if self._grad_log_target is None:
            raise ValueError(f"model {self.model_id!r} does not provide gradients")
        pts, single = _as_points(z, self.latent_dim)
        out = self._grad_log_target(pts, self._resolve(params))
        return out[0] if single else out

    def grad_log_proposal(self, z, params=None):
        if self._grad_log_proposal is None:
            raise ValueError(f"model {self.model_id!r} does not provide gradients")
        pts, single = _as_points(z, self.latent_dim)
        out = self._grad_log_proposal(pts, self._resolve(params))
        return out[0] if single else out


def _diag_gaussian_proposal(theta_size: int, dim: int):
    """Proposal callables for a diagonal Gaussian with phi = (means, log stds)."""

    def split(lam):
        mean = lam[theta_size : theta_size + dim]
        std = np.exp(lam[theta_size + dim : theta_size + 2 * dim])
        return mean, std

    def log_proposal(pts, lam):
        mean, std = split(lam)
        return _norm_logpdf(pts, mean, std).sum(axis=1)

    def sample(rng, lam, n):
        mean, std = split(lam)
        return mean + std * rng.standard_normal((n, dim))

    def grad(pts, lam):
        mean, std = split(lam)
        u = (pts - mean) / std
        g = np.zeros((pts.shape[0], lam.size))
        g[:, theta_size : theta_size + dim] = u / std
        g[:, theta_size + dim : theta_size + 2 * dim] = u * u - 1.0
        return g

    return log_proposal, sample, grad


def make_scaled_factor(scale: float) -> LatentModel:
    """Analytic oracle: pi_1 = c * pi_0 with pi_0 = N(0, 1), so log p(x) = log c.

    The single parameter is theta = log c; the proposal is fixed.  Every bound
    and local evidence has a closed form on this model, which makes it the
    primary exactness fixture.
    """
    scale = float(scale)
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    params = ModelParameters(("log_scale",), np.array([math.log(scale)]), theta_size=1)

    def log_proposal(pts, lam):
        return _norm_logpdf(pts, 0.0, 1.0).sum(axis=1)

    def log_target(pts, lam):
        return lam[0] + log_proposal(pts, lam)

    def sample(rng, lam, n):
        return rng.standard_normal((n, 1))

    def grad_target(pts, lam):
        return np.ones((pts.shape[0], 1))

    def grad_proposal(pts, lam):
        return np.zeros((pts.shape[0], 1))

    return LatentModel(
        model_id="scaled_factor",
        latent_dim=1,
        default_params=params,
        quadrature_domain=((-8.0, 8.0),),
        _log_target=log_target,
        _log_proposal=log_proposal,
        _sample_proposal=sample,
        _grad_log_target=grad_target,
        _grad_log_proposal=grad_proposal,
    )


def conjugate_exact_log_marginal(sigma: float, x_obs: float) -> float:
    """Closed-form log p(x) = log N(x; 0, 1 + sigma^2) for the conjugate model."""
    return float(_norm_logpdf(x_obs, 0.0, math.sqrt(1.0 + sigma**2)))


def make_conjugate_gaussian(sigma: float, x_obs: float) -> LatentModel:
    """Conjugate pair z ~ N(0,1), x|z ~ N(z, sigma^2).

    The marginal is N(x; 0, 1+sigma^2) in closed form, and the default
    proposal is the exact posterior N(x/(1+sigma^2), sigma^2/(1+sigma^2)),
    exposed through phi = (mean, log std) so it can be perturbed and trained.
    """
    sigma = float(sigma)
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x_obs = float(x_obs)
    post_mean = x_obs / (1.0 + sigma**2)
    post_var = sigma**2 / (1.0 + sigma**2)
    params = ModelParameters(
        ("q_mean", "q_log_std"),
        np.array([post_mean, 0.5 * math.log(post_var)]),
        theta_size=0,
    )
    log_proposal, sample, grad_proposal = _diag_gaussian_proposal(0, 1)

    def log_target(pts, lam):
        z = pts[:, 0]
        return _norm_logpdf(z, 0.0, 1.0) + _norm_logpdf(x_obs, z, sigma)

    def grad_target(pts, lam):
        return np.zeros((pts.shape[0], lam.size))

    return LatentModel(
        model_id="conjugate_gaussian",
        latent_dim=1,
        default_params=params,
        quadrature_domain=((post_mean - 8.0, post_mean + 8.0),),
        _log_target=log_target,
        _log_proposal=log_proposal,
        _sample_proposal=sample,
        _grad_log_target=grad_target,
        _grad_log_proposal=grad_proposal,
    )


def make_sin_toy(x_obs: float = 0.0, proposal_mean: float = 0.0,
                 proposal_std: float = 1.5) -> LatentModel:
    """Toy model x ~ N(sin z, 0.1^2), z ~ N(0, 1), proposal N(0, 1.5^2).

    The proposal is deliberately mismatched to the multimodal posterior and
    held fixed in the sharpness experiments; its (mean, log std) are exposed
    as phi so gradient and training paths stay exercisable.
    """
    x_obs = float(x_obs)
    proposal_std = float(proposal_std)
    if not proposal_std > 0:
        raise ValueError("proposal_std must be positive")
    params = ModelParameters(
        ("q_mean", "q_log_std"),
        np.array([float(proposal_mean), math.log(proposal_std)]),
        theta_size=0,
    )
    log_proposal, sample, grad_proposal = _diag_gaussian_proposal(0, 1)

    def log_target(pts, lam):
        z = pts[:, 0]
        return _norm_logpdf(z, 0.0, 1.0) + _norm_logpdf(x_obs, np.sin(z), SIN_TOY_OBS_STD)

    def grad_target(pts, lam):
        return np.zeros((pts.shape[0], lam.size))

    lo = float(proposal_mean) - 8.0 * proposal_std
    hi = float(proposal_mean) + 8.0 * proposal_std
    return LatentModel(
        model_id="sin_toy",
        latent_dim=1,
        default_params=params,
        quadrature_domain=((lo, hi),),
        _log_target=log_target,
        _log_proposal=log_proposal,
        _sample_proposal=sample,
        _grad_log_target=grad_target,
        _grad_log_proposal=grad_proposal,
    )


def make_ring(y_obs: float = 1.0) -> LatentModel:
    """Ring model y = sqrt(z1^2 + z2^2) + N(0, 0.1^2) with z ~ N(0, I).

    For y around 1 the posterior is an annulus of radius ~y.  The default
    proposal N(0, 0.5*I) matches the posterior second moment E[z_i^2] ~ 1/2;
    phi = (means, log stds) of the diagonal Gaussian.
    """
    y_obs = float(y_obs)
    default_std = math.sqrt(0.5)
    params = ModelParameters(
        ("q_mean_1", "q_mean_2", "q_log_std_1", "q_log_std_2"),
        np.array([0.0, 0.0, math.log(default_std), math.log(default_std)]),
        theta_size=0,
    )
    log_proposal, sample, grad_proposal = _diag_gaussian_proposal(0, 2)

    def log_target(pts, lam):
        r = np.sqrt(pts[:, 0] ** 2 + pts[:, 1] ** 2)
        prior = _norm_logpdf(pts, 0.0, 1.0).sum(axis=1)
        return prior + _norm_logpdf(y_obs, r, RING_OBS_STD)

    def grad_target(pts, lam):
        return np.zeros((pts.shape[0], lam.size))

    return LatentModel(
        model_id="ring",
        latent_dim=2,
        default_params=params,
        quadrature_domain=((-4.0, 4.0), (-4.0, 4.0)),
        _log_target=log_target,
        _log_proposal=log_proposal,
        _sample_proposal=sample,
        _grad_log_target=grad_target,
        _grad_log_proposal=grad_proposal,
    )


@dataclass(frozen=True)
class BayesRegressionDataset:
    """Observed (x_i, y_i) pairs for the Bayesian regression model."""

    x: np.ndarray
    y: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be equal-length 1-d arrays")

    @property
    def n(self) -> int:
        return self.x.size


def simulate_bayes_dataset(seed: int = 0, n: int = 20) -> BayesRegressionDataset:
    """Simulate the regression data: x~ ~ U[0,100], y = 25 + 0.5*x~ + noise.

    Both the response noise and the covariate noise (x = x~ + noise) are
    N(0, 10).  Deterministic given the seed.
    """
    rng = np.random.default_rng(seed)
    noise_std = math.sqrt(BAYES_TRUE_NOISE_VAR)
    x_latent = rng.uniform(0.0, 100.0, size=n)
    y = BAYES_TRUE_INTERCEPT + BAYES_TRUE_SLOPE * x_latent + rng.normal(0.0, noise_std, size=n)
    x = x_latent + rng.normal(0.0, noise_std, size=n)
    return BayesRegressionDataset(x=x, y=y, seed=int(seed))


def make_bayes_regression(data: BayesRegressionDataset) -> LatentModel:
    """Bayesian regression posterior over (a, b, log s), conditioned on observed x.

    log p(D, z) = -(3/2) log(1 + b^2) + sum_i log N(y_i; a + b x_i, s^2); the
    1/s prior is flat in the log s coordinate.  The proposal is a diagonal
    Gaussian over (a, b, log s) whose default means come from the OLS fit,
    with deliberately overdispersed default spreads.
    """
    if data.n == 0:
        raise ValueError("dataset must be non-empty")
    x, y = data.x, data.y
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean()) / sxx) if sxx > 0 else 0.0
    intercept = float(y.mean() - slope * x.mean())
    resid = y - intercept - slope * x
    dof = max(data.n - 2, 1)
    resid_std = float(np.sqrt(resid @ resid / dof))
    params = ModelParameters(
        ("q_mean_alpha", "q_mean_beta", "q_mean_log_sigma",
         "q_log_std_alpha", "q_log_std_beta", "q_log_std_log_sigma"),
        np.array([intercept, slope, math.log(resid_std),
                  math.log(3.0), math.log(0.05), math.log(0.3)]),
        theta_size=0,
    )
    log_proposal, sample, grad_proposal = _diag_gaussian_proposal(0, 3)

    def log_target(pts, lam):
        a = pts[:, 0:1]
        b = pts[:, 1:2]
        log_s = pts[:, 2:3]
        resid = y[None, :] - a - b * x[None, :]
        loglik = (-log_s - 0.5 * _LOG_2PI
                  - 0.5 * np.exp(-2.0 * log_s) * resid * resid).sum(axis=1)
        prior = -1.5 * np.log1p(b[:, 0] ** 2)
        return prior + loglik

    def grad_target(pts, lam):
        return np.zeros((pts.shape[0], lam.size))

    means = params.values[:3]
    stds = np.exp(params.values[3:])
    domain = tuple((float(m - 8 * s), float(m + 8 * s)) for m, s in zip(means, stds))
    return LatentModel(
        model_id="bayes_regression",
        latent_dim=3,
        default_params=params,
        quadrature_domain=domain,
        _log_target=log_target,
        _log_proposal=log_proposal,
        _sample_proposal=sample,
        _grad_log_target=grad_target,
        _grad_log_proposal=grad_proposal,
    )


def _bayes_regression_from_seed(seed: int = 0, n: int = 20) -> LatentModel:
    return make_bayes_regression(simulate_bayes_dataset(seed=seed, n=n))


_BUILDERS: dict[str, Callable[..., LatentModel]] = {
    "scaled_factor": make_scaled_factor,
    "conjugate_gaussian": make_conjugate_gaussian,
    "sin_toy": make_sin_toy,
    "ring": make_ring,
    "bayes_regression": _bayes_regression_from_seed,
}

MODEL_IDS = tuple(sorted(_BUILDERS))


def make_model(model_id: str, params: Optional[dict] = None) -> LatentModel:
    """Build a built-in model from its string id and a JSON parameter object."""
    try:
        builder = _BUILDERS[model_id]
    except KeyError:
        raise ValueError(f"unknown model id {model_id!r}; expected one of {MODEL_IDS}") from None
    kwargs = dict(params or {})
    try:
        inspect.signature(builder).bind(**kwargs)
    except TypeError as exc:
        raise ValueError(f"model {model_id!r}: {exc}") from None
    return builder(**kwargs)


# ---------------------------------------------------------------------------
# Dense-grid quadrature oracles (latent_dim <= 2)
# ---------------------------------------------------------------------------

DEFAULT_GRID_POINTS = {1: 20001, 2: 801}


@dataclass(frozen=True)
class GridSpec:
    """Grid override: points per axis and/or integration domain."""

    points: Optional[int] = None
    domain: Optional[tuple[tuple[float, float], ...]] = None


def quadrature_grid(model: LatentModel, grid: Optional[GridSpec] = None):
    """Tensor trapezoid grid: points of shape (N, dim) and log cell weights (N,)."""
    if model.latent_dim > 2:
        raise ValueError("quadrature oracles support latent_dim <= 2 only")
    grid = grid or GridSpec()
    points = grid.points or DEFAULT_GRID_POINTS[model.latent_dim]
    if points < 2:
        raise ValueError("grid needs at least 2 points per axis")
    domain = grid.domain or model.quadrature_domain
    if len(domain) != model.latent_dim:
        raise ValueError("domain dimensionality mismatch")
    axes, log_ws = [], []
    for lo, hi in domain:
        if not hi > lo:
            raise ValueError("empty quadrature interval")
        axis = np.linspace(lo, hi, points)
        h = (hi - lo) / (points - 1)
        w = np.full(points, h)
        w[0] = w[-1] = 0.5 * h
        axes.append(axis)
        log_ws.append(np.log(w))
    if model.latent_dim == 1:
        return axes[0].reshape(-1, 1), log_ws[0]
    za, zb = np.meshgrid(axes[0], axes[1], indexing="ij")
    pts = np.column_stack([za.ravel(), zb.ravel()])
    logw = (log_ws[0][:, None] + log_ws[1][None, :]).ravel()
    return pts, logw


def _grid_log_densities(model, grid, params):
    pts, logw = quadrature_grid(model, grid)
    l0 = model.log_proposal(pts, params)
    l1 = model.log_target(pts, params)
    if not (np.all(np.isfinite(l0)) and np.all(np.isfinite(l1))):
        raise ValueError("non-finite log density on the quadrature grid")
    return l0, l1, logw


def quadrature_log_marginal(model: LatentModel, grid: Optional[GridSpec] = None,
                            params=None) -> float:
    """log integral of exp(log_target): the ground-truth log p(x)."""
    _, l1, logw = _grid_log_densities(model, grid, params)
    return float(logsumexp(l1 + logw))


def quadrature_local_evidence_curve(model: LatentModel, alpha: float, betas,
                                    grid: Optional[GridSpec] = None,
                                    params=None) -> np.ndarray:
    """Exact local evidence E_(alpha,beta) at several beta, one grid pass."""
    l0, l1, logw = _grid_log_densities(model, grid, params)
    spec = PathSpec.holder(float(alpha))
    out = np.empty(len(betas))
    for i, beta in enumerate(betas):
        log_mass = blend_log_density(spec, l0, l1, beta) + logw
        log_mass -= logsumexp(log_mass)
        # The integrand can overflow where the path density underflows, so the
        # product weight * integrand is assembled jointly in log space.
        sign, log_abs = blend_integrand_parts(spec, l0, l1, beta)
        out[i] = float(np.sum(sign * np.exp(log_mass + log_abs)))
    return out


def quadrature_local_evidence(model: LatentModel, alpha: float, beta: float,
                              grid: Optional[GridSpec] = None, params=None) -> float:
    """Exact local evidence: expectation of the path integrand under pi_(alpha,beta)."""
    return float(quadrature_local_evidence_curve(model, alpha, [beta], grid, params)[0])


def quadrature_curve_slope(model: LatentModel, alpha: float, beta: float,
                           grid: Optional[GridSpec] = None, params=None) -> float:
    """Analytic d/dbeta of the local evidence: -E[g]^2 + (1-alpha) E[g^2].

    g is the path integrand and both moments are taken under the normalized
    intermediate density.
    """
    l0, l1, logw = _grid_log_densities(model, grid, params)
    spec = PathSpec.holder(float(alpha))
    log_mass = blend_log_density(spec, l0, l1, beta) + logw
    log_mass -= logsumexp(log_mass)
    sign, log_abs = blend_integrand_parts(spec, l0, l1, beta)
    first = float(np.sum(sign * np.exp(log_mass + log_abs)))
    second = float(np.sum(np.exp(log_mass + 2.0 * log_abs)))
    return -first * first + (1.0 - alpha) * second


def quadrature_rvi(model: LatentModel, alpha: float,
                   grid: Optional[GridSpec] = None, params=None) -> float:
    """Exact Renyi bound (1/alpha) log int q^(1-alpha) p^alpha for alpha > 0."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    l0, l1, logw = _grid_log_densities(model, grid, params)
    return float(logsumexp(alpha * l1 + (1.0 - alpha) * l0 + logw)) / alpha
