"""Estimator diagnostics: ESS, replicate variance profiles, MMD, MCMC reference.

These tools quantify what the bound values alone hide: how many samples
actually contribute at each temperature, how much the per-beta estimates
scatter across independent batches, and how close a trained proposal lands to
a ground-truth posterior sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .estimators import draw_batch, local_evidence
from .models import GridSpec, LatentModel, quadrature_log_marginal
from .paths import PathSpec
from .util import derive_seeds

__all__ = [
    "ess",
    "CurveProfile",
    "curve_profile",
    "MmdConfig",
    "mmd",
    "McmcReference",
    "mcmc_reference",
    "approx_error",
]


def ess(log_weights) -> float:
    """Normalized effective sample size (sum w)^2 / (m * sum w^2), in [1/m, 1].

    Computed from unnormalized log weights entirely in log space.  Entries of
    -inf (zero weight) are allowed as long as one finite weight remains.
    """
    lw = np.asarray(log_weights, dtype=float).reshape(-1)
    if lw.size == 0:
        raise ValueError("need at least one log weight")
    if np.any(np.isnan(lw)) or np.any(lw == np.inf):
        raise ValueError("log weights must be < inf and not NaN")
    norm = logsumexp(lw)
    if not np.isfinite(norm):
        raise ValueError("all weights are zero; ESS undefined")
    return float(np.exp(2.0 * norm - logsumexp(2.0 * lw) - math.log(lw.size)))


@dataclass(frozen=True)
class CurveProfile:
    """Replicate spread of local-evidence estimates along the curve.

    Per beta: mean and variance of the estimate across ``replicates``
    independent batches, and the mean ESS.  ``ess_values`` keeps the full
    (replicate, beta) ESS matrix for trend tests.
    """

    betas: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    mean_ess: np.ndarray
    ess_values: np.ndarray
    replicates: int
    config: dict


def curve_profile(model: LatentModel, spec: PathSpec, betas, sample_size: int,
                  replicates: int, seed: int, params=None) -> CurveProfile:
    """Profile estimator mean/variance/ESS over independent replicate batches."""
    if replicates < 2:
        raise ValueError("need at least two replicates")
    betas = np.asarray(list(betas), dtype=float)
    seeds = derive_seeds(seed, replicates)
    values = np.empty((replicates, betas.size))
    ess_vals = np.empty((replicates, betas.size))
    for r in range(replicates):
        batch = draw_batch(model, sample_size, int(seeds[r]), params)
        for j, beta in enumerate(betas):
            est = local_evidence(batch, spec, beta)
            values[r, j] = est.value
            ess_vals[r, j] = est.ess
    return CurveProfile(
        betas=betas,
        means=values.mean(axis=0),
        variances=values.var(axis=0, ddof=1),
        mean_ess=ess_vals.mean(axis=0),
        ess_values=ess_vals,
        replicates=replicates,
        config={
            "path": spec.to_json(),
            "sample_size": int(sample_size),
            "seed": int(seed),
            "model": model.model_id,
        },
    )


@dataclass(frozen=True)
class MmdConfig:
    """Gaussian-kernel MMD settings; inputs are normalized by the reference."""

    bandwidth: float = 0.5

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")


def mmd(sample_a, sample_b, config: Optional[MmdConfig] = None) -> float:
    """Biased (V-statistic) Gaussian-kernel MMD between two samples.

    Both samples are first normalized by the mean and standard deviation of
    ``sample_b`` (the reference, e.g. MCMC ground truth), then compared with
    kernel exp(-|x-y|^2 / (2 h^2)).  The V-statistic includes diagonal terms,
    so the squared discrepancy is nonnegative by construction; the square root
    is returned.
    """
    config = config or MmdConfig()
    a = np.atleast_2d(np.asarray(sample_a, dtype=float))
    b = np.atleast_2d(np.asarray(sample_b, dtype=float))
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("samples must be 2-d with matching dimension")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("samples must be non-empty")
    center = b.mean(axis=0)
    scale = b.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    a = (a - center) / scale
    b = (b - center) / scale
    gamma = 0.5 / config.bandwidth**2
    k_aa = np.exp(-gamma * cdist(a, a, "sqeuclidean")).mean()
    k_bb = np.exp(-gamma * cdist(b, b, "sqeuclidean")).mean()
    k_ab = np.exp(-gamma * cdist(a, b, "sqeuclidean")).mean()
    return float(math.sqrt(max(k_aa + k_bb - 2.0 * k_ab, 0.0)))


@dataclass(frozen=True)
class McmcReference:
    """Random-walk Metropolis output used as a ground-truth posterior sample."""

    samples: np.ndarray       # (chains, draws, dim), post burn-in, thinned
    acceptance_rate: float
    step_size: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.acceptance_rate < 1.0:
            raise ValueError("acceptance rate must lie strictly in (0, 1)")

    @property
    def chains(self) -> int:
        return self.samples.shape[0]

    @property
    def pooled(self) -> np.ndarray:
        return self.samples.reshape(-1, self.samples.shape[-1])


def mcmc_reference(model: LatentModel, chains: int = 4, steps: int = 20000,
                   burn_in: int = 5000, thin: int = 10, step_size: float = 1.0,
                   seed: int = 0, params=None, tune_step: bool = True) -> McmcReference:
    """Multi-chain random-walk Metropolis targeting the model's log_target.

    Chains start from proposal draws (overdispersed relative to the
    posterior).  Proposal increments are scaled per dimension by the spread of
    a pilot draw from the model's proposal, so targets with very different
    coordinate scales still mix evenly; when ``tune_step`` is set, a short
    pilot then adjusts the global step multiplier into the 20-50% acceptance
    band.  Everything runs off one seeded generator, so results are
    deterministic given the seed.
    """
    if steps <= burn_in:
        raise ValueError("steps must exceed burn_in")
    if thin < 1 or chains < 1:
        raise ValueError("thin and chains must be >= 1")
    lam = model._resolve(params)
    rng = np.random.default_rng(seed)
    dim = model.latent_dim
    scales = model.sample_proposal(rng, 256, lam).std(axis=0)
    scales = np.where(scales > 0, scales, 1.0)
    state = model.sample_proposal(rng, chains, lam)
    log_p = model.log_target(state, lam)

    def sweep(n: int, step: float) -> int:
        nonlocal state, log_p
        accepted = 0
        for _ in range(n):
            prop = state + step * scales * rng.standard_normal((chains, dim))
            log_p_prop = model.log_target(prop, lam)
            accept = np.log(rng.uniform(size=chains)) < log_p_prop - log_p
            state = np.where(accept[:, None], prop, state)
            log_p = np.where(accept, log_p_prop, log_p)
            accepted += int(accept.sum())
        return accepted

    step = float(step_size)
    if tune_step:
        for _ in range(15):
            rate = sweep(100, step) / (100 * chains)
            if rate < 0.2:
                step *= 0.7
            elif rate > 0.5:
                step *= 1.4
            else:
                break

    accepted = sweep(burn_in, step)
    kept = []
    total = 0
    for _ in range((steps - burn_in) // thin):
        accepted += sweep(thin, step)
        total += thin
        kept.append(state.copy())
    accepted_rate = accepted / ((burn_in + total) * chains)
    if accepted_rate == 0.0:
        raise RuntimeError("sampler accepted no proposals; check step size")
    samples = np.stack(kept, axis=1)  # (chains, draws, dim)
    return McmcReference(samples=samples, acceptance_rate=float(accepted_rate),
                         step_size=step, seed=int(seed))


def approx_error(model_family: Callable[[float], LatentModel], x_grid=None,
                 estimate: Callable[[LatentModel], float] = None,
                 grid: Optional[GridSpec] = None) -> float:
    """Likelihood approximation error integral(p(x) |p(x) - p_hat(x)|) dx.

    ``estimate`` maps a model instance to its log-likelihood approximation
    (e.g. a thermodynamic bound from a seeded batch); p(x) comes from the
    quadrature oracle.  The outer integral is a trapezoid over ``x_grid``,
    which defaults to 101 points across the toys' observable range [-2.5, 2.5].
    """
    if estimate is None:
        raise TypeError("approx_error requires an estimate callable")
    if x_grid is None:
        x_grid = np.linspace(-2.5, 2.5, 101)
    x_grid = np.asarray(list(x_grid), dtype=float)
    if x_grid.ndim != 1 or x_grid.size < 2:
        raise ValueError("x_grid must contain at least two points")
    integrand = np.empty(x_grid.size)
    for i, x in enumerate(x_grid):
        model = model_family(float(x))
        p_true = math.exp(quadrature_log_marginal(model, grid))
        p_hat = math.exp(estimate(model))
        integrand[i] = p_true * abs(p_true - p_hat)
    return float(np.trapezoid(integrand, x_grid))
