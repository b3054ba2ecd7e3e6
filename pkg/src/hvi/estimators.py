"""Sample-based bound estimators built on one shared importance batch.

A single batch of proposal samples, with cached endpoint log densities, feeds
every estimator: ELBO, IW-ELBO, Renyi bounds, EUBO, the Wasserstein pair, and
the thermodynamic integrals (left/right/trapezoid Riemann sums of the local
evidence along a partition of [0, 1]).  Reweighting the same samples across
beta is what the thermodynamic estimators do by construction, so per-beta
values from one batch are correlated; replicate-based spread lives in
``diagnostics``.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .models import LatentModel
from .paths import PathSpec, blend_integrand_parts, blend_log_density
from .util import logmeanexp

__all__ = [
    "ImportanceBatch",
    "draw_batch",
    "elbo",
    "iw_elbo",
    "rvi",
    "eubo",
    "LocalEvidenceEstimate",
    "local_evidence",
    "local_evidence_curve",
    "PartitionSchedule",
    "IntegrationRule",
    "riemann_integrate",
    "rule_weights",
    "tvo",
    "hbo",
    "perturbed_hbo",
    "wasserstein_bounds",
    "BoundReport",
    "bound_report",
    "parse_bound_id",
    "LOG_PARTITION_BETA1",
]

# First interior knot of the log partition, 10^(-1.09).
LOG_PARTITION_BETA1 = 10.0 ** (-1.09)


@dataclass(frozen=True)
class ImportanceBatch:
    """Proposal samples with cached log densities, reused across all bounds.

    ``log_ratio`` caches f_i = log_target_i - log_proposal_i, the quantity
    every estimator reweights.
    """

    z: np.ndarray
    log_proposal: np.ndarray
    log_target: np.ndarray
    log_ratio: np.ndarray
    seed: int
    params: np.ndarray

    def __post_init__(self):
        if self.z.ndim != 2 or self.z.shape[0] < 1:
            raise ValueError("batch needs at least one sample")
        for name in ("log_proposal", "log_target", "log_ratio"):
            arr = getattr(self, name)
            if arr.shape != (self.z.shape[0],) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite with one entry per sample")

    @property
    def size(self) -> int:
        return self.z.shape[0]


def draw_batch(model: LatentModel, size: int, seed: int, params=None) -> ImportanceBatch:
    """Draw ``size`` proposal samples and cache both endpoint log densities."""
    if size < 1:
        raise ValueError("size must be >= 1")
    lam = model._resolve(params)
    rng = np.random.default_rng(seed)
    z = model.sample_proposal(rng, size, lam)
    l0 = model.log_proposal(z, lam)
    l1 = model.log_target(z, lam)
    return ImportanceBatch(z=z, log_proposal=l0, log_target=l1,
                           log_ratio=l1 - l0, seed=int(seed), params=lam.copy())


def elbo(batch: ImportanceBatch) -> float:
    """Monte Carlo evidence lower bound: mean of the log ratios."""
    return float(np.mean(batch.log_ratio))


def iw_elbo(batch: ImportanceBatch) -> float:
    """Importance-weighted bound: log mean exp of the log ratios."""
    return logmeanexp(batch.log_ratio)


def rvi(batch: ImportanceBatch, alpha: float) -> float:
    """Renyi bound (1/alpha) log mean exp(alpha * f); alpha = 1 is iw_elbo."""
    if not alpha > 0:
        raise ValueError("rvi requires alpha > 0; use elbo for the alpha -> 0 limit")
    return logmeanexp(alpha * batch.log_ratio) / alpha


def eubo(batch: ImportanceBatch) -> float:
    """Self-normalized estimate of the evidence upper bound (beta = 1 reweighting).

    Biased for finite batch size, like every self-normalized estimate at
    beta > 0; there is no unbiased sample-based EUBO available here.
    """
    return local_evidence(batch, PathSpec.geometric(), 1.0).value


@dataclass(frozen=True)
class LocalEvidenceEstimate:
    """A self-normalized importance estimate of the local evidence.

    ``std_err`` is the delta-method standard error of the ratio estimator and
    ``ess`` the normalized effective sample size in [1/S, 1].  ``degenerate``
    flags single-sample batches, whose spread cannot be estimated.
    """

    value: float
    std_err: float
    ess: float
    degenerate: bool = False


def _path_log_weights(batch: ImportanceBatch, spec: PathSpec, beta: float) -> np.ndarray:
    """Unnormalized log importance weights log(pi_(spec,beta)/q) per sample."""
    branch, param = spec.branch()
    if beta == 0.0:
        return np.zeros(batch.size)
    if beta == 1.0:
        return batch.log_ratio.copy()
    if branch == "geometric":
        return beta * batch.log_ratio
    if branch == "holder":
        return np.logaddexp(math.log(beta) + param * batch.log_ratio,
                            math.log1p(-beta)) / param
    return (blend_log_density(spec, batch.log_proposal, batch.log_target, beta)
            - batch.log_proposal)


def local_evidence(batch: ImportanceBatch, spec: PathSpec, beta: float) -> LocalEvidenceEstimate:
    """Estimate E_(spec,beta) by reweighting the batch to the path density."""
    beta = float(beta)
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    log_w = _path_log_weights(batch, spec, beta)
    log_norm = float(logsumexp(log_w))
    if not np.isfinite(log_norm):
        raise ValueError("all importance weights vanished; cannot self-normalize")
    weights = np.exp(log_w - log_norm)
    # weight * integrand assembled in log space: the power-mean integrand can
    # overflow exactly where the weight underflows.
    sign, log_abs = blend_integrand_parts(spec, batch.log_proposal, batch.log_target, beta)
    weighted_g = sign * np.exp(log_w - log_norm + log_abs)
    value = float(np.sum(weighted_g))
    ess = float(np.exp(2.0 * log_norm - logsumexp(2.0 * log_w) - math.log(batch.size)))
    if batch.size == 1:
        return LocalEvidenceEstimate(value=value, std_err=0.0, ess=ess, degenerate=True)
    std_err = float(np.sqrt(np.sum((weighted_g - value * weights) ** 2)))
    return LocalEvidenceEstimate(value=value, std_err=std_err, ess=ess)


def local_evidence_curve(batch: ImportanceBatch, spec: PathSpec,
                         betas) -> list[LocalEvidenceEstimate]:
    """Local evidence at several beta from the same batch (correlated across beta)."""
    return [local_evidence(batch, spec, beta) for beta in betas]


class IntegrationRule(enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    TRAPEZOID = "trapezoid"

    @classmethod
    def parse(cls, name) -> "IntegrationRule":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(
                f"unknown integration rule {name!r}; expected left, right or trapezoid"
            ) from None


@dataclass(frozen=True)
class PartitionSchedule:
    """Sorted temperatures beta_0 = 0 < ... < beta_K = 1 plus the builder tag."""

    betas: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=float).reshape(-1)
        object.__setattr__(self, "betas", betas)
        if betas.size < 2:
            raise ValueError("schedule needs at least two points")
        if betas[0] != 0.0 or betas[-1] != 1.0:
            raise ValueError("schedule endpoints must be exactly 0 and 1")
        if not np.all(np.diff(betas) > 0):
            raise ValueError("schedule must be strictly increasing")

    @property
    def partitions(self) -> int:
        return self.betas.size - 1

    @classmethod
    def uniform(cls, partitions: int) -> "PartitionSchedule":
        """Equally spaced partition of [0, 1] into ``partitions`` bins."""
        if partitions < 1:
            raise ValueError("need at least one partition")
        return cls(np.linspace(0.0, 1.0, partitions + 1), kind="uniform")

    @classmethod
    def log(cls, partitions: int, beta1: float = LOG_PARTITION_BETA1) -> "PartitionSchedule":
        """beta_0 = 0, then beta_1 .. 1 equally spaced on a log scale."""
        if partitions < 2:
            raise ValueError("log schedule needs at least two partitions")
        if not 0.0 < beta1 < 1.0:
            raise ValueError("beta1 must lie in (0, 1)")
        tail = np.logspace(math.log10(beta1), 0.0, partitions)
        tail[-1] = 1.0
        return cls(np.concatenate([[0.0], tail]), kind="log")

    def to_json(self) -> dict:
        return {"kind": self.kind, "partitions": self.partitions}


def rule_weights(betas: np.ndarray, rule: IntegrationRule) -> np.ndarray:
    """Per-point weights turning curve values into the Riemann sum value."""
    rule = IntegrationRule.parse(rule)
    betas = np.asarray(betas, dtype=float)
    gaps = np.diff(betas)
    w = np.zeros(betas.size)
    if rule in (IntegrationRule.LEFT, IntegrationRule.TRAPEZOID):
        w[:-1] += gaps * (0.5 if rule is IntegrationRule.TRAPEZOID else 1.0)
    if rule in (IntegrationRule.RIGHT, IntegrationRule.TRAPEZOID):
        w[1:] += gaps * (0.5 if rule is IntegrationRule.TRAPEZOID else 1.0)
    return w


def riemann_integrate(values: Sequence[tuple[float, float]],
                      rule: IntegrationRule = IntegrationRule.LEFT) -> float:
    """Integrate (beta, value) pairs over [0, 1] with the requested rule.

    Betas must be strictly increasing with endpoints exactly 0 and 1.
    """
    if len(values) < 2:
        raise ValueError("need at least two (beta, value) points")
    betas = np.array([b for b, _ in values], dtype=float)
    vals = np.array([v for _, v in values], dtype=float)
    if betas[0] != 0.0 or betas[-1] != 1.0:
        raise ValueError("integration endpoints must be exactly 0 and 1")
    if not np.all(np.diff(betas) > 0):
        raise ValueError("betas must be strictly increasing")
    return float(rule_weights(betas, rule) @ vals)


def _integrated_bound(batch: ImportanceBatch, spec: PathSpec,
                      schedule: PartitionSchedule, rule: IntegrationRule) -> float:
    curve = local_evidence_curve(batch, spec, schedule.betas)
    pairs = list(zip(schedule.betas, [est.value for est in curve]))
    return riemann_integrate(pairs, rule)


def tvo(batch: ImportanceBatch, schedule: Optional[PartitionSchedule] = None,
        rule: IntegrationRule = IntegrationRule.LEFT) -> float:
    """Thermodynamic bound on the geometric path (default: log partition, K=50)."""
    schedule = schedule or PartitionSchedule.log(50)
    return _integrated_bound(batch, PathSpec.geometric(), schedule, rule)


def hbo(batch: ImportanceBatch, alpha: float,
        schedule: Optional[PartitionSchedule] = None,
        rule: IntegrationRule = IntegrationRule.LEFT) -> float:
    """Holder bound of order alpha (default: uniform partition, K=50)."""
    schedule = schedule or PartitionSchedule.uniform(50)
    return _integrated_bound(batch, PathSpec.holder(alpha), schedule, rule)


def perturbed_hbo(batch: ImportanceBatch, delta: float,
                  schedule: Optional[PartitionSchedule] = None,
                  rule: IntegrationRule = IntegrationRule.LEFT) -> float:
    """First-order-in-delta surrogate of hbo(delta) (default: uniform, K=50)."""
    schedule = schedule or PartitionSchedule.uniform(50)
    return _integrated_bound(batch, PathSpec.perturbed(delta), schedule, rule)


def wasserstein_bounds(batch: ImportanceBatch) -> tuple[float, float]:
    """(wlbo, wubo): endpoints of the arithmetic-mean thermodynamic curve.

    wlbo is the beta = 1 local evidence on the arithmetic path, wubo the
    beta = 0 one (the plain sample mean of e^f - 1).
    """
    spec = PathSpec.wasserstein()
    wlbo = local_evidence(batch, spec, 1.0).value
    wubo = local_evidence(batch, spec, 0.0).value
    return wlbo, wubo


# ---------------------------------------------------------------------------
# Bound reports
# ---------------------------------------------------------------------------

_BOUND_ID = re.compile(r"^([a-z_]+)(?:\[([^\]]+)\])?$")

_PLAIN_BOUNDS = ("elbo", "iw_elbo", "eubo", "wlbo", "wubo", "tvo")
_PARAM_BOUNDS = ("rvi", "hbo", "perturbed_hbo")


def parse_bound_id(bound_id: str) -> tuple[str, Optional[float]]:
    """Split a bound id like ``hbo[0.8]`` into its name and parameter."""
    m = _BOUND_ID.match(bound_id.strip())
    if not m:
        raise ValueError(f"malformed bound id {bound_id!r}")
    name, arg = m.group(1), m.group(2)
    if name in _PLAIN_BOUNDS:
        if arg is not None:
            raise ValueError(f"bound {name!r} takes no parameter")
        return name, None
    if name in _PARAM_BOUNDS:
        if arg is None:
            raise ValueError(f"bound {name!r} needs a parameter, e.g. {name}[0.5]")
        return name, float(arg)
    raise ValueError(f"unknown bound id {bound_id!r}")


@dataclass
class BoundReport:
    """Named bound values from one batch, plus the configuration that made them."""

    values: dict[str, float]
    metadata: dict

    def __post_init__(self):
        bad = [k for k, v in self.values.items() if not np.isfinite(v)]
        if bad:
            raise ValueError(f"non-finite bound values for {bad}")

    def to_json(self) -> dict:
        return {"values": dict(self.values), "metadata": dict(self.metadata)}

    def csv_row(self) -> list[float]:
        """One value per bound id, in request order (pairs with list(values))."""
        return [self.values[k] for k in self.values]


def bound_report(batch: ImportanceBatch, bounds: Sequence[str],
                 tvo_schedule: Optional[PartitionSchedule] = None,
                 hbo_schedule: Optional[PartitionSchedule] = None,
                 rule: IntegrationRule = IntegrationRule.LEFT) -> BoundReport:
    """Evaluate the requested bound ids on one shared batch."""
    tvo_schedule = tvo_schedule or PartitionSchedule.log(50)
    hbo_schedule = hbo_schedule or PartitionSchedule.uniform(50)
    rule = IntegrationRule.parse(rule)
    values: dict[str, float] = {}
    wasserstein_cache: Optional[tuple[float, float]] = None
    for bound_id in bounds:
        name, arg = parse_bound_id(bound_id)
        if name == "elbo":
            values[bound_id] = elbo(batch)
        elif name == "iw_elbo":
            values[bound_id] = iw_elbo(batch)
        elif name == "eubo":
            values[bound_id] = eubo(batch)
        elif name in ("wlbo", "wubo"):
            if wasserstein_cache is None:
                wasserstein_cache = wasserstein_bounds(batch)
            values[bound_id] = wasserstein_cache[0 if name == "wlbo" else 1]
        elif name == "tvo":
            values[bound_id] = tvo(batch, tvo_schedule, rule)
        elif name == "rvi":
            values[bound_id] = rvi(batch, arg)
        elif name == "hbo":
            values[bound_id] = hbo(batch, arg, hbo_schedule, rule)
        else:
            values[bound_id] = perturbed_hbo(batch, arg, hbo_schedule, rule)
    metadata = {
        "sample_size": batch.size,
        "seed": batch.seed,
        "rule": rule.value,
        "tvo_schedule": tvo_schedule.to_json(),
        "hbo_schedule": hbo_schedule.to_json(),
    }
    return BoundReport(values=values, metadata=metadata)
