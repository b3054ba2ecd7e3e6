"""Interpolation paths between proposal and target, evaluated in log space.

A path assigns to every temperature beta in [0, 1] an unnormalized density
pi_beta interpolating between the proposal pi_0 = q(z|x) (at beta = 0) and the
unnormalized target pi_1 = p(x, z) (at beta = 1).  Everything here is written
in terms of the two endpoint log densities L0 = log pi_0(z) and L1 = log pi_1(z),
which is what callers (estimators, quadrature oracles) have cached; the raw
densities are never exponentiated on their own scale.

Supported families:

  geometric     U = beta*L1 + (1-beta)*L0, integrand f = L1 - L0.
  holder(a)     weighted power mean of order a:
                  exp(a*U) = beta*exp(a*L1) + (1-beta)*exp(a*L0),
                  integrand (1/a) * (e^(a*L1) - e^(a*L0)) / e^(a*U).
                a -> 0 recovers the geometric path; a = 1 is the arithmetic
                (Wasserstein) mean.
  wasserstein   alias for holder(1).
  perturbed(d)  first-order expansion of the holder path around a = 0:
                  U = U_geo + (d/2) * (beta*L1^2 + (1-beta)*L0^2 - U_geo^2),
                  integrand f + (1/2 - beta)*f^2*d.
                Both corrections are O(d); their residual against the exact
                holder(d) path is O(d^2).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .util import log_abs_expm1

__all__ = [
    "GEOMETRIC_ALPHA_CUTOFF",
    "PERTURBATION_GUARD",
    "PathSpec",
    "blend_log_density",
    "blend_integrand",
    "blend_integrand_parts",
    "log_path_density",
    "path_integrand",
    "log_density_gradient_coeffs",
    "integrand_gradient_coeffs",
]

# Below this |alpha| the power-mean branch has no working precision left and
# the path is numerically indistinguishable from geometric anyway.
GEOMETRIC_ALPHA_CUTOFF = 1e-6

# Soft validity guard for the perturbed path; the expansion only needs
# |delta| << 1, so large values warn instead of raising.
PERTURBATION_GUARD = 0.2

_KINDS = ("geometric", "holder", "wasserstein", "perturbed")


@dataclass(frozen=True)
class PathSpec:
    """Which interpolation family to use, plus its parameter.

    ``holder(0)`` behaves identically to ``geometric()`` and ``holder(1)``
    identically to ``wasserstein()``.
    """

    kind: str
    alpha: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown path kind {self.kind!r}; expected one of {_KINDS}")
        if not np.isfinite(self.alpha) or not np.isfinite(self.delta):
            raise ValueError("path parameters must be finite")
        if self.kind == "perturbed" and abs(self.delta) > PERTURBATION_GUARD:
            warnings.warn(
                f"perturbed path with |delta| = {abs(self.delta):g} > {PERTURBATION_GUARD}; "
                "the first-order expansion is only trustworthy for small delta",
                stacklevel=2,
            )

    @classmethod
    def geometric(cls) -> "PathSpec":
        return cls("geometric")

    @classmethod
    def holder(cls, alpha: float) -> "PathSpec":
        return cls("holder", alpha=float(alpha))

    @classmethod
    def wasserstein(cls) -> "PathSpec":
        return cls("wasserstein")

    @classmethod
    def perturbed(cls, delta: float) -> "PathSpec":
        return cls("perturbed", delta=float(delta))

    def branch(self) -> tuple[str, float]:
        """Resolve to the actual evaluation branch: (name, parameter)."""
        if self.kind == "geometric":
            return ("geometric", 0.0)
        if self.kind == "wasserstein":
            return ("holder", 1.0)
        if self.kind == "holder":
            if abs(self.alpha) < GEOMETRIC_ALPHA_CUTOFF:
                return ("geometric", 0.0)
            return ("holder", self.alpha)
        return ("perturbed", self.delta)

    def label(self) -> str:
        if self.kind == "holder":
            return f"holder[{self.alpha:g}]"
        if self.kind == "perturbed":
            return f"perturbed[{self.delta:g}]"
        return self.kind

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "holder":
            out["alpha"] = self.alpha
        elif self.kind == "perturbed":
            out["delta"] = self.delta
        return out

    @classmethod
    def from_json(cls, data: dict) -> "PathSpec":
        extra = set(data) - {"kind", "alpha", "delta"}
        if extra:
            raise ValueError(f"unknown path keys: {sorted(extra)}")
        kind = data.get("kind")
        if kind == "holder":
            return cls.holder(data.get("alpha", 0.0))
        if kind == "perturbed":
            return cls.perturbed(data.get("delta", 0.0))
        if kind in ("geometric", "wasserstein"):
            return cls(kind)
        raise ValueError(f"unknown path kind {kind!r}")


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    return beta


def _holder_log_alpha_u(alpha: float, l0, l1, beta: float):
    """alpha * U on the holder path; exact at the endpoints."""
    if beta == 0.0:
        return alpha * np.asarray(l0, dtype=float)
    if beta == 1.0:
        return alpha * np.asarray(l1, dtype=float)
    return np.logaddexp(np.log(beta) + alpha * np.asarray(l1, dtype=float),
                        np.log1p(-beta) + alpha * np.asarray(l0, dtype=float))


def blend_log_density(spec: PathSpec, log_proposal, log_target, beta: float):
    """log pi_beta(z) from the endpoint log densities L0, L1."""
    beta = _check_beta(beta)
    l0 = np.asarray(log_proposal, dtype=float)
    l1 = np.asarray(log_target, dtype=float)
    branch, param = spec.branch()
    if beta == 0.0:
        base = l0
    elif beta == 1.0:
        base = l1
    elif branch == "holder":
        return _holder_log_alpha_u(param, l0, l1, beta) / param
    else:
        base = beta * l1 + (1.0 - beta) * l0
    if branch == "perturbed" and param != 0.0:
        # First-order term of the holder log density in alpha at 0.  The
        # quadratic mean beta*L1^2 + (1-beta)*L0^2 must be recentered by the
        # squared geometric mean, otherwise the correction is O(1), not O(d).
        m = beta * l1 + (1.0 - beta) * l0
        q = beta * l1**2 + (1.0 - beta) * l0**2
        return base + 0.5 * param * (q - m * m)
    return base


def blend_integrand_parts(spec: PathSpec, log_proposal, log_target, beta: float):
    """Sign and log magnitude of the local-evidence integrand.

    The integrand on the power-mean path, (1/a)(e^(a L1) - e^(a L0))/e^(a U),
    can be astronomically large near beta = 1 wherever the target is far below
    the proposal, so consumers that multiply it with importance weights must
    combine the two in log space.  Returns (sign, log |integrand|).
    """
    beta = _check_beta(beta)
    l0 = np.asarray(log_proposal, dtype=float)
    l1 = np.asarray(log_target, dtype=float)
    f = l1 - l0
    branch, param = spec.branch()
    if branch in ("geometric", "perturbed"):
        g = f if branch == "geometric" else f + (0.5 - beta) * f * f * param
        with np.errstate(divide="ignore"):
            return np.sign(g), np.log(np.abs(g))
    alpha = param
    a_u = _holder_log_alpha_u(alpha, l0, l1, beta)
    with np.errstate(invalid="ignore"):
        log_mag = (alpha * np.maximum(l0, l1) - a_u
                   + log_abs_expm1(-alpha * np.abs(f)) - np.log(abs(alpha)))
    return np.sign(f), log_mag


def blend_integrand(spec: PathSpec, log_proposal, log_target, beta: float):
    """d/dbeta log pi_beta(z), the local-evidence integrand, from L0 and L1.

    May legitimately overflow to +-inf on the power-mean branch for extreme
    log ratios; use blend_integrand_parts when pairing with weights.
    """
    branch, param = spec.branch()
    l0 = np.asarray(log_proposal, dtype=float)
    l1 = np.asarray(log_target, dtype=float)
    if branch == "geometric":
        _check_beta(beta)
        return l1 - l0
    if branch == "perturbed":
        f = l1 - l0
        return f + (0.5 - _check_beta(beta)) * f * f * param
    sign, log_mag = blend_integrand_parts(spec, l0, l1, beta)
    with np.errstate(over="ignore"):
        return sign * np.exp(log_mag)


def log_path_density(spec: PathSpec, model, beta: float, z, params=None):
    """log pi_beta at latent point(s) z for a model; see blend_log_density."""
    l0 = model.log_proposal(z, params)
    l1 = model.log_target(z, params)
    return blend_log_density(spec, l0, l1, beta)


def path_integrand(spec: PathSpec, model, beta: float, z, params=None):
    """Local-evidence integrand at latent point(s) z; see blend_integrand."""
    l0 = model.log_proposal(z, params)
    l1 = model.log_target(z, params)
    return blend_integrand(spec, l0, l1, beta)


def log_density_gradient_coeffs(spec: PathSpec, log_proposal, log_target, beta: float):
    """Coefficients (c0, c1) with grad log pi_beta = c0*grad L0 + c1*grad L1.

    Geometric: (1-beta, beta).  Holder: the convex weights
    c1 = beta*e^(a L1)/e^(a U), c0 = 1 - c1.  Perturbed: the derivative of the
    expanded log density, linear in grad L0 and grad L1.
    """
    beta = _check_beta(beta)
    l0 = np.asarray(log_proposal, dtype=float)
    l1 = np.asarray(log_target, dtype=float)
    branch, param = spec.branch()
    if branch == "geometric":
        shape = np.broadcast(l0, l1).shape
        return np.full(shape, 1.0 - beta), np.full(shape, beta)
    if branch == "holder":
        a_u = _holder_log_alpha_u(param, l0, l1, beta)
        if beta == 0.0:
            c1 = np.zeros_like(l0)
        elif beta == 1.0:
            c1 = np.ones_like(l1)
        else:
            c1 = beta * np.exp(param * l1 - a_u)
        return 1.0 - c1, c1
    delta = param
    m = beta * l1 + (1.0 - beta) * l0
    c1 = beta * (1.0 + delta * (l1 - m))
    c0 = (1.0 - beta) * (1.0 + delta * (l0 - m))
    return c0, c1


def integrand_gradient_coeffs(spec: PathSpec, log_proposal, log_target, beta: float,
                              integrand=None):
    """Coefficients (d0, d1) with grad of the integrand = d0*grad L0 + d1*grad L1."""
    beta = _check_beta(beta)
    l0 = np.asarray(log_proposal, dtype=float)
    l1 = np.asarray(log_target, dtype=float)
    branch, param = spec.branch()
    if branch == "geometric":
        shape = np.broadcast(l0, l1).shape
        return np.full(shape, -1.0), np.full(shape, 1.0)
    if branch == "perturbed":
        f = l1 - l0
        scale = 1.0 + (1.0 - 2.0 * beta) * f * param
        return -scale, scale
    alpha = param
    if integrand is None:
        integrand = blend_integrand(spec, l0, l1, beta)
    a_u = _holder_log_alpha_u(alpha, l0, l1, beta)
    c0, c1 = log_density_gradient_coeffs(spec, l0, l1, beta)
    e1 = np.exp(alpha * l1 - a_u)
    e0 = np.exp(alpha * l0 - a_u)
    d1 = e1 - alpha * integrand * c1
    d0 = -e0 - alpha * integrand * c0
    return d0, d1
