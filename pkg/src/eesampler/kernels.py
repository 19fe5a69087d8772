"""Single-step transition kernels.

Provides the random-walk Metropolis base kernel, the two adaptive kernels
(equi-energy exchange and importance resampling) that read a hotter
chain's reservoir, their limiting kernels driven by exact tempered
samplers, the lower bound on the local-move probability theta implied by
the geometric-drift transfer argument, and explicit row-stochastic
matrices for every kernel kind on finite state spaces.

Conventions shared by all mixture kernels:

* branch selection consumes exactly one uniform variate before any
  sub-step, so traces line up across kernel kinds under a shared seed
  schedule;
* an empty reservoir sends the step down the local branch
  unconditionally (the zero empirical measure admits no resampling);
* acceptance ratios are formed in log domain from energy differences,
  never from normalized densities.

On finite targets the "random walk Metropolis" base kernel is a single
row draw from a caller-supplied stochastic matrix with the right
tempered stationary law; ``metropolis_matrix`` builds such a matrix from
a symmetric proposal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .targets import (
    MissingExactSamplerError,
    importance_coefficient,
    importance_log_weight,
    importance_log_weights_many,
    tempered_log_density,
)

STOCHASTIC_ATOL = 1e-12

LOCAL, EXCHANGE, RESAMPLE = "local", "exchange", "resample"


class KappaTooLargeError(ValueError):
    """kappa at or beyond 1/t_l - 1/t_{l-1}: the theta bound is undefined."""


@dataclass(slots=True)
class StepOutcome:
    """Result of one kernel step, with diagnostics for rate reporting."""

    next: object
    branch: str
    accepted: bool
    log_accept_ratio: float | None


@dataclass(frozen=True)
class KernelConfig:
    """Per-level kernel parameters.

    ``proposal_covariance`` drives the Gaussian random-walk proposal on
    continuous targets; ``base_matrix`` replaces it on finite targets.
    ``theta`` is the probability of the local branch in mixture kernels
    (it may be 0 for limiting kernels, giving pure refresh; the adaptive
    ladder requires theta > 0 and enforces that at ladder level).
    ``ir_proposal_covariance`` optionally gives the inner kernel of the
    importance-resampling move its own proposal; by default that kernel
    is the same random walk.
    """

    theta: float = 1.0
    proposal_covariance: np.ndarray | None = None
    base_matrix: np.ndarray | None = None
    ir_proposal_covariance: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.proposal_covariance is not None:
            cov = np.array(self.proposal_covariance, dtype=float)
            object.__setattr__(self, "proposal_covariance", cov)
            _cholesky_or_raise(cov, "proposal covariance")
        if self.ir_proposal_covariance is not None:
            cov = np.array(self.ir_proposal_covariance, dtype=float)
            object.__setattr__(self, "ir_proposal_covariance", cov)
            _cholesky_or_raise(cov, "resampling-move proposal covariance")
        if self.base_matrix is not None:
            base = np.array(self.base_matrix, dtype=float)
            object.__setattr__(self, "base_matrix", base)
            _check_stochastic(base)

    @cached_property
    def _proposal_chol(self) -> np.ndarray:
        if self.proposal_covariance is None:
            raise ValueError("no proposal covariance configured for a continuous target")
        return np.linalg.cholesky(self.proposal_covariance)

    @cached_property
    def _ir_chol(self) -> np.ndarray:
        if self.ir_proposal_covariance is None:
            return self._proposal_chol
        return np.linalg.cholesky(self.ir_proposal_covariance)

    @cached_property
    def _base_cum(self) -> np.ndarray:
        if self.base_matrix is None:
            raise ValueError("no base matrix configured for a finite target")
        return np.cumsum(self.base_matrix, axis=1)


def _cholesky_or_raise(cov: np.ndarray, what: str) -> np.ndarray:
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"{what} must be square, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-12, rtol=0.0):
        raise ValueError(f"{what} must be symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise ValueError(f"{what} must be positive definite") from None


def _check_stochastic(matrix: np.ndarray) -> None:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"matrix must be square, got shape {matrix.shape}")
    if np.any(matrix < -STOCHASTIC_ATOL):
        raise ValueError("matrix has negative entries")
    dev = np.abs(matrix.sum(axis=1) - 1.0).max()
    if dev > STOCHASTIC_ATOL:
        raise ValueError(f"matrix rows must sum to 1 (max deviation {dev:.3e})")


def _draw_row(cum_row: np.ndarray, rng) -> int:
    k = int(np.searchsorted(cum_row, rng.random() * cum_row[-1], side="right"))
    return min(k, len(cum_row) - 1)


def rwm_step(target, ladder, level, x, config: KernelConfig, rng) -> StepOutcome:
    """One local step at ``level``.

    Continuous targets: propose y = x + z with z ~ N(0, proposal
    covariance) and accept with probability min(1, exp(log pi(y) - log
    pi(x))).  Finite targets: one row draw from the configured base
    matrix (assumed stationary for the tempered law at this level).
    """
    if target.kind == "finite":
        y = _draw_row(config._base_cum[int(x)], rng)
        return StepOutcome(y, LOCAL, True, None)
    x = np.asarray(x, dtype=float)
    chol = config._proposal_chol
    if chol.shape[0] != x.shape[0]:
        raise ValueError(
            f"proposal dimension {chol.shape[0]} does not match state dimension {x.shape[0]}"
        )
    return _metropolis_move(target, ladder, level, x, chol, rng)


def _metropolis_move(target, ladder, level, x, chol, rng) -> StepOutcome:
    y = x + chol @ rng.standard_normal(len(x))
    lar = tempered_log_density(target, ladder, level, y) - tempered_log_density(
        target, ladder, level, x
    )
    if math.log(rng.random()) < lar:
        return StepOutcome(y, LOCAL, True, lar)
    return StepOutcome(x, LOCAL, False, lar)


def ee_adaptive_step(target, ladder, level, x, reservoir, config: KernelConfig, rng) -> StepOutcome:
    """Equi-energy adaptive step at ``level`` against the level-(l-1) reservoir.

    With probability theta takes the local branch; otherwise proposes a
    uniform draw from the reservoir and accepts with probability
    min(1, r(y)/r(x)), r being the importance function between the two
    adjacent tempered laws.
    """
    u = rng.random()
    if u < config.theta or reservoir.count == 0:
        return rwm_step(target, ladder, level, x, config, rng)
    y = reservoir.sample_uniform(rng)
    lar = importance_log_weight(target, ladder, level, y) - importance_log_weight(
        target, ladder, level, x
    )
    if math.log(rng.random()) < lar:
        return StepOutcome(y, EXCHANGE, True, lar)
    return StepOutcome(x, EXCHANGE, False, lar)


def ir_adaptive_step(target, ladder, level, x, reservoir, config: KernelConfig, rng) -> StepOutcome:
    """Importance-resampling adaptive step at ``level``.

    With probability theta takes the local branch; otherwise resamples a
    reservoir state with weights proportional to the importance function
    r and advances it by one step of the local kernel (which may reject
    and hold at the resampled point).
    """
    u = rng.random()
    if u < config.theta or reservoir.count == 0:
        return rwm_step(target, ladder, level, x, config, rng)
    y = reservoir.sample_weighted(
        lambda xs: importance_log_weights_many(target, ladder, level, xs), rng
    )
    if target.kind == "finite":
        z = _draw_row(config._base_cum[int(y)], rng)
        return StepOutcome(z, RESAMPLE, True, None)
    inner = _metropolis_move(target, ladder, level, np.asarray(y, dtype=float), config._ir_chol, rng)
    return StepOutcome(inner.next, RESAMPLE, inner.accepted, inner.log_accept_ratio)


def limit_ee_step(target, ladder, level, x, config: KernelConfig, rng) -> StepOutcome:
    """Limiting equi-energy kernel: independence MH proposing from the
    exact level-(l-1) tempered law instead of the reservoir."""
    u = rng.random()
    if u < config.theta:
        return rwm_step(target, ladder, level, x, config, rng)
    if not target.has_exact_sampler:
        raise MissingExactSamplerError("limit EE kernel needs an exact tempered sampler")
    y = target.sample_tempered(ladder.temperature(level - 1), rng)
    lar = importance_log_weight(target, ladder, level, y) - importance_log_weight(
        target, ladder, level, x
    )
    if math.log(rng.random()) < lar:
        return StepOutcome(y, EXCHANGE, True, lar)
    return StepOutcome(x, EXCHANGE, False, lar)


def limit_ir_step(target, ladder, level, x, config: KernelConfig, rng) -> StepOutcome:
    """Limiting importance-resampling kernel: mixture of the local kernel
    with an exact refresh from the level-l tempered law."""
    u = rng.random()
    if u < config.theta:
        return rwm_step(target, ladder, level, x, config, rng)
    if not target.has_exact_sampler:
        raise MissingExactSamplerError("limit IR kernel needs an exact tempered sampler")
    y = target.sample_tempered(ladder.temperature(level), rng)
    return StepOutcome(y, RESAMPLE, True, None)


def theta_lower_bound(lambda_l: float, kappa: float, t_l: float, t_prev: float) -> float:
    """Lower bound on theta_l from the drift-transfer condition.

    For drift rate lambda_l of the local kernel and drift exponent kappa
    (with 0 < kappa < 1/t_l - 1/t_prev), the mixture keeps a geometric
    drift only if theta_l exceeds

        1 / (1 + (1 - lambda_l) * (kappa^{-1} (1/t_l - 1/t_prev) - 1)).

    The bound is sufficient, not necessary; callers should treat a
    violation as a warning.
    """
    if not 0.0 < lambda_l < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lambda_l}")
    if not t_prev > t_l > 0.0:
        raise ValueError(f"need t_prev > t_l > 0, got t_prev={t_prev}, t_l={t_l}")
    delta = 1.0 / t_l - 1.0 / t_prev
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if kappa >= delta:
        raise KappaTooLargeError(
            f"kappa={kappa} must be below 1/t_l - 1/t_prev = {delta}; the bound is undefined"
        )
    return 1.0 / (1.0 + (1.0 - lambda_l) * (delta / kappa - 1.0))


# --- explicit matrices on finite state spaces -------------------------------


def acceptance_matrix(log_r: np.ndarray) -> np.ndarray:
    """A[x, y] = min(1, r(y)/r(x)) from per-state log importance weights."""
    log_r = np.asarray(log_r, dtype=float)
    return np.exp(np.minimum(0.0, log_r[None, :] - log_r[:, None]))


def ee_limit_matrix(base: np.ndarray, proposal: np.ndarray, log_r: np.ndarray, theta: float) -> np.ndarray:
    """theta * base + (1 - theta) * R with R the exchange move proposing
    from ``proposal`` (a probability vector) and accepting by min(1, r(y)/r(x))."""
    base = np.asarray(base, dtype=float)
    _check_stochastic(base)
    accept = acceptance_matrix(log_r)
    r_kernel = accept * np.asarray(proposal, dtype=float)[None, :]
    r_kernel[np.diag_indices_from(r_kernel)] += 1.0 - r_kernel.sum(axis=1)
    return theta * base + (1.0 - theta) * r_kernel


def ir_limit_matrix(base: np.ndarray, refresh: np.ndarray, theta: float) -> np.ndarray:
    """theta * base + (1 - theta) * (every row = ``refresh``)."""
    base = np.asarray(base, dtype=float)
    _check_stochastic(base)
    refresh = np.asarray(refresh, dtype=float)
    return theta * base + (1.0 - theta) * np.tile(refresh, (base.shape[0], 1))


def ir_frozen_matrix(base: np.ndarray, mu: np.ndarray, log_r: np.ndarray, theta: float) -> np.ndarray:
    """Frozen importance-resampling kernel: resample from ``mu`` with
    weights exp(log_r), then one base-matrix step."""
    base = np.asarray(base, dtype=float)
    _check_stochastic(base)
    lw = np.asarray(log_r, dtype=float)
    q = np.asarray(mu, dtype=float) * np.exp(lw - lw.max())
    total = q.sum()
    if total <= 0.0:
        raise ValueError("frozen measure puts no mass anywhere")
    row = (q / total) @ base
    return theta * base + (1.0 - theta) * np.tile(row, (base.shape[0], 1))


def finite_kernel_matrix(kind, target, ladder, level, base_matrix, theta, mu=None) -> np.ndarray:
    """Explicit one-step matrix of the requested kernel kind at ``level``.

    ``base_matrix`` must be row-stochastic with the level's tempered law
    as stationary distribution (caller-supplied).  ``mu`` is the frozen
    empirical measure (a probability vector) for the frozen kinds.
    """
    if target.kind != "finite":
        raise ValueError("explicit kernel matrices exist only for finite targets")
    base = np.asarray(base_matrix, dtype=float)
    _check_stochastic(base)
    if kind == "base":
        return base.copy()
    log_r = -importance_coefficient(ladder, level) * target.energies
    if kind == "ee_limit":
        proposal = target.tempered_probabilities(ladder.temperature(level - 1))
        return ee_limit_matrix(base, proposal, log_r, theta)
    if kind == "ir_limit":
        refresh = target.tempered_probabilities(ladder.temperature(level))
        return ir_limit_matrix(base, refresh, theta)
    if kind in ("ee_frozen", "ir_frozen"):
        if mu is None:
            raise ValueError(f"kind {kind!r} needs the frozen empirical measure mu")
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (target.state_count,) or np.any(mu < 0):
            raise ValueError("mu must be a nonnegative vector over the state space")
        if kind == "ee_frozen":
            return ee_limit_matrix(base, mu / mu.sum(), log_r, theta)
        return ir_frozen_matrix(base, mu, log_r, theta)
    raise ValueError(f"unknown kernel kind {kind!r}")


def metropolis_matrix(proposal_matrix: np.ndarray, log_weights: np.ndarray) -> np.ndarray:
    """Metropolis matrix for a finite target from a symmetric proposal.

    ``log_weights`` are unnormalized log probabilities of the target law;
    the result is reversible with respect to it.
    """
    q = np.asarray(proposal_matrix, dtype=float)
    _check_stochastic(q)
    if not np.allclose(q, q.T, atol=1e-12, rtol=0.0):
        raise ValueError("proposal matrix must be symmetric")
    accept = acceptance_matrix(np.asarray(log_weights, dtype=float))
    p = q * accept
    np.fill_diagonal(p, 0.0)
    p[np.diag_indices_from(p)] = 1.0 - p.sum(axis=1)
    return p


def neighbor_proposal(state_count: int, move_prob: float = 1.0) -> np.ndarray:
    """Symmetric nearest-neighbor proposal on {0..S-1}.

    Proposes x-1 and x+1 each with probability move_prob/2; the leftover
    mass (including blocked moves at the ends) stays put.  Small
    ``move_prob`` gives a deliberately slow-mixing chain.
    """
    if not 0.0 < move_prob <= 1.0:
        raise ValueError("move_prob must lie in (0, 1]")
    q = np.zeros((state_count, state_count))
    half = move_prob / 2.0
    for i in range(state_count):
        if i > 0:
            q[i, i - 1] = half
        if i < state_count - 1:
            q[i, i + 1] = half
        q[i, i] = 1.0 - q[i].sum()
    return q
