"""Channel estimators: genie/sample-covariance LMMSE, GMM mixture, and OMP."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .channel_model import complex_normal, unvec, vec
from .errors import ConfigError, NumericError
from .gmm_core import (GmmModel, ObservationGmm, Responsibilities,
                       _normalized_probs, observation_model)
from .pilot_design import PilotMatrix

ESTIMATOR_GMM = "gmm"
ESTIMATOR_GENIE_LMMSE = "glmmse"
ESTIMATOR_SAMPLE_LMMSE = "slmmse"
ESTIMATOR_OMP = "omp"

_INNOVATION_LOADING = 1e-12


@dataclass(frozen=True)
class Observation:
    """One received pilot block in vectorized form."""

    y: np.ndarray
    pilot: PilotMatrix
    sigma2: float
    n_rx: int = 1

    def __post_init__(self):
        y = np.asarray(self.y, dtype=complex).reshape(-1)
        object.__setattr__(self, "y", y)
        if len(y) != self.pilot.n_p * self.n_rx:
            raise ConfigError("observation length must be n_p * N_rx")
        if self.sigma2 < 0:
            raise ConfigError("sigma2 must be nonnegative")

    @property
    def n_tx(self) -> int:
        return self.pilot.n_tx


@dataclass(frozen=True)
class Estimate:
    """Estimated channel vector with the producing estimator's tag."""

    h_hat: np.ndarray
    estimator_id: str

    def __post_init__(self):
        h = np.asarray(self.h_hat, dtype=complex).reshape(-1)
        if not np.all(np.isfinite(h.view(float))):
            raise NumericError("estimate has non-finite entries")
        object.__setattr__(self, "h_hat", h)


def sensing_matrix(pilot: PilotMatrix, n_rx: int) -> np.ndarray:
    """A = P (x) I_{N_rx}, mapping vec(H) to noiseless observations."""
    return np.kron(pilot.matrix, np.eye(n_rx))


def simulate_observation(h: np.ndarray, pilot: PilotMatrix, sigma2: float,
                         rng: np.random.Generator) -> Observation:
    """Pass one channel through the pilot block: Y = H P^T + N, vectorized."""
    h = np.asarray(h, dtype=complex).reshape(-1)
    if len(h) % pilot.n_tx != 0:
        raise ConfigError("channel length must be a multiple of N_tx")
    n_rx = len(h) // pilot.n_tx
    H = unvec(h, pilot.n_tx, n_rx)
    Y = H @ pilot.matrix.T
    if sigma2 > 0:
        Y = Y + np.sqrt(sigma2) * complex_normal(rng, Y.shape)
    return Observation(vec(Y), pilot, sigma2, n_rx)


def lmmse_filter(cov: np.ndarray, A: np.ndarray, sigma2: float) -> np.ndarray:
    """W = C A^H (A C A^H + sigma2 I)^{-1} via Hermitian factorization."""
    cov = 0.5 * (cov + cov.conj().T)
    M = A.shape[0]
    innovation = A @ cov @ A.conj().T + sigma2 * np.eye(M)
    innovation = 0.5 * (innovation + innovation.conj().T)
    load = _INNOVATION_LOADING * np.trace(innovation).real / M
    try:
        factor = cho_factor(innovation + load * np.eye(M), lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"innovation matrix is singular: {exc}") from exc
    return cho_solve(factor, A @ cov).conj().T


def _lmmse_estimate(obs: Observation, cov: np.ndarray, tag: str) -> Estimate:
    cov = np.asarray(cov, dtype=complex)
    N = obs.n_tx * obs.n_rx
    if cov.shape != (N, N):
        raise ConfigError("covariance dimension does not match the channel")
    W = lmmse_filter(cov, sensing_matrix(obs.pilot, obs.n_rx), obs.sigma2)
    return Estimate(W @ obs.y, tag)


def genie_lmmse(obs: Observation, scenario_cov: np.ndarray) -> Estimate:
    """LMMSE with the true scenario covariance (utopian baseline)."""
    return _lmmse_estimate(obs, scenario_cov, ESTIMATOR_GENIE_LMMSE)


def sample_cov_lmmse(obs: Observation, sample_cov: np.ndarray) -> Estimate:
    """LMMSE with a global sample covariance from the training set."""
    return _lmmse_estimate(obs, sample_cov, ESTIMATOR_SAMPLE_LMMSE)


def sample_covariance(dataset) -> np.ndarray:
    """(1/L) sum of h h^H over the dataset."""
    X = np.asarray(getattr(dataset, "samples", dataset), dtype=complex)
    S = X.T @ X.conj() / len(X)
    return 0.5 * (S + S.conj().T)


def batch_gmm_estimate(obs_model: ObservationGmm, Y: np.ndarray,
                       probs: Optional[np.ndarray] = None
                       ) -> Tuple[np.ndarray, np.ndarray]:
    """Mixture estimates for a batch of observations.

    Returns (H_hat, probs) with H_hat of shape (B, N) and responsibilities
    of shape (B, K); the responsibilities are reused for feedback. Passing
    precomputed responsibilities skips the density evaluation.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=complex))
    if probs is None:
        probs = _normalized_probs(obs_model.log_responsibilities(Y))
    W = obs_model.filters()
    H_hat = np.zeros((Y.shape[0], W.shape[1]), dtype=complex)
    for k in range(obs_model.K):
        H_hat += probs[:, k, None] * (Y @ W[k].T)
    return H_hat, probs


def gmm_estimate(obs: Observation, model: GmmModel,
                 obs_model: Optional[ObservationGmm] = None
                 ) -> Tuple[Estimate, Responsibilities]:
    """Responsibility-weighted sum of per-component LMMSE estimates."""
    if obs_model is None:
        obs_model = observation_model(model, obs.pilot, obs.sigma2)
    H_hat, probs = batch_gmm_estimate(obs_model, obs.y[None, :])
    return Estimate(H_hat[0], ESTIMATOR_GMM), Responsibilities(probs[0])


# ---------------------------------------------------------------------------
# OMP over a Kronecker steering dictionary
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DictionaryConfig:
    """Oversampled steering-grid dictionary and OMP stopping rule."""

    oversampling: int = 2
    sparsity_mode: str = "fixed"
    sparsity: Optional[int] = None

    def __post_init__(self):
        if self.oversampling < 1:
            raise ConfigError("oversampling must be >= 1")
        if self.sparsity_mode not in ("fixed", "genie"):
            raise ConfigError("sparsity_mode must be 'fixed' or 'genie'")
        if self.sparsity is not None and self.sparsity < 1:
            raise ConfigError("sparsity must be >= 1")


def steering_dictionary(n_antennas: int, oversampling: int = 2) -> np.ndarray:
    """Unit-norm steering atoms on a uniform grid in the sin domain."""
    if n_antennas == 1:
        return np.ones((1, 1), dtype=complex)
    Q = oversampling * n_antennas
    sines = -1.0 + 2.0 * np.arange(Q) / Q
    m = np.arange(n_antennas)
    return np.exp(1j * np.pi * np.outer(m, sines)) / np.sqrt(n_antennas)


def kron_dictionary(n_tx: int, n_rx: int, oversampling: int = 2) -> np.ndarray:
    """Atoms a_tx (x) a_rx, matching the vectorization vec(H)."""
    return np.kron(steering_dictionary(n_tx, oversampling),
                   steering_dictionary(n_rx, oversampling))


def omp_path(A_sens: np.ndarray, y: np.ndarray, s_max: int):
    """Greedy support growth with per-iteration least-squares refits.

    Returns (support, coefficient list, residual norms); entry i of each
    list corresponds to a support of size i+1.
    """
    col_norms = np.linalg.norm(A_sens, axis=0)
    peak = float(col_norms.max())
    if peak == 0.0:
        raise NumericError("sensing matrix is identically zero")
    # atoms the pilot cannot see only amplify noise through 1/norm scores
    visible = col_norms > 1e-12 * peak
    safe_norms = np.where(visible, col_norms, 1.0)
    residual = y.copy()
    support = []
    coeffs = []
    res_norms = []
    for _ in range(min(s_max, int(visible.sum()))):
        scores = np.abs(A_sens.conj().T @ residual) / safe_norms
        scores[~visible] = -1.0
        scores[support] = -1.0
        support.append(int(np.argmax(scores)))
        sub = A_sens[:, support]
        x, *_ = np.linalg.lstsq(sub, y, rcond=None)
        residual = y - sub @ x
        coeffs.append(x)
        res_norms.append(float(np.linalg.norm(residual)))
    return support, coeffs, res_norms


def omp_estimate(obs: Observation, config: DictionaryConfig = DictionaryConfig(),
                 true_h: Optional[np.ndarray] = None) -> Estimate:
    """Sparse estimate over the Kronecker steering dictionary.

    Fixed mode stops at s atoms (default n_p); genie mode scans all support
    sizes up to n_p*N_rx and keeps the one closest to the known channel, an
    oracle-flavored baseline.
    """
    D = kron_dictionary(obs.n_tx, obs.n_rx, config.oversampling)
    A_sens = sensing_matrix(obs.pilot, obs.n_rx) @ D
    if config.sparsity_mode == "genie":
        if true_h is None:
            raise ConfigError("genie sparsity needs the true channel")
        s_max = obs.pilot.n_p * obs.n_rx
        support, coeffs, _ = omp_path(A_sens, obs.y, s_max)
        best = None
        for i, x in enumerate(coeffs):
            h_i = D[:, support[:i + 1]] @ x
            err = np.linalg.norm(h_i - true_h)
            if best is None or err < best[0]:
                best = (err, h_i)
        return Estimate(best[1], ESTIMATOR_OMP)
    s = config.sparsity if config.sparsity is not None else obs.pilot.n_p
    s = min(s, A_sens.shape[1])
    support, coeffs, _ = omp_path(A_sens, obs.y, s)
    return Estimate(D[:, support] @ coeffs[-1], ESTIMATOR_OMP)
