"""Zero-mean complex Gaussian mixture models over channel vectors.

Covers EM fitting (means pinned to zero), Kronecker-factored fitting for
MIMO via separate transmit/receive side mixtures, responsibilities in the
channel and observation domains, MAP feedback selection, and a compact
binary model format so a fitted model can be shared once and reused.
"""

from __future__ import annotations

import hashlib
import struct
import threading
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import BinaryIO, Optional, Union

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import ConfigError, FormatError, NumericError, UnsupportedModelError

MODEL_MAGIC = b"FDDGMM01"
MODEL_VERSION = 1
_FLAG_FACTORED = 0x1

_LOG_PI = np.log(np.pi)
_EMPTY_MASS = 1e-12


# ---------------------------------------------------------------------------
# configuration and result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitConfig:
    """EM hyperparameters.

    ``reg_epsilon`` is the relative diagonal loading floor applied to every
    M-step covariance; narrow angular clusters make the true covariances
    nearly singular, and the floor keeps the mixture from overfitting spiky
    components. It is escalated per covariance when a verification Cholesky
    fails (rank-deficient moments), never lowered.
    """

    max_iters: int = 100
    rel_ll_tol: float = 1e-5
    reg_epsilon: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.rel_ll_tol <= 0 or self.reg_epsilon <= 0:
            raise ConfigError("tolerances must be positive")


@dataclass(frozen=True)
class Responsibilities:
    """Posterior component probabilities for one vector."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
            raise ConfigError("responsibilities must be a probability vector")


@dataclass(frozen=True)
class FeedbackIndex:
    """Selected component index and the bit width needed to encode it."""

    k_star: int
    bit_width: int

    def __post_init__(self):
        if not 0 <= self.k_star < 2 ** self.bit_width and self.bit_width > 0:
            raise ConfigError("k_star does not fit in bit_width bits")


@dataclass(eq=False)
class GmmModel:
    """Zero-mean complex GMM, optionally with Kronecker-factored covariances.

    ``covariances`` always holds the expanded K full matrices. For a
    factored model the transmit/receive side factors are kept alongside;
    expanded component k = i*K_rx + j has covariance tx_i (x) rx_j.
    """

    weights: np.ndarray
    covariances: np.ndarray
    n_tx: int
    n_rx: int
    tx_weights: Optional[np.ndarray] = None
    tx_covariances: Optional[np.ndarray] = None
    rx_weights: Optional[np.ndarray] = None
    rx_covariances: Optional[np.ndarray] = None
    ll_history: list = field(default_factory=list, repr=False)
    obs_cache_size: int = 0
    _obs_cache: OrderedDict = field(default_factory=OrderedDict, repr=False)
    _obs_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _eig_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.covariances = np.asarray(self.covariances, dtype=complex)
        if self.covariances.ndim != 3 or len(self.weights) != len(self.covariances):
            raise ConfigError("need one covariance per weight")
        if self.covariances.shape[1] != self.n_tx * self.n_rx:
            raise ConfigError("covariance dimension does not match n_tx*n_rx")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ConfigError("weights must sum to 1")

    @property
    def K(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.covariances.shape[-1]

    @property
    def bit_width(self) -> int:
        return (self.K - 1).bit_length()

    @property
    def is_factored(self) -> bool:
        return self.tx_covariances is not None

    @property
    def K_rx(self) -> int:
        return 1 if not self.is_factored else len(self.rx_weights)

    def tx_component(self, k: int) -> np.ndarray:
        """Transmit-side covariance factor of expanded component k."""
        if self.is_factored:
            return self.tx_covariances[k // self.K_rx]
        if self.n_rx == 1:
            return self.covariances[k]
        raise UnsupportedModelError(
            "full-covariance MIMO model has no transmit-side factor")

    def tx_eigh(self, k: int):
        """Eigendecomposition of the tx factor, eigenvalues descending."""
        idx = k // self.K_rx if self.is_factored else k
        hit = self._eig_cache.get(idx)
        if hit is None:
            evals, evecs = np.linalg.eigh(self.tx_component(k))
            hit = (evals[::-1].copy(), evecs[:, ::-1].copy())
            self._eig_cache[idx] = hit
        return hit


# ---------------------------------------------------------------------------
# density plumbing
# ---------------------------------------------------------------------------

def _chol_bundle(covs: np.ndarray):
    """Cholesky factors and log-determinants for a (K, N, N) stack."""
    try:
        chol = np.linalg.cholesky(covs)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"covariance not positive definite: {exc}") from exc
    logdet = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2).real), axis=1)
    return chol, logdet


def _log_density(chol: np.ndarray, logdet: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Complex Gaussian log-densities, shape (B, K) for X of shape (B, N)."""
    B, N = X.shape
    K = len(chol)
    quad = np.empty((B, K))
    rhs = X.T
    for k in range(K):
        z = solve_triangular(chol[k], rhs, lower=True, check_finite=False)
        quad[:, k] = np.sum(z.real ** 2 + z.imag ** 2, axis=0)
    return -(N * _LOG_PI + logdet[None, :] + quad)


def _log_responsibilities(log_weights, chol, logdet, X):
    joint = _log_density(chol, logdet, X) + log_weights[None, :]
    norm = logsumexp(joint, axis=1, keepdims=True)
    if not np.all(np.isfinite(norm)):
        raise NumericError("all component densities vanished")
    return joint - norm, norm[:, 0]


def _normalized_probs(log_resp: np.ndarray) -> np.ndarray:
    p = np.exp(log_resp)
    return p / p.sum(axis=-1, keepdims=True)


def _log_weights(weights: np.ndarray) -> np.ndarray:
    """log pi_k with -inf (not a warning) for components of zero mass."""
    with np.errstate(divide="ignore"):
        return np.log(weights)


# ---------------------------------------------------------------------------
# EM fitting
# ---------------------------------------------------------------------------

def _as_samples(dataset, n_tx=None, n_rx=None):
    samples = getattr(dataset, "samples", dataset)
    X = np.ascontiguousarray(np.asarray(samples, dtype=complex))
    if X.ndim != 2:
        raise ConfigError("expected a 2-D array of channel vectors")
    if n_tx is None:
        n_tx = getattr(dataset, "n_tx", X.shape[1])
    if n_rx is None:
        n_rx = getattr(dataset, "n_rx", 1)
    if n_tx * n_rx != X.shape[1]:
        raise ConfigError("sample dimension does not match n_tx*n_rx")
    return X, int(n_tx), int(n_rx)


_MAX_LOADING = 1e-2


def _loaded(moment: np.ndarray, reg: float) -> np.ndarray:
    """Hermitize and apply the smallest workable relative diagonal loading.

    Starts at ``reg`` and escalates 100x per matrix until a verification
    Cholesky succeeds, so rank-deficient moments (e.g. a re-seeded rank-one
    component) become factorizable while healthy ones are left essentially
    untouched.
    """
    single = moment.ndim == 2
    M = moment[None] if single else moment
    N = M.shape[-1]
    eye = np.eye(N)
    out = np.empty(M.shape, dtype=complex)
    for k in range(M.shape[0]):
        C = 0.5 * (M[k] + M[k].conj().T)
        scale = max(np.trace(C).real / N, np.finfo(float).tiny)
        eps = reg
        while True:
            cand = C + (eps * scale) * eye
            try:
                np.linalg.cholesky(cand)
                break
            except np.linalg.LinAlgError:
                if eps >= _MAX_LOADING:
                    raise NumericError(
                        "covariance moment is not positive definite even "
                        f"with relative loading {eps:.0e}")
                eps = min(max(eps * 100.0, 1e-14), _MAX_LOADING)
        out[k] = cand
    return out[0] if single else out


def _weighted_moments(X: np.ndarray, resp: np.ndarray, mass: np.ndarray) -> np.ndarray:
    """Per-component second moments Sum_l r_lk h_l h_l^H / mass_k."""
    K = resp.shape[1]
    N = X.shape[1]
    out = np.empty((K, N, N), dtype=complex)
    Xc = X.conj()
    for k in range(K):
        out[k] = (X * resp[:, k, None]).T @ Xc / mass[k]
    return out


def _init_covariances(X: np.ndarray, K: int, rng, reg: float) -> np.ndarray:
    """Balanced random partition; each group's second moment seeds a component."""
    order = rng.permutation(len(X))
    covs = np.empty((K, X.shape[1], X.shape[1]), dtype=complex)
    for k, idx in enumerate(np.array_split(order, K)):
        G = X[idx]
        covs[k] = G.T @ G.conj() / len(G)
    return _loaded(covs, reg)


def _reseed_component(rng, X: np.ndarray, reg: float) -> np.ndarray:
    """Replacement covariance for a component that lost all its mass."""
    h = X[rng.integers(len(X))]
    return _loaded(np.outer(h, h.conj()), reg)


def fit_em(dataset, K: int, config: FitConfig = FitConfig(), *,
           n_tx=None, n_rx=None) -> GmmModel:
    """Fit a K-component zero-mean complex GMM by EM.

    Means are held at zero; M-step covariances receive the minimal diagonal
    loading needed to stay factorizable (see :class:`FitConfig`). Components
    whose responsibility mass collapses are re-seeded from a random sample's
    outer product. Iterates are accepted only while the objective improves
    (reseed recoveries exempt), so ``ll_history`` is non-decreasing outside
    reseeds and its last entry is the returned model's own log-likelihood.
    """
    X, n_tx, n_rx = _as_samples(dataset, n_tx, n_rx)
    L = len(X)
    if K < 1:
        raise ConfigError("K must be >= 1")
    if L < K:
        raise ConfigError(f"need at least K={K} samples, got {L}")

    rng = np.random.default_rng(config.seed)
    covs = _init_covariances(X, K, rng, config.reg_epsilon)
    weights = np.full(K, 1.0 / K)

    # the returned model is the last *accepted* iterate, so its quality is
    # exactly the final entry of ll_history; guard_off skips the acceptance
    # test right after init and after reseeds, where a drop is expected
    ll_history = []
    accepted = (covs, weights)
    prev_ll = None
    guard_off = True
    for _ in range(config.max_iters):
        chol, logdet = _chol_bundle(covs)
        log_resp, log_norm = _log_responsibilities(np.log(weights), chol, logdet, X)
        ll = float(np.mean(log_norm))
        if not guard_off and ll - prev_ll < config.rel_ll_tol * abs(prev_ll):
            # converged, or entered the noise floor of near-singular
            # components; keep the step only if it did not decrease
            if ll >= prev_ll:
                ll_history.append(ll)
                accepted = (covs, weights)
            break
        ll_history.append(ll)
        accepted = (covs, weights)
        prev_ll = ll

        resp = np.exp(log_resp)
        mass = resp.sum(axis=0)
        empty = mass < _EMPTY_MASS
        guard_off = bool(np.any(empty))
        if guard_off:
            covs = covs.copy()
            for k in np.flatnonzero(empty):
                covs[k] = _reseed_component(rng, X, config.reg_epsilon)
                mass[k] = 1.0
            live = ~empty
            covs[live] = _loaded(
                _weighted_moments(X, resp[:, live], mass[live]), config.reg_epsilon)
            weights = mass / mass.sum()
        else:
            covs = _loaded(_weighted_moments(X, resp, mass), config.reg_epsilon)
            weights = mass / L

    covs, weights = accepted
    model = GmmModel(weights=weights, covariances=covs, n_tx=n_tx, n_rx=n_rx)
    model.ll_history = ll_history
    return model


def _expand_kron(tx_covs: np.ndarray, rx_covs: np.ndarray) -> np.ndarray:
    K_tx, K_rx = len(tx_covs), len(rx_covs)
    N = tx_covs.shape[1] * rx_covs.shape[1]
    out = np.empty((K_tx * K_rx, N, N), dtype=complex)
    for i in range(K_tx):
        for j in range(K_rx):
            out[i * K_rx + j] = np.kron(tx_covs[i], rx_covs[j])
    return out


def fit_kronecker(dataset, K_tx: int, K_rx: int,
                  config: FitConfig = FitConfig(), *,
                  refine_weights: bool = True,
                  n_tx=None, n_rx=None) -> GmmModel:
    """Fit separate tx/rx side GMMs and expand to K_tx*K_rx Kronecker products.

    The tx-side mixture is fitted on the per-sample transmit-view vectors
    (rows of the N_rx x N_tx channel matrix), the rx-side mixture on its
    columns. Each rx factor is rescaled to trace N_rx and the weighted mean
    of the removed scales is pushed into the tx factors. Each side fit
    absorbs the data's per-dimension energy, so the raw products carry it
    twice; dividing by the empirical mean energy per dimension restores the
    correct overall scale (a no-op on unit-energy data). Expanded weights
    start as products of the side weights; one optional pass re-estimates
    them with covariances frozen.
    """
    X, n_tx, n_rx = _as_samples(dataset, n_tx, n_rx)
    # vectors are column-major stackings: entry c*n_rx+r is H[r, c]
    Hs = X.reshape(len(X), n_tx, n_rx)
    tx_data = Hs.transpose(0, 2, 1).reshape(-1, n_tx)
    rx_data = Hs.reshape(-1, n_rx)

    rx_seed = int(np.random.SeedSequence(config.seed).generate_state(2)[1])
    tx_gmm = fit_em(tx_data, K_tx, config)
    rx_gmm = fit_em(rx_data, K_rx, replace(config, seed=rx_seed))

    energy = float(np.mean(np.abs(X) ** 2))
    if not energy > 0:
        raise NumericError("cannot factor a zero-energy dataset")

    # fix the reciprocal-scale ambiguity: trace(rx_j) = n_rx
    rx_covs = rx_gmm.covariances.copy()
    scales = np.trace(rx_covs, axis1=1, axis2=2).real / n_rx
    rx_covs /= scales[:, None, None]
    tx_covs = tx_gmm.covariances * (float(rx_gmm.weights @ scales) / energy)

    weights = np.kron(tx_gmm.weights, rx_gmm.weights)
    weights /= weights.sum()
    covs = _expand_kron(tx_covs, rx_covs)

    if refine_weights and K_tx * K_rx > 1:
        chol, logdet = _chol_bundle(covs)
        log_resp, _ = _log_responsibilities(_log_weights(weights), chol, logdet, X)
        weights = np.exp(log_resp).sum(axis=0) / len(X)
        weights /= weights.sum()

    model = GmmModel(weights=weights, covariances=covs, n_tx=n_tx, n_rx=n_rx,
                     tx_weights=tx_gmm.weights, tx_covariances=tx_covs,
                     rx_weights=rx_gmm.weights, rx_covariances=rx_covs)
    model.ll_history = tx_gmm.ll_history + rx_gmm.ll_history
    return model


# ---------------------------------------------------------------------------
# responsibilities and feedback
# ---------------------------------------------------------------------------

def responsibilities_channel(model: GmmModel, h: np.ndarray) -> Responsibilities:
    """Posterior p(k | h) under the channel-domain mixture."""
    h = np.asarray(h, dtype=complex).reshape(1, -1)
    if h.shape[1] != model.dim:
        raise ConfigError("channel vector dimension mismatch")
    chol, logdet = _chol_bundle(model.covariances)
    log_resp, _ = _log_responsibilities(_log_weights(model.weights), chol, logdet, h)
    return Responsibilities(_normalized_probs(log_resp[0]))


def map_feedback(resp: Responsibilities) -> FeedbackIndex:
    """MAP component index; ties resolve to the lowest index."""
    probs = resp.probs if isinstance(resp, Responsibilities) else np.asarray(resp)
    return FeedbackIndex(int(np.argmax(probs)), (len(probs) - 1).bit_length())


# ---------------------------------------------------------------------------
# observation-domain model
# ---------------------------------------------------------------------------

class ObservationGmm:
    """Mixture induced on y = (P (x) I) h + n, with cached factorizations.

    Component covariances are (P (x) I) C_k (P (x) I)^H + sigma2 I. Cholesky
    factors and log-determinants are computed once; the per-component LMMSE
    filters are materialized lazily on first use.
    """

    def __init__(self, model: GmmModel, pilot_matrix: np.ndarray, sigma2: float):
        P = np.asarray(pilot_matrix, dtype=complex)
        if P.ndim != 2 or P.shape[1] != model.n_tx:
            raise ConfigError("pilot matrix must be n_p x n_tx")
        if sigma2 <= 0:
            raise ConfigError("sigma2 must be positive")
        self.model = model
        self.pilot_matrix = P
        self.sigma2 = float(sigma2)
        self.A = np.kron(P, np.eye(model.n_rx))
        M = self.A.shape[0]
        AC = self.A @ model.covariances  # (K, M, N)
        covs = AC @ self.A.conj().T[None]
        covs = 0.5 * (covs + np.conj(np.swapaxes(covs, 1, 2)))
        covs += self.sigma2 * np.eye(M)
        self.covariances = covs
        self.chol, self.logdet = _chol_bundle(covs)
        self._cross = np.conj(np.swapaxes(AC, 1, 2))  # C_k A^H, (K, N, M)
        self._filters = None
        self._filter_lock = threading.Lock()

    @property
    def K(self) -> int:
        return self.model.K

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def log_responsibilities(self, Y: np.ndarray) -> np.ndarray:
        """Normalized log p(k | y) for a batch Y of shape (B, M)."""
        Y = np.atleast_2d(np.asarray(Y, dtype=complex))
        if Y.shape[1] != self.dim:
            raise ConfigError("observation dimension mismatch")
        log_resp, _ = _log_responsibilities(
            _log_weights(self.model.weights), self.chol, self.logdet, Y)
        return log_resp

    def filters(self) -> np.ndarray:
        """Per-component filters W_k = C_k A^H (A C_k A^H + sigma2 I)^{-1}."""
        if self._filters is None:
            with self._filter_lock:
                if self._filters is None:
                    K, N, M = self._cross.shape
                    W = np.empty((K, N, M), dtype=complex)
                    for k in range(K):
                        z = solve_triangular(self.chol[k], self._cross[k].conj().T,
                                             lower=True, check_finite=False)
                        z = solve_triangular(self.chol[k].conj().T, z,
                                             lower=False, check_finite=False)
                        W[k] = z.conj().T
                    self._filters = W
        return self._filters


def _pilot_cache_key(pilot) -> str:
    key = getattr(pilot, "cache_key", None)
    if key is not None:
        return str(key)
    arr = np.ascontiguousarray(np.asarray(getattr(pilot, "matrix", pilot), dtype=complex))
    return hashlib.sha256(arr.tobytes() + str(arr.shape).encode()).hexdigest()


def observation_model(model: GmmModel, pilot, sigma2: float) -> ObservationGmm:
    """Build (or fetch from the model's keyed LRU cache) the observation GMM."""
    key = (_pilot_cache_key(pilot), float(sigma2))
    with model._obs_lock:
        hit = model._obs_cache.get(key)
        if hit is not None:
            model._obs_cache.move_to_end(key)
            return hit
    P = np.asarray(getattr(pilot, "matrix", pilot), dtype=complex)
    obs = ObservationGmm(model, P, sigma2)
    maxsize = model.obs_cache_size if model.obs_cache_size > 0 else 4 * model.K
    with model._obs_lock:
        model._obs_cache[key] = obs
        while len(model._obs_cache) > maxsize:
            model._obs_cache.popitem(last=False)
    return obs


def responsibilities_observation(obs_model: ObservationGmm, y: np.ndarray) -> Responsibilities:
    """Posterior p(k | y) under the observation-domain mixture."""
    log_resp = obs_model.log_responsibilities(np.asarray(y).reshape(1, -1))
    return Responsibilities(_normalized_probs(log_resp[0]))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _write_array(sink: BinaryIO, arr: np.ndarray):
    if np.iscomplexobj(arr):
        sink.write(np.ascontiguousarray(arr).astype("<c16").tobytes())
    else:
        sink.write(np.ascontiguousarray(arr).astype("<f8").tobytes())


def _read_exact(source: BinaryIO, n: int) -> bytes:
    buf = source.read(n)
    if len(buf) != n:
        raise FormatError("model file truncated")
    return buf


def save_model(model: GmmModel, sink: Union[str, BinaryIO]):
    """Serialize a model; factored models keep their side factors."""
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        with open(sink, "wb") as fh:
            save_model(model, fh)
        return
    flags = _FLAG_FACTORED if model.is_factored else 0
    sink.write(MODEL_MAGIC)
    sink.write(struct.pack("<II", MODEL_VERSION, flags))
    if model.is_factored:
        sink.write(struct.pack("<IIII", len(model.tx_weights), model.n_tx,
                               len(model.rx_weights), model.n_rx))
        _write_array(sink, model.weights)
        _write_array(sink, model.tx_weights)
        _write_array(sink, model.tx_covariances)
        _write_array(sink, model.rx_weights)
        _write_array(sink, model.rx_covariances)
    else:
        sink.write(struct.pack("<III", model.K, model.n_tx, model.n_rx))
        _write_array(sink, model.weights)
        _write_array(sink, model.covariances)


def load_model(source: Union[str, BinaryIO]) -> GmmModel:
    """Read a model written by save_model; round trip is bit-exact."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            return load_model(fh)
    if _read_exact(source, len(MODEL_MAGIC)) != MODEL_MAGIC:
        raise FormatError("bad model magic")
    version, flags = struct.unpack("<II", _read_exact(source, 8))
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}")

    def read_f8(n):
        return np.frombuffer(_read_exact(source, 8 * n), dtype="<f8").astype(float)

    def read_c16(shape):
        n = int(np.prod(shape))
        raw = np.frombuffer(_read_exact(source, 16 * n), dtype="<c16")
        return raw.astype(complex).reshape(shape)

    if flags & _FLAG_FACTORED:
        K_tx, n_tx, K_rx, n_rx = struct.unpack("<IIII", _read_exact(source, 16))
        weights = read_f8(K_tx * K_rx)
        tx_w = read_f8(K_tx)
        tx_c = read_c16((K_tx, n_tx, n_tx))
        rx_w = read_f8(K_rx)
        rx_c = read_c16((K_rx, n_rx, n_rx))
        return GmmModel(weights=weights, covariances=_expand_kron(tx_c, rx_c),
                        n_tx=n_tx, n_rx=n_rx, tx_weights=tx_w, tx_covariances=tx_c,
                        rx_weights=rx_w, rx_covariances=rx_c)
    K, n_tx, n_rx = struct.unpack("<III", _read_exact(source, 12))
    weights = read_f8(K)
    covs = read_c16((K, n_tx * n_rx, n_tx * n_rx))
    return GmmModel(weights=weights, covariances=covs, n_tx=n_tx, n_rx=n_rx)
