"""Block-fading feedback loop and the Monte-Carlo benchmark engine.

One episode covers blocks t = 0..T for a single terminal: the base station
sounds with a DFT pilot at t=0 and with the codebook entry named by the
last feedback afterwards; the terminal estimates the channel from the
current observation only and feeds back the MAP component index. The
benchmark engine replays J episodes over a scheme/SNR grid with common
random numbers, so scheme deltas are paired.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .channel_model import (ClusterParams, QuadratureConfig, UlaGeometry,
                            DEFAULT_SIGMA_AS_RX, DEFAULT_SIGMA_AS_TX,
                            _coloring_factor, complex_normal, draw_scenario,
                            scenario_covariances, substream)
from .errors import ConfigError
from .estimators import (DictionaryConfig, batch_gmm_estimate, kron_dictionary,
                         lmmse_filter, omp_path, sensing_matrix)
from .gmm_core import (GmmModel, ObservationGmm, Responsibilities,
                       _normalized_probs, map_feedback, observation_model)
from .pilot_design import (PilotCodebook, PilotMatrix, dft_pilot, genie_pilot,
                           random_pilot)

ESTIMATOR_IDS = ("gmm", "glmmse", "slmmse", "omp", "oracle", "zero")
PILOT_SCHEME_IDS = ("gmm", "dft", "rnd", "genie")

CSV_COLUMNS = ("t", "snr_db", "estimator", "pilot_scheme", "n_p", "K",
               "nmse", "n_eval", "seed")


def sigma2_from_snr(snr_db: float, rho: float = 1.0) -> float:
    """Noise variance for a given SNR = rho/sigma^2."""
    return rho * 10.0 ** (-snr_db / 10.0)


# ---------------------------------------------------------------------------
# configuration and record types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProtocolConfig:
    """Block structure, pilot length, SNR grid, and master seed."""

    T: int = 10
    eval_block: int = 5
    snr_db: Union[float, Sequence[float]] = 10.0
    n_p: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.T < 0 or not 0 <= self.eval_block <= self.T:
            raise ConfigError("need 0 <= eval_block <= T")
        if self.n_p < 1:
            raise ConfigError("n_p must be >= 1")

    @property
    def snr_grid(self) -> Tuple[float, ...]:
        if np.isscalar(self.snr_db):
            return (float(self.snr_db),)
        return tuple(float(s) for s in self.snr_db)


@dataclass(frozen=True)
class SchemeSpec:
    """One (estimator, pilot policy) pairing evaluated by the benchmark."""

    estimator_id: str
    pilot_scheme_id: str

    def __post_init__(self):
        if self.estimator_id not in ESTIMATOR_IDS:
            raise ConfigError(f"unknown estimator '{self.estimator_id}'")
        if self.pilot_scheme_id not in PILOT_SCHEME_IDS:
            raise ConfigError(f"unknown pilot scheme '{self.pilot_scheme_id}'")


@dataclass
class BsState:
    """Base-station side: codebook plus the last received feedback."""

    codebook: PilotCodebook
    dft: PilotMatrix
    last_feedback: Optional[int] = None

    def select_pilot(self, t: int) -> PilotMatrix:
        if t == 0 or self.last_feedback is None:
            return self.dft
        return self.codebook[self.last_feedback]

    def receive_feedback(self, k_star: int):
        self.last_feedback = int(k_star)


@dataclass
class MtState:
    """Terminal side: the shared model and the latest inference results."""

    model: GmmModel
    last_responsibilities: Optional[Responsibilities] = None
    last_estimate: Optional[np.ndarray] = None


@dataclass(frozen=True)
class NmseRecord:
    """One benchmark table row."""

    t: int
    snr_db: float
    estimator_id: str
    pilot_scheme_id: str
    n_p: int
    K: int
    nmse: float
    n_eval: int
    seed: int

    def __post_init__(self):
        if self.nmse < 0:
            raise ConfigError("nmse must be nonnegative")


@dataclass
class BenchmarkConfig:
    """Everything run_benchmark needs: artifacts, scheme grid, and scenario."""

    model: GmmModel
    protocol: ProtocolConfig
    schemes: Tuple[SchemeSpec, ...]
    J: int = 2000
    codebook: Optional[PilotCodebook] = None
    rho: float = 1.0
    sigma_as_tx: float = DEFAULT_SIGMA_AS_TX
    sigma_as_rx: float = DEFAULT_SIGMA_AS_RX
    n_clusters: int = 1
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    sample_cov: Optional[np.ndarray] = None
    dictionary: DictionaryConfig = field(default_factory=DictionaryConfig)
    threads: Optional[int] = None

    def __post_init__(self):
        self.schemes = tuple(self.schemes)
        if not self.schemes:
            raise ConfigError("scheme matrix must not be empty")
        if self.J < 1:
            raise ConfigError("J must be >= 1")
        n_tx = self.model.n_tx
        if self.protocol.n_p > n_tx:
            raise ConfigError("n_p cannot exceed N_tx")
        needs_codebook = any(s.pilot_scheme_id == "gmm" for s in self.schemes)
        if needs_codebook:
            if self.codebook is None:
                raise ConfigError("adaptive pilot scheme requires a codebook")
            if self.codebook.K != self.model.K:
                raise ConfigError("codebook size must match the model")
            entry = self.codebook[0]
            if entry.n_tx != n_tx or entry.n_p != self.protocol.n_p:
                raise ConfigError("codebook dimensions do not match the run")
        if any(s.estimator_id == "slmmse" for s in self.schemes):
            N = n_tx * self.model.n_rx
            if self.sample_cov is None or np.shape(self.sample_cov) != (N, N):
                raise ConfigError("slmmse needs an N x N sample covariance")


@dataclass
class BenchmarkResult:
    """Records plus the raw per-episode squared errors behind them."""

    records: List[NmseRecord]
    errors: Dict[Tuple[str, str, float], np.ndarray]
    config: BenchmarkConfig

    def nmse(self, estimator_id: str, pilot_scheme_id: str, snr_db: float,
             t: Optional[int] = None) -> float:
        err = self.errors[(estimator_id, pilot_scheme_id, float(snr_db))]
        t = self.config.protocol.eval_block if t is None else t
        N = self.config.model.n_tx * self.config.model.n_rx
        return float(err[:, t].sum() / (N * len(err)))


def resolve_threads(requested: Optional[int] = None) -> int:
    """Worker count: explicit request, else FDDLAB_THREADS, else CPU count."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("FDDLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"bad FDDLAB_THREADS value '{env}'") from exc
    return max(1, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# sequential reference episode
# ---------------------------------------------------------------------------

def run_episode(scenario: ClusterParams, bs: BsState, mt: MtState,
                config: ProtocolConfig, rng: np.random.Generator, *,
                snr_db: Optional[float] = None,
                channels: Optional[np.ndarray] = None,
                unit_noise: Optional[np.ndarray] = None,
                cov_tx: Optional[np.ndarray] = None,
                cov_rx: Optional[np.ndarray] = None,
                quadrature: QuadratureConfig = QuadratureConfig(),
                rho: float = 1.0) -> List[dict]:
    """Run one terminal through blocks t = 0..T and return per-block records.

    Channels and unit-variance noise can be supplied to replay a batched
    run; otherwise they are drawn from rng (channel block first, then
    noise, per block order).
    """
    model = mt.model
    n_tx, n_rx = model.n_tx, model.n_rx
    N = n_tx * n_rx
    if bs.dft.n_tx != n_tx or bs.codebook[0].n_tx != n_tx:
        raise ConfigError("pilot dimensions do not match the model")
    snrs = config.snr_grid
    if snr_db is None:
        if len(snrs) != 1:
            raise ConfigError("run_episode needs a scalar SNR")
        snr_db = snrs[0]
    sigma2 = sigma2_from_snr(snr_db, rho)

    if cov_tx is None or cov_rx is None:
        ctx, crx = scenario_covariances(UlaGeometry(n_tx), UlaGeometry(n_rx),
                                        scenario, quadrature)
        cov_tx, cov_rx = ctx.matrix, crx.matrix
    if channels is None:
        F_tx = _coloring_factor(cov_tx)
        F_rx = _coloring_factor(cov_rx)
        Z = complex_normal(rng, (config.T + 1, n_rx, n_tx))
        H = F_rx @ Z @ F_tx.T
        channels = H.transpose(0, 2, 1).reshape(config.T + 1, N)
    M = config.n_p * n_rx
    if unit_noise is None:
        unit_noise = complex_normal(rng, (config.T + 1, M))

    records = []
    for t in range(config.T + 1):
        pilot = bs.select_pilot(t)
        if pilot.n_p != config.n_p:
            raise ConfigError("pilot length does not match the protocol")
        A = sensing_matrix(pilot, n_rx)
        h = channels[t]
        y = A @ h + np.sqrt(sigma2) * unit_noise[t]
        obs_model = observation_model(model, pilot, sigma2)
        H_hat, probs = batch_gmm_estimate(obs_model, y[None, :])
        resp = Responsibilities(probs[0])
        fb = map_feedback(resp)
        bs.receive_feedback(fb.k_star)
        mt.last_responsibilities = resp
        mt.last_estimate = H_hat[0]
        records.append({
            "t": t,
            "snr_db": float(snr_db),
            "pilot_key": pilot.cache_key,
            "pilot_provenance": pilot.provenance,
            "feedback": fb.k_star,
            "bits": fb.bit_width,
            "sq_err": float(np.sum(np.abs(h - H_hat[0]) ** 2)),
            "h_hat": H_hat[0],
            "probs": probs[0],
        })
    return records


# ---------------------------------------------------------------------------
# batched benchmark engine
# ---------------------------------------------------------------------------

@dataclass
class EpisodeBank:
    """Per-episode draws shared by every scheme and SNR (common randomness)."""

    channels: np.ndarray                      # (J, T+1, N)
    unit_noise: np.ndarray                    # (J, T+1, M)
    cov_tx: np.ndarray                        # (J, n_tx, n_tx)
    cov_rx: np.ndarray                        # (J, n_rx, n_rx)
    dft_pilot: PilotMatrix
    genie_pilots: Optional[List[PilotMatrix]]
    rnd_pilots: Optional[List[PilotMatrix]]

    @property
    def J(self) -> int:
        return self.channels.shape[0]


def build_episode_bank(cfg: BenchmarkConfig) -> EpisodeBank:
    """Draw scenarios, channels, and unit noise from per-episode substreams."""
    model = cfg.model
    n_tx, n_rx = model.n_tx, model.n_rx
    N = n_tx * n_rx
    T1 = cfg.protocol.T + 1
    n_p = cfg.protocol.n_p
    M = n_p * n_rx
    J = cfg.J
    seed = cfg.protocol.seed
    tx_geom, rx_geom = UlaGeometry(n_tx), UlaGeometry(n_rx)

    want_genie = any(s.pilot_scheme_id == "genie" for s in cfg.schemes)
    want_rnd = any(s.pilot_scheme_id == "rnd" for s in cfg.schemes)

    channels = np.empty((J, T1, N), dtype=complex)
    unit_noise = np.empty((J, T1, M), dtype=complex)
    cov_tx = np.empty((J, n_tx, n_tx), dtype=complex)
    cov_rx = np.empty((J, n_rx, n_rx), dtype=complex)
    genie_pilots = [] if want_genie else None
    rnd_pilots = [] if want_rnd else None

    for j in range(J):
        rng = substream(seed, j, 0)
        params = draw_scenario(rng, cfg.sigma_as_tx, cfg.sigma_as_rx,
                               cfg.n_clusters)
        ctx, crx = scenario_covariances(tx_geom, rx_geom, params,
                                        cfg.quadrature)
        cov_tx[j], cov_rx[j] = ctx.matrix, crx.matrix
        F_tx = _coloring_factor(cov_tx[j])
        F_rx = _coloring_factor(cov_rx[j])
        Z = complex_normal(rng, (T1, n_rx, n_tx))
        H = F_rx @ Z @ F_tx.T
        channels[j] = H.transpose(0, 2, 1).reshape(T1, N)
        unit_noise[j] = complex_normal(substream(seed, j, 1), (T1, M))
        if want_genie:
            genie_pilots.append(genie_pilot(cov_tx[j], n_p, cfg.rho))
        if want_rnd:
            pilot_seed = int(np.random.SeedSequence(
                seed, spawn_key=(j, 2)).generate_state(1)[0])
            rnd_pilots.append(random_pilot(n_tx, n_p, cfg.rho, pilot_seed))

    return EpisodeBank(channels=channels, unit_noise=unit_noise,
                       cov_tx=cov_tx, cov_rx=cov_rx,
                       dft_pilot=dft_pilot(n_tx, n_p, cfg.rho),
                       genie_pilots=genie_pilots, rnd_pilots=rnd_pilots)


class _TaskContext:
    """Per-(scheme, SNR) helpers: filters, dictionaries, and noise scaling."""

    def __init__(self, cfg: BenchmarkConfig, bank: EpisodeBank, sigma2: float):
        self.cfg = cfg
        self.bank = bank
        self.sigma2 = sigma2
        self.model = cfg.model
        self.n_rx = cfg.model.n_rx
        self._slmmse_filters = {}
        self._omp_dict = None

    def observations(self, idx, t, A) -> np.ndarray:
        noise = self.bank.unit_noise[idx, t]
        return self.bank.channels[idx, t] @ A.T + np.sqrt(self.sigma2) * noise

    def obs_model(self, pilot: PilotMatrix, reusable: bool) -> ObservationGmm:
        if reusable:
            return observation_model(self.model, pilot, self.sigma2)
        return ObservationGmm(self.model, pilot.matrix, self.sigma2)

    def slmmse_filter(self, pilot: PilotMatrix, A: np.ndarray) -> np.ndarray:
        W = self._slmmse_filters.get(pilot.cache_key)
        if W is None:
            W = lmmse_filter(self.cfg.sample_cov, A, self.sigma2)
            self._slmmse_filters[pilot.cache_key] = W
        return W

    def glmmse_filter(self, j: int, A: np.ndarray) -> np.ndarray:
        C = np.kron(self.bank.cov_tx[j], self.bank.cov_rx[j])
        return lmmse_filter(C, A, self.sigma2)

    def omp_dictionary(self) -> np.ndarray:
        if self._omp_dict is None:
            self._omp_dict = kron_dictionary(
                self.model.n_tx, self.n_rx, self.cfg.dictionary.oversampling)
        return self._omp_dict

    def omp_estimates(self, A: np.ndarray, Y: np.ndarray,
                      H_true: np.ndarray) -> np.ndarray:
        D = self.omp_dictionary()
        A_sens = A @ D
        genie = self.cfg.dictionary.sparsity_mode == "genie"
        if genie:
            s = min(Y.shape[1], A_sens.shape[1])
        else:
            s = self.cfg.dictionary.sparsity
            s = self.cfg.protocol.n_p if s is None else s
            s = min(s, A_sens.shape[1])
        out = np.empty((Y.shape[0], D.shape[0]), dtype=complex)
        for i in range(Y.shape[0]):
            support, coeffs, _ = omp_path(A_sens, Y[i], s)
            if genie:
                cands = [D[:, support[:m + 1]] @ coeffs[m]
                         for m in range(len(coeffs))]
                errs = [np.sum(np.abs(H_true[i] - c) ** 2) for c in cands]
                out[i] = cands[int(np.argmin(errs))]
            else:
                out[i] = D[:, support] @ coeffs[-1]
        return out


def _group_estimates(ctx: _TaskContext, scheme: SchemeSpec, pilot: PilotMatrix,
                     A: np.ndarray, idx: np.ndarray, t: int, Y: np.ndarray,
                     obs: Optional[ObservationGmm],
                     probs: Optional[np.ndarray]) -> np.ndarray:
    est = scheme.estimator_id
    if est == "gmm":
        H_hat, _ = batch_gmm_estimate(obs, Y, probs)
        return H_hat
    if est == "glmmse":
        H_hat = np.empty((len(idx), ctx.bank.channels.shape[2]), dtype=complex)
        for row, j in enumerate(idx):
            H_hat[row] = ctx.glmmse_filter(int(j), A) @ Y[row]
        return H_hat
    if est == "slmmse":
        return Y @ ctx.slmmse_filter(pilot, A).T
    if est == "omp":
        return ctx.omp_estimates(A, Y, ctx.bank.channels[idx, t])
    if est == "oracle":
        return ctx.bank.channels[idx, t].copy()
    if est == "zero":
        return np.zeros((len(idx), ctx.bank.channels.shape[2]), dtype=complex)
    raise ConfigError(f"unknown estimator '{est}'")


def _needs_feedback(scheme: SchemeSpec) -> bool:
    return scheme.pilot_scheme_id == "gmm"


def _run_adaptive(ctx: _TaskContext, scheme: SchemeSpec) -> np.ndarray:
    cfg, bank = ctx.cfg, ctx.bank
    J, T1, _ = bank.channels.shape
    errors = np.empty((J, T1))
    fb = np.zeros(J, dtype=int)
    for t in range(T1):
        if t == 0:
            groups = [(bank.dft_pilot, np.arange(J))]
        else:
            groups = [(cfg.codebook[k], np.flatnonzero(fb == k))
                      for k in np.unique(fb)]
        next_fb = np.empty(J, dtype=int)
        for pilot, idx in groups:
            A = sensing_matrix(pilot, ctx.n_rx)
            Y = ctx.observations(idx, t, A)
            obs = ctx.obs_model(pilot, reusable=True)
            probs = _normalized_probs(obs.log_responsibilities(Y))
            next_fb[idx] = np.argmax(probs, axis=1)
            H_hat = _group_estimates(ctx, scheme, pilot, A, idx, t, Y, obs, probs)
            errors[idx, t] = np.sum(
                np.abs(bank.channels[idx, t] - H_hat) ** 2, axis=1)
        fb = next_fb
    return errors


def _run_fixed_shared(ctx: _TaskContext, scheme: SchemeSpec,
                      pilot: PilotMatrix) -> np.ndarray:
    bank = ctx.bank
    J, T1, N = bank.channels.shape
    errors = np.empty((J, T1))
    A = sensing_matrix(pilot, ctx.n_rx)
    if scheme.estimator_id == "glmmse":
        # per-episode filter, applied across all blocks at once
        for j in range(J):
            W = ctx.glmmse_filter(j, A)
            noise = bank.unit_noise[j]
            Y = bank.channels[j] @ A.T + np.sqrt(ctx.sigma2) * noise
            H_hat = Y @ W.T
            errors[j] = np.sum(np.abs(bank.channels[j] - H_hat) ** 2, axis=1)
        return errors
    obs = ctx.obs_model(pilot, reusable=True) if scheme.estimator_id == "gmm" \
        else None
    idx = np.arange(J)
    for t in range(T1):
        Y = ctx.observations(idx, t, A)
        probs = None
        H_hat = _group_estimates(ctx, scheme, pilot, A, idx, t, Y, obs, probs)
        errors[:, t] = np.sum(np.abs(bank.channels[:, t] - H_hat) ** 2, axis=1)
    return errors


def _run_fixed_per_episode(ctx: _TaskContext, scheme: SchemeSpec,
                           pilots: List[PilotMatrix]) -> np.ndarray:
    bank = ctx.bank
    J, T1, N = bank.channels.shape
    errors = np.empty((J, T1))
    for j in range(J):
        pilot = pilots[j]
        A = sensing_matrix(pilot, ctx.n_rx)
        Y = bank.channels[j] @ A.T \
            + np.sqrt(ctx.sigma2) * bank.unit_noise[j]
        est = scheme.estimator_id
        if est == "gmm":
            obs = ctx.obs_model(pilot, reusable=False)
            H_hat, _ = batch_gmm_estimate(obs, Y)
        elif est == "glmmse":
            H_hat = Y @ ctx.glmmse_filter(j, A).T
        elif est == "slmmse":
            H_hat = Y @ lmmse_filter(ctx.cfg.sample_cov, A, ctx.sigma2).T
        elif est == "omp":
            H_hat = ctx.omp_estimates(A, Y, bank.channels[j])
        elif est == "oracle":
            H_hat = bank.channels[j].copy()
        elif est == "zero":
            H_hat = np.zeros((T1, N), dtype=complex)
        else:
            raise ConfigError(f"unknown estimator '{est}'")
        errors[j] = np.sum(np.abs(bank.channels[j] - H_hat) ** 2, axis=1)
    return errors


def _scheme_errors(cfg: BenchmarkConfig, bank: EpisodeBank, scheme: SchemeSpec,
                   snr_db: float) -> np.ndarray:
    ctx = _TaskContext(cfg, bank, sigma2_from_snr(snr_db, cfg.rho))
    policy = scheme.pilot_scheme_id
    if policy == "gmm":
        return _run_adaptive(ctx, scheme)
    if policy == "dft":
        return _run_fixed_shared(ctx, scheme, bank.dft_pilot)
    if policy == "genie":
        return _run_fixed_per_episode(ctx, scheme, bank.genie_pilots)
    if policy == "rnd":
        return _run_fixed_per_episode(ctx, scheme, bank.rnd_pilots)
    raise ConfigError(f"unknown pilot scheme '{policy}'")


def run_benchmark(cfg: BenchmarkConfig,
                  bank: Optional[EpisodeBank] = None) -> BenchmarkResult:
    """Evaluate every (scheme, SNR) cell on shared episode draws.

    Deterministic for a fixed config: all randomness is derived from
    per-episode substreams of the protocol seed, independent of thread
    count and task order.
    """
    if bank is None:
        bank = build_episode_bank(cfg)
    tasks = [(scheme, snr) for scheme in cfg.schemes
             for snr in cfg.protocol.snr_grid]
    n_workers = min(resolve_threads(cfg.threads), len(tasks))
    errors: Dict[Tuple[str, str, float], np.ndarray] = {}
    if n_workers <= 1:
        for scheme, snr in tasks:
            errors[(scheme.estimator_id, scheme.pilot_scheme_id, snr)] = \
                _scheme_errors(cfg, bank, scheme, snr)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = {
                pool.submit(_scheme_errors, cfg, bank, scheme, snr):
                    (scheme.estimator_id, scheme.pilot_scheme_id, snr)
                for scheme, snr in tasks}
            for future, key in futures.items():
                errors[key] = future.result()

    N = cfg.model.n_tx * cfg.model.n_rx
    records = []
    for scheme in cfg.schemes:
        for snr in cfg.protocol.snr_grid:
            err = errors[(scheme.estimator_id, scheme.pilot_scheme_id, snr)]
            for t in range(cfg.protocol.T + 1):
                records.append(NmseRecord(
                    t=t, snr_db=snr, estimator_id=scheme.estimator_id,
                    pilot_scheme_id=scheme.pilot_scheme_id,
                    n_p=cfg.protocol.n_p, K=cfg.model.K,
                    nmse=float(err[:, t].sum() / (N * cfg.J)),
                    n_eval=cfg.J, seed=cfg.protocol.seed))
    return BenchmarkResult(records=records, errors=errors, config=cfg)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def write_records_csv(records: Sequence[NmseRecord], sink):
    """Write the result table with the stable column set."""
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        with open(sink, "w", newline="") as fh:
            write_records_csv(records, fh)
        return
    writer = csv.writer(sink)
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([r.t, r.snr_db, r.estimator_id, r.pilot_scheme_id,
                         r.n_p, r.K, repr(r.nmse), r.n_eval, r.seed])


def read_records_csv(source) -> List[NmseRecord]:
    """Read a table written by write_records_csv."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "r", newline="") as fh:
            return read_records_csv(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ConfigError("unexpected CSV header")
    return [NmseRecord(t=int(row[0]), snr_db=float(row[1]), estimator_id=row[2],
                       pilot_scheme_id=row[3], n_p=int(row[4]), K=int(row[5]),
                       nmse=float(row[6]), n_eval=int(row[7]), seed=int(row[8]))
            for row in reader]
