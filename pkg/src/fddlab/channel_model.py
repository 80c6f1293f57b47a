"""Conditionally Gaussian spatial channel synthesis for uniform linear arrays.

One-cluster scenario model: departure/arrival angles are drawn uniformly on
[-pi/2, pi/2], each side's spatial covariance is the integral of a Laplacian
angular power density against steering-vector outer products, and per-block
channel realizations are zero-mean circularly-symmetric complex Gaussians
with the Kronecker product of the two side covariances.

Conventions used throughout the package:

* ``h = vec(H)`` stacks the columns of the ``n_rx x n_tx`` channel matrix
  (column-major), so ``vec(H @ P.T) == kron(P, I_rx) @ vec(H)`` and
  ``E[h h^H] == kron(C_tx, C_rx)``.
* Complex normals have unit variance per entry, ``(re + 1j*im)/sqrt(2)``.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import BinaryIO

import numpy as np

from .errors import ConfigError, FormatError, NumericError

DEFAULT_SIGMA_AS_TX = np.deg2rad(2.0)
DEFAULT_SIGMA_AS_RX = np.deg2rad(35.0)

DATASET_MAGIC = b"FDDCH01\0"

# Mass of a Laplacian tail beyond this many scale lengths is < 1e-17 and is
# dropped from the integration domain.
_TAIL_CUT_SCALES = 40.0
_GEN_CHUNK = 2048


# ---------------------------------------------------------------------------
# rng helpers
# ---------------------------------------------------------------------------

def substream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic child generator for (seed, key) independent of call order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def complex_normal(rng: np.random.Generator, shape: tuple[int, ...] | int) -> np.ndarray:
    """Circularly-symmetric standard complex normal draws, unit variance per entry."""
    if isinstance(shape, int):
        shape = (shape,)
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UlaGeometry:
    """Uniform linear array with half-wavelength element spacing."""

    n_antennas: int

    def __post_init__(self) -> None:
        if self.n_antennas < 1:
            raise ValueError(f"n_antennas must be >= 1, got {self.n_antennas}")


@dataclass(frozen=True)
class QuadratureConfig:
    """Node budget for the angular covariance integral.

    ``n_nodes`` is a lower bound on the total number of quadrature nodes;
    the composite rule allocates at least this many across its segments.
    """

    n_nodes: int = 720

    def __post_init__(self) -> None:
        if self.n_nodes < 2:
            raise ConfigError(f"quadrature needs at least 2 nodes, got {self.n_nodes}")


@dataclass(frozen=True)
class ClusterParams:
    """Scenario description: per-cluster center angles plus angular spreads.

    Angles are in radians within [-pi/2, pi/2]; spreads are the standard
    deviations of the Laplacian power densities on each side.
    """

    aod: np.ndarray
    aoa: np.ndarray
    sigma_as_tx: float = DEFAULT_SIGMA_AS_TX
    sigma_as_rx: float = DEFAULT_SIGMA_AS_RX

    def __post_init__(self) -> None:
        object.__setattr__(self, "aod", np.atleast_1d(np.asarray(self.aod, dtype=float)))
        object.__setattr__(self, "aoa", np.atleast_1d(np.asarray(self.aoa, dtype=float)))
        if self.aod.shape != self.aoa.shape:
            raise ValueError("aod and aoa must hold one angle per cluster")
        for name, angles in (("aod", self.aod), ("aoa", self.aoa)):
            if np.any(np.abs(angles) > np.pi / 2):
                raise ValueError(f"{name} outside [-pi/2, pi/2]")
        if not (self.sigma_as_tx > 0 and self.sigma_as_rx > 0):
            raise ValueError("angular spreads must be strictly positive")

    @property
    def n_clusters(self) -> int:
        return self.aod.size


@dataclass(frozen=True)
class SpatialCovariance:
    """One side's spatial covariance, trace-normalized to the antenna count."""

    side: str
    matrix: np.ndarray

    def __post_init__(self) -> None:
        if self.side not in ("tx", "rx"):
            raise ValueError(f"side must be 'tx' or 'rx', got {self.side!r}")

    @property
    def n_antennas(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ChannelSample:
    """One vectorized channel realization ``h = vec(H)``."""

    h: np.ndarray
    scenario_id: object = None


@dataclass(frozen=True)
class DatasetHeader:
    n_tx: int
    n_rx: int
    n_samples: int

    @property
    def dim(self) -> int:
        return self.n_tx * self.n_rx


@dataclass
class Dataset:
    """In-memory channel dataset: ``samples[l]`` is the l-th vectorized channel."""

    n_tx: int
    n_rx: int
    samples: np.ndarray

    @property
    def header(self) -> DatasetHeader:
        return DatasetHeader(self.n_tx, self.n_rx, self.samples.shape[0])


@dataclass(frozen=True)
class DatasetConfig:
    n_samples: int
    tx: UlaGeometry
    rx: UlaGeometry
    sigma_as_tx: float = DEFAULT_SIGMA_AS_TX
    sigma_as_rx: float = DEFAULT_SIGMA_AS_RX
    n_clusters: int = 1
    seed: int = 0
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if self.n_clusters < 1:
            raise ConfigError("n_clusters must be >= 1")


# ---------------------------------------------------------------------------
# vec conventions
# ---------------------------------------------------------------------------

def vec(H: np.ndarray) -> np.ndarray:
    """Column-major stacking of an ``n_rx x n_tx`` matrix."""
    return H.T.reshape(-1)


def unvec(h: np.ndarray, n_tx: int, n_rx: int) -> np.ndarray:
    """Inverse of :func:`vec`: recover the ``n_rx x n_tx`` channel matrix."""
    return h.reshape(n_tx, n_rx).T


# ---------------------------------------------------------------------------
# steering vectors and covariance synthesis
# ---------------------------------------------------------------------------

def _steering_matrix(n_antennas: int, thetas: np.ndarray) -> np.ndarray:
    """Stacked ULA responses, one column per angle, no domain restriction."""
    m = np.arange(n_antennas)
    return np.exp(1j * np.pi * np.outer(m, np.sin(thetas)))


def steering_vector(geometry: UlaGeometry, theta: float) -> np.ndarray:
    """ULA response ``[1, e^{j pi sin(theta)}, ...]`` for a single angle.

    ``theta`` must lie in [-pi/2, pi/2] (broadside convention).
    """
    if not np.isfinite(theta) or abs(theta) > np.pi / 2:
        raise ValueError(f"steering angle {theta!r} outside [-pi/2, pi/2]")
    return _steering_matrix(geometry.n_antennas, np.asarray([theta]))[:, 0]


@lru_cache(maxsize=None)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def _kink_segments(center: float, scale: float, n_antennas: int) -> list[tuple[float, float]]:
    """Integration segments over [-pi, pi], graded around the density kink.

    Breakpoints double geometrically away from ``center`` so the exponential
    is resolved, tails beyond the mass cutoff are dropped, and wide segments
    are split so the steering-vector oscillation stays polynomially cheap.
    """
    lo, hi = -np.pi, np.pi
    cut = _TAIL_CUT_SCALES * scale
    left, right = max(lo, center - cut), min(hi, center + cut)
    pts = {left, right}
    if left < center < right:
        pts.add(center)
    r = scale
    while center + r < right or center - r > left:
        if center + r < right:
            pts.add(center + r)
        if center - r > left:
            pts.add(center - r)
        r *= 2.0
    ordered = sorted(pts)
    width_cap = max(0.05, 24.0 / (np.pi * max(n_antennas - 1, 1)))
    segments: list[tuple[float, float]] = []
    for a0, a1 in zip(ordered[:-1], ordered[1:]):
        n_parts = max(1, int(np.ceil((a1 - a0) / width_cap)))
        edges = np.linspace(a0, a1, n_parts + 1)
        segments.extend(zip(edges[:-1], edges[1:]))
    return segments


def _quad_nodes(center: float, scale: float, n_antennas: int,
                n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite Gauss-Legendre rule."""
    segments = _kink_segments(center, scale, n_antennas)
    orders = []
    for a0, a1 in segments:
        width = a1 - a0
        oscillation = np.pi * (n_antennas - 1) * width / 2.0
        decay = min(width / (2.0 * scale), 30.0)
        orders.append(int(np.ceil(0.7 * oscillation + decay)) + 8)
    total = sum(orders)
    if total < n_nodes:
        boost = n_nodes / total
        orders = [int(np.ceil(p * boost)) for p in orders]
    nodes = []
    weights = []
    for (a0, a1), order in zip(segments, orders):
        x, w = _leggauss(order)
        half = 0.5 * (a1 - a0)
        nodes.append(half * x + 0.5 * (a0 + a1))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def synth_covariance(geometry: UlaGeometry, center_angle: float, sigma_as: float,
                     quadrature: QuadratureConfig = QuadratureConfig(),
                     side: str = "tx") -> SpatialCovariance:
    """Spatial covariance of a single Laplacian cluster.

    Numerically integrates the Laplacian power density (standard deviation
    ``sigma_as``, centered at ``center_angle``, truncated and renormalized to
    [-pi, pi]) against steering outer products, then rescales the result to
    trace ``n_antennas``.
    """
    if not sigma_as > 0:
        raise ValueError(f"angular spread must be positive, got {sigma_as}")
    matrix = _synth_matrix(geometry.n_antennas, center_angle, sigma_as, quadrature.n_nodes)
    return SpatialCovariance(side=side, matrix=matrix)


def _synth_matrix(n_antennas: int, center: float, sigma_as: float, n_nodes: int) -> np.ndarray:
    scale = sigma_as / np.sqrt(2.0)  # Laplacian scale from standard deviation
    thetas, w = _quad_nodes(center, scale, n_antennas, n_nodes)
    density = np.exp(-np.abs(thetas - center) / scale)
    mass = w @ density
    A = _steering_matrix(n_antennas, thetas)
    C = (A * (w * density)) @ A.conj().T / mass
    C = 0.5 * (C + C.conj().T)
    # steering outer products have unit-modulus diagonals, so the trace is
    # already n_antennas up to rounding; pin it exactly
    return C * (n_antennas / np.real(np.trace(C)))


def kron_covariance(tx: SpatialCovariance, rx: SpatialCovariance) -> np.ndarray:
    """Full covariance of ``vec(H)``: ``kron(C_tx, C_rx)``."""
    if tx.side != "tx" or rx.side != "rx":
        raise ValueError(f"expected (tx, rx) covariances, got ({tx.side}, {rx.side})")
    return np.kron(tx.matrix, rx.matrix)


def scenario_covariances(tx_geom: UlaGeometry, rx_geom: UlaGeometry, params: ClusterParams,
                         quadrature: QuadratureConfig = QuadratureConfig(),
                         ) -> tuple[SpatialCovariance, SpatialCovariance]:
    """Per-side covariances of a scenario; clusters get uniform power."""
    n_tx, n_rx = tx_geom.n_antennas, rx_geom.n_antennas
    ctx = np.zeros((n_tx, n_tx), dtype=complex)
    crx = np.zeros((n_rx, n_rx), dtype=complex)
    for aod, aoa in zip(params.aod, params.aoa):
        ctx += _synth_matrix(n_tx, aod, params.sigma_as_tx, quadrature.n_nodes)
        crx += _synth_matrix(n_rx, aoa, params.sigma_as_rx, quadrature.n_nodes)
    ctx *= n_tx / np.real(np.trace(ctx))
    crx *= n_rx / np.real(np.trace(crx))
    return SpatialCovariance("tx", ctx), SpatialCovariance("rx", crx)


# ---------------------------------------------------------------------------
# scenario and channel sampling
# ---------------------------------------------------------------------------

def draw_scenario(rng: np.random.Generator,
                  sigma_as_tx: float = DEFAULT_SIGMA_AS_TX,
                  sigma_as_rx: float = DEFAULT_SIGMA_AS_RX,
                  n_clusters: int = 1) -> ClusterParams:
    """Draw cluster angles uniformly on [-pi/2, pi/2]; spreads stay fixed."""
    aod = rng.uniform(-np.pi / 2, np.pi / 2, n_clusters)
    aoa = rng.uniform(-np.pi / 2, np.pi / 2, n_clusters)
    return ClusterParams(aod=aod, aoa=aoa, sigma_as_tx=sigma_as_tx, sigma_as_rx=sigma_as_rx)


def _coloring_factor(cov: np.ndarray) -> np.ndarray:
    """Hermitian square root via eigendecomposition, eigenvalues clipped at 0."""
    n = cov.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    tol = -1e-10 * max(np.real(np.trace(cov)), 0.0) / n
    if evals[0] < tol:
        raise NumericError(f"covariance indefinite: min eigenvalue {evals[0]:.3e}")
    return evecs * np.sqrt(np.clip(evals, 0.0, None))


def sample_channel(cov: np.ndarray, rng: np.random.Generator,
                   scenario_id: object = None) -> ChannelSample:
    """Draw ``h ~ CN(0, cov)`` by coloring standard complex normals."""
    B = _coloring_factor(np.asarray(cov))
    w = complex_normal(rng, cov.shape[0])
    return ChannelSample(h=B @ w, scenario_id=scenario_id)


def _batch_coloring(covs: np.ndarray) -> np.ndarray:
    """Coloring factors for a stack of PSD matrices."""
    evals, evecs = np.linalg.eigh(covs)
    return evecs * np.sqrt(np.clip(evals, 0.0, None))[:, None, :]


def _draw_chunk(cfg: DatasetConfig, rng: np.random.Generator, m: int) -> np.ndarray:
    """m vectorized channel samples, one fresh scenario each."""
    n_tx, n_rx = cfg.tx.n_antennas, cfg.rx.n_antennas
    aods = rng.uniform(-np.pi / 2, np.pi / 2, (m, cfg.n_clusters))
    aoas = rng.uniform(-np.pi / 2, np.pi / 2, (m, cfg.n_clusters))
    W = complex_normal(rng, (m, n_rx, n_tx))
    ctx = np.empty((m, n_tx, n_tx), dtype=complex)
    crx = np.empty((m, n_rx, n_rx), dtype=complex)
    for i in range(m):
        params = ClusterParams(aods[i], aoas[i], cfg.sigma_as_tx, cfg.sigma_as_rx)
        tx_cov, rx_cov = scenario_covariances(cfg.tx, cfg.rx, params, cfg.quadrature)
        ctx[i] = tx_cov.matrix
        crx[i] = rx_cov.matrix
    btx = _batch_coloring(ctx)
    brx = _batch_coloring(crx)
    # H = Brx W Btx^T gives cov(vec(H)) = Ctx kron Crx
    H = np.einsum("lrm,lmn,ltn->lrt", brx, W, btx)
    return H.transpose(0, 2, 1).reshape(m, n_tx * n_rx)


def generate_samples(cfg: DatasetConfig) -> Dataset:
    """Generate a dataset in memory, normalized so the mean energy equals N."""
    n = cfg.tx.n_antennas * cfg.rx.n_antennas
    L = cfg.n_samples
    root = np.random.SeedSequence(cfg.seed)
    n_chunks = (L + _GEN_CHUNK - 1) // _GEN_CHUNK
    children = root.spawn(n_chunks)
    chunks = []
    for c in range(n_chunks):
        m = min(_GEN_CHUNK, L - c * _GEN_CHUNK)
        chunks.append(_draw_chunk(cfg, np.random.default_rng(children[c]), m))
    samples = np.concatenate(chunks, axis=0)
    # uniform scaling so (1/L) sum ||h||^2 == N; second pass absorbs rounding
    for _ in range(2):
        energy = np.mean(np.abs(samples) ** 2) * n
        samples *= np.sqrt(n / energy)
    return Dataset(n_tx=cfg.tx.n_antennas, n_rx=cfg.rx.n_antennas, samples=samples)


# ---------------------------------------------------------------------------
# dataset file format
# ---------------------------------------------------------------------------

def write_dataset(dataset: Dataset, sink: BinaryIO | str) -> DatasetHeader:
    """Write header plus interleaved little-endian float64 (re, im) pairs."""
    header = dataset.header
    payload = np.ascontiguousarray(dataset.samples, dtype="<c16").tobytes()
    blob = (DATASET_MAGIC
            + struct.pack("<IIQ", header.n_tx, header.n_rx, header.n_samples)
            + payload)
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        with open(sink, "wb") as fh:
            fh.write(blob)
    else:
        sink.write(blob)
    return header


def generate_dataset(cfg: DatasetConfig, sink: BinaryIO | str) -> DatasetHeader:
    """Generate, normalize, and persist a channel dataset."""
    return write_dataset(generate_samples(cfg), sink)


def read_dataset(source: BinaryIO | str) -> Dataset:
    """Read a dataset file; raises :class:`FormatError` on mismatch."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            data = fh.read()
    else:
        data = source.read()
    head_len = len(DATASET_MAGIC) + struct.calcsize("<IIQ")
    if len(data) < head_len or data[: len(DATASET_MAGIC)] != DATASET_MAGIC:
        raise FormatError("not a channel dataset file")
    n_tx, n_rx, n_samples = struct.unpack_from("<IIQ", data, len(DATASET_MAGIC))
    expected = head_len + n_samples * n_tx * n_rx * 16
    if len(data) != expected:
        raise FormatError(f"dataset payload has {len(data) - head_len} bytes, "
                          f"expected {expected - head_len}")
    flat = np.frombuffer(data, dtype="<c16", offset=head_len)
    return Dataset(n_tx=n_tx, n_rx=n_rx,
                   samples=flat.reshape(n_samples, n_tx * n_rx).copy())
