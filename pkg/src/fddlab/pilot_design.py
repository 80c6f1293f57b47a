"""Pilot matrix construction: GMM codebook, genie, DFT, and random pilots.

All pilots are sub-unitary, P P^H = rho I, so every pilot vector carries the
same power and the constructions stay SNR-independent.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Sequence, Union

import numpy as np

from .channel_model import SpatialCovariance
from .errors import ConfigError, FormatError
from .gmm_core import GmmModel

CODEBOOK_MAGIC = b"FDDPCB01"


@dataclass(frozen=True)
class PilotMatrix:
    """A sub-unitary n_p x N_tx pilot with its power and origin tag."""

    matrix: np.ndarray
    rho: float = 1.0
    provenance: str = "unspecified"
    cache_key: str = field(init=False)

    def __post_init__(self):
        P = np.ascontiguousarray(np.asarray(self.matrix, dtype=complex))
        if P.ndim != 2 or P.shape[0] > P.shape[1]:
            raise ConfigError("pilot must be n_p x N_tx with n_p <= N_tx")
        gram = P @ P.conj().T
        if np.max(np.abs(gram - self.rho * np.eye(len(P)))) > 1e-10:
            raise ConfigError("pilot rows are not orthogonal with power rho")
        object.__setattr__(self, "matrix", P)
        digest = hashlib.sha256(P.tobytes() + str(P.shape).encode()).hexdigest()
        object.__setattr__(self, "cache_key", digest)

    @property
    def n_p(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_tx(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class PilotCodebook:
    """K pilot matrices, index-aligned with the GMM components."""

    entries: tuple

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ConfigError("codebook must hold at least one pilot")

    @property
    def K(self) -> int:
        return len(self.entries)

    def __getitem__(self, k: int) -> PilotMatrix:
        return self.entries[k]


def _fix_phases(U: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive."""
    U = U.copy()
    for c in range(U.shape[1]):
        pivot = U[np.argmax(np.abs(U[:, c])), c]
        if abs(pivot) > 0:
            U[:, c] *= np.conj(pivot) / abs(pivot)
    return U


def _eigenbeam_pilot(cov: np.ndarray, n_p: int, rho: float,
                     provenance: str) -> PilotMatrix:
    evals, evecs = np.linalg.eigh(cov)
    U = _fix_phases(evecs[:, ::-1][:, :n_p])
    return PilotMatrix(np.sqrt(rho) * U.conj().T, rho, provenance)


def _check_dims(n_tx: int, n_p: int, rho: float):
    if not 1 <= n_p <= n_tx:
        raise ConfigError(f"need 1 <= n_p <= N_tx, got n_p={n_p}, N_tx={n_tx}")
    if rho <= 0:
        raise ConfigError("rho must be positive")


def build_codebook(model: GmmModel, n_p: int, rho: float = 1.0) -> PilotCodebook:
    """Per-component pilots from the n_p dominant tx-covariance eigenvectors.

    Expanded components sharing a tx factor share one pilot object, so the
    codebook has K entries but only K_tx distinct matrices.
    """
    _check_dims(model.n_tx, n_p, rho)
    by_tx = {}
    entries = []
    for k in range(model.K):
        idx = k // model.K_rx
        if idx not in by_tx:
            evals, evecs = model.tx_eigh(k)
            U = _fix_phases(evecs[:, :n_p])
            by_tx[idx] = PilotMatrix(np.sqrt(rho) * U.conj().T, rho,
                                     f"codebook({idx})")
        entries.append(by_tx[idx])
    return PilotCodebook(tuple(entries))


def genie_pilot(scenario_cov_tx, n_p: int, rho: float = 1.0) -> PilotMatrix:
    """Pilot from the true transmit-side scenario covariance."""
    if isinstance(scenario_cov_tx, SpatialCovariance):
        if scenario_cov_tx.side != "tx":
            raise ConfigError("genie pilot needs the transmit-side covariance")
        cov = scenario_cov_tx.matrix
    else:
        cov = np.asarray(scenario_cov_tx, dtype=complex)
    _check_dims(cov.shape[0], n_p, rho)
    return _eigenbeam_pilot(cov, n_p, rho, "genie")


def dft_pilot(n_tx: int, n_p: int, rho: float = 1.0) -> PilotMatrix:
    """Equispaced rows of the unitary DFT matrix, indices floor(i*N_tx/n_p)."""
    _check_dims(n_tx, n_p, rho)
    rows = np.array([(i * n_tx) // n_p for i in range(n_p)])
    grid = np.outer(rows, np.arange(n_tx))
    P = np.exp(-2j * np.pi * grid / n_tx) / np.sqrt(n_tx)
    return PilotMatrix(np.sqrt(rho) * P, rho, "dft")


def random_pilot(n_tx: int, n_p: int, rho: float = 1.0, seed: int = 0) -> PilotMatrix:
    """Row-orthonormalized i.i.d. complex Gaussian pilot, deterministic per seed."""
    _check_dims(n_tx, n_p, rho)
    rng = np.random.default_rng(seed)
    while True:
        z = rng.standard_normal((n_p, n_tx, 2))
        G = (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2)
        Q, R = np.linalg.qr(G.conj().T)
        if np.min(np.abs(np.diagonal(R))) > 1e-12:
            return PilotMatrix(np.sqrt(rho) * Q.conj().T, rho, f"random({seed})")


def write_codebook(codebook: PilotCodebook, sink: Union[str, BinaryIO]):
    """Serialize entries in component order; power is implicit in the rows."""
    if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
        with open(sink, "wb") as fh:
            write_codebook(codebook, fh)
        return
    first = codebook[0]
    for entry in codebook.entries:
        if entry.matrix.shape != first.matrix.shape:
            raise ConfigError("codebook entries must share one shape")
    sink.write(CODEBOOK_MAGIC)
    sink.write(struct.pack("<III", codebook.K, first.n_p, first.n_tx))
    for entry in codebook.entries:
        sink.write(entry.matrix.astype("<c16").tobytes())


def read_codebook(source: Union[str, BinaryIO]) -> PilotCodebook:
    """Read a codebook; rho is recovered from the stored row powers."""
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            return read_codebook(fh)
    if source.read(len(CODEBOOK_MAGIC)) != CODEBOOK_MAGIC:
        raise FormatError("bad codebook magic")
    header = source.read(12)
    if len(header) != 12:
        raise FormatError("codebook file truncated")
    K, n_p, n_tx = struct.unpack("<III", header)
    payload = source.read(K * n_p * n_tx * 16)
    if len(payload) != K * n_p * n_tx * 16:
        raise FormatError("codebook file truncated")
    mats = np.frombuffer(payload, dtype="<c16").astype(complex)
    mats = mats.reshape(K, n_p, n_tx)
    rho = float(np.mean(np.diagonal(mats[0] @ mats[0].conj().T).real))
    try:
        entries = tuple(PilotMatrix(mats[k], rho, f"codebook({k})")
                        for k in range(K))
    except ConfigError as exc:
        raise FormatError(f"stored pilot is not sub-unitary: {exc}") from exc
    return PilotCodebook(entries)
