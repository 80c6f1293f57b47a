"""Tests for ULA steering, covariance synthesis, sampling, and dataset I/O."""

import io

import numpy as np
import pytest

from fddlab import channel_model as cm
from fddlab.errors import ConfigError, FormatError, NumericError

DEG = np.pi / 180.0


def crandn(rng, *shape):
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2)


def random_psd(rng, n):
    B = crandn(rng, n, n)
    return B @ B.conj().T


def trapezoid_oracle(n_ant, center, sigma, n_nodes):
    """Independent dense-grid reference for the covariance integral."""
    theta = np.linspace(-np.pi, np.pi, n_nodes)
    b = sigma / np.sqrt(2)
    g = np.exp(-np.abs(theta - center) / b)
    w = np.full(n_nodes, theta[1] - theta[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    m = np.arange(n_ant)
    A = np.exp(1j * np.pi * np.outer(m, np.sin(theta)))
    C = (A * (w * g)) @ A.conj().T / (w @ g)
    C = 0.5 * (C + C.conj().T)
    return C * (n_ant / np.real(np.trace(C)))


class TestSteeringVector:
    def test_broadside_is_all_ones(self):
        a = cm.steering_vector(cm.UlaGeometry(4), 0.0)
        np.testing.assert_allclose(a, np.ones(4), atol=1e-15)

    def test_endfire_two_elements(self):
        a = cm.steering_vector(cm.UlaGeometry(2), np.pi / 2)
        np.testing.assert_allclose(a, [1.0, -1.0], atol=1e-12)

    def test_thirty_degrees_two_elements(self):
        a = cm.steering_vector(cm.UlaGeometry(2), np.pi / 6)
        np.testing.assert_allclose(a, [1.0, 1j], atol=1e-12)

    def test_angle_outside_domain_rejected(self):
        with pytest.raises(ValueError):
            cm.steering_vector(cm.UlaGeometry(4), 2.0)

    def test_entries_have_unit_modulus(self):
        rng = np.random.default_rng(7)
        for theta in rng.uniform(-np.pi / 2, np.pi / 2, 20):
            a = cm.steering_vector(cm.UlaGeometry(9), theta)
            np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)

    def test_first_entry_is_one(self):
        a = cm.steering_vector(cm.UlaGeometry(5), -0.3)
        assert a[0] == 1.0 + 0j


class TestSynthCovariance:
    def test_matches_dense_trapezoid_oracle(self):
        # 100x the default node budget
        oracle = trapezoid_oracle(2, 0.0, 2 * DEG, 72000)
        got = cm.synth_covariance(cm.UlaGeometry(2), 0.0, 2 * DEG).matrix
        assert np.max(np.abs(got - oracle)) <= 1e-6

    def test_vanishing_spread_collapses_to_rank_one(self):
        theta = 0.4
        C = cm.synth_covariance(cm.UlaGeometry(8), theta, 1e-6).matrix
        evals = np.linalg.eigvalsh(C)
        assert evals[-2] / evals[-1] <= 1e-4
        a = cm.steering_vector(cm.UlaGeometry(8), theta)
        np.testing.assert_allclose(C, np.outer(a, a.conj()), atol=1e-4)

    def test_trace_equals_antenna_count(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            n = int(rng.integers(1, 32))
            theta = rng.uniform(-np.pi / 2, np.pi / 2)
            sigma = rng.uniform(0.5, 40.0) * DEG
            C = cm.synth_covariance(cm.UlaGeometry(n), theta, sigma).matrix
            assert abs(np.real(np.trace(C)) - n) <= 1e-8

    def test_hermitian_psd_over_random_inputs(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            n = int(rng.integers(2, 24))
            theta = rng.uniform(-np.pi / 2, np.pi / 2)
            sigma = rng.uniform(0.2, 60.0) * DEG
            C = cm.synth_covariance(cm.UlaGeometry(n), theta, sigma).matrix
            assert np.max(np.abs(C - C.conj().T)) <= 1e-12
            assert np.linalg.eigvalsh(C)[0] >= -1e-10 * n / n

    def test_doubling_nodes_is_stable(self):
        for sigma in (2 * DEG, 35 * DEG):
            base = cm.synth_covariance(cm.UlaGeometry(16), 0.7, sigma,
                                       cm.QuadratureConfig(720)).matrix
            fine = cm.synth_covariance(cm.UlaGeometry(16), 0.7, sigma,
                                       cm.QuadratureConfig(1440)).matrix
            assert np.max(np.abs(base - fine)) < 1e-6

    def test_nonpositive_spread_rejected(self):
        with pytest.raises(ValueError):
            cm.synth_covariance(cm.UlaGeometry(4), 0.0, 0.0)

    def test_too_few_nodes_rejected(self):
        with pytest.raises(ConfigError):
            cm.QuadratureConfig(1)


class TestKronCovariance:
    def test_identity_pair(self):
        tx = cm.SpatialCovariance("tx", np.eye(2, dtype=complex))
        rx = cm.SpatialCovariance("rx", np.eye(3, dtype=complex))
        np.testing.assert_array_equal(cm.kron_covariance(tx, rx), np.eye(6))

    def test_single_rx_antenna_degenerates_to_tx(self):
        rng = np.random.default_rng(0)
        M = random_psd(rng, 4)
        tx = cm.SpatialCovariance("tx", M)
        rx = cm.SpatialCovariance("rx", np.eye(1, dtype=complex))
        np.testing.assert_allclose(cm.kron_covariance(tx, rx), M, atol=0)

    def test_against_elementwise_definition(self):
        rng = np.random.default_rng(1)
        A = random_psd(rng, 3)
        B = random_psd(rng, 2)
        got = cm.kron_covariance(cm.SpatialCovariance("tx", A),
                                 cm.SpatialCovariance("rx", B))
        expect = np.zeros((6, 6), dtype=complex)
        for i in range(3):
            for j in range(3):
                for p in range(2):
                    for q in range(2):
                        expect[i * 2 + p, j * 2 + q] = A[i, j] * B[p, q]
        np.testing.assert_allclose(got, expect, atol=0)

    def test_side_mismatch_rejected(self):
        c = cm.SpatialCovariance("tx", np.eye(2, dtype=complex))
        with pytest.raises(ValueError):
            cm.kron_covariance(c, c)


class TestVecConvention:
    def test_vec_identity_with_pilot_matrix(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            H = crandn(rng, 3, 5)
            P = crandn(rng, 2, 5)
            lhs = cm.vec(H @ P.T)
            rhs = np.kron(P, np.eye(3)) @ cm.vec(H)
            assert np.max(np.abs(lhs - rhs)) <= 1e-12

    def test_unvec_inverts_vec(self):
        rng = np.random.default_rng(6)
        H = crandn(rng, 4, 3)
        np.testing.assert_array_equal(cm.unvec(cm.vec(H), 3, 4), H)


class TestDrawScenario:
    def test_reproducible_and_distinct(self):
        a = cm.draw_scenario(np.random.default_rng(42))
        b = cm.draw_scenario(np.random.default_rng(42))
        c = cm.draw_scenario(np.random.default_rng(43))
        assert np.array_equal(a.aod, b.aod) and np.array_equal(a.aoa, b.aoa)
        assert not np.array_equal(a.aod, c.aod)

    def test_uniform_mean(self):
        rng = np.random.default_rng(0)
        aods = np.array([cm.draw_scenario(rng).aod[0] for _ in range(10_000)])
        se = (np.pi / np.sqrt(12)) / 100.0
        assert abs(aods.mean()) <= 3 * se

    def test_spreads_are_configured_constants(self):
        s = cm.draw_scenario(np.random.default_rng(1), sigma_as_tx=0.1, sigma_as_rx=0.2)
        assert s.sigma_as_tx == 0.1 and s.sigma_as_rx == 0.2
        d = cm.draw_scenario(np.random.default_rng(1))
        assert d.sigma_as_tx == cm.DEFAULT_SIGMA_AS_TX
        assert d.sigma_as_rx == cm.DEFAULT_SIGMA_AS_RX


class TestSampleChannel:
    def test_zero_covariance_gives_zero_vector(self):
        s = cm.sample_channel(np.zeros((4, 4)), np.random.default_rng(0))
        np.testing.assert_array_equal(s.h, np.zeros(4))

    def test_identity_covariance_moments(self):
        rng = np.random.default_rng(2)
        N = 4
        hs = np.array([cm.sample_channel(np.eye(N), rng).h for _ in range(10_000)])
        S = hs.T @ hs.conj() / len(hs)
        assert np.linalg.norm(S - np.eye(N), "fro") <= 0.1 * N

    def test_energy_matches_trace(self):
        rng = np.random.default_rng(3)
        C = random_psd(rng, 5)
        hs = np.array([cm.sample_channel(C, rng).h for _ in range(10_000)])
        mean_energy = np.mean(np.sum(np.abs(hs) ** 2, axis=1))
        assert abs(mean_energy - np.real(np.trace(C))) <= 0.05 * np.real(np.trace(C))

    def test_indefinite_covariance_rejected(self):
        C = np.diag([1.0, -0.5])
        with pytest.raises(NumericError):
            cm.sample_channel(C, np.random.default_rng(0))


class TestDataset:
    def cfg(self, L=3, n_tx=2, n_rx=1, seed=9):
        return cm.DatasetConfig(n_samples=L, tx=cm.UlaGeometry(n_tx),
                                rx=cm.UlaGeometry(n_rx), seed=seed)

    def test_file_size_is_header_plus_payload(self):
        buf = io.BytesIO()
        cm.generate_dataset(self.cfg(), buf)
        assert len(buf.getvalue()) == 8 + 4 + 4 + 8 + 3 * 2 * 16

    def test_roundtrip_bit_identical(self):
        ds = cm.generate_samples(self.cfg(L=50, n_tx=3, n_rx=2))
        buf = io.BytesIO()
        cm.write_dataset(ds, buf)
        buf.seek(0)
        back = cm.read_dataset(buf)
        assert back.n_tx == 3 and back.n_rx == 2
        np.testing.assert_array_equal(back.samples, ds.samples)

    def test_mean_energy_normalized(self):
        ds = cm.generate_samples(self.cfg(L=257, n_tx=4, n_rx=2))
        energy = np.mean(np.sum(np.abs(ds.samples) ** 2, axis=1))
        assert abs(energy - 8.0) <= 1e-12

    def test_same_seed_same_bytes(self):
        b1, b2 = io.BytesIO(), io.BytesIO()
        cm.generate_dataset(self.cfg(L=40, seed=5), b1)
        cm.generate_dataset(self.cfg(L=40, seed=5), b2)
        assert b1.getvalue() == b2.getvalue()

    def test_truncated_file_rejected(self):
        buf = io.BytesIO()
        cm.generate_dataset(self.cfg(), buf)
        with pytest.raises(FormatError):
            cm.read_dataset(io.BytesIO(buf.getvalue()[:-8]))

    def test_bad_magic_rejected(self):
        with pytest.raises(FormatError):
            cm.read_dataset(io.BytesIO(b"NOTMAGIC" + b"\0" * 64))

    def test_sample_second_moment_matches_kron_model(self):
        # draws from the generator must follow kron(Ctx, Crx)
        params = cm.ClusterParams(aod=[0.5], aoa=[-0.2])
        tx, rx = cm.scenario_covariances(cm.UlaGeometry(3), cm.UlaGeometry(2), params)
        C = cm.kron_covariance(tx, rx)
        rng = np.random.default_rng(8)
        hs = np.array([cm.sample_channel(C, rng).h for _ in range(20_000)])
        S = hs.T @ hs.conj() / len(hs)
        assert np.linalg.norm(S - C, "fro") <= 0.1 * 6
