"""Feedback-loop protocol and benchmark engine tests."""

import io

import numpy as np
import pytest

from fddlab.channel_model import (ClusterParams, DatasetConfig, UlaGeometry,
                                  _coloring_factor, complex_normal,
                                  generate_samples, substream,
                                  synth_covariance)
from fddlab.errors import ConfigError
from fddlab.estimators import DictionaryConfig
from fddlab.fdd_protocol import (BenchmarkConfig, BsState, EpisodeBank,
                                 MtState, NmseRecord, ProtocolConfig,
                                 SchemeSpec, build_episode_bank,
                                 read_records_csv, run_benchmark, run_episode,
                                 sigma2_from_snr, write_records_csv,
                                 CSV_COLUMNS)
from fddlab.gmm_core import FitConfig, GmmModel, fit_em
from fddlab.pilot_design import build_codebook, dft_pilot

N_TX = 8
N_P = 2


def synthetic_model(angles, n_tx=N_TX, sigma_as=np.deg2rad(2.0)):
    """Equal-weight mixture of single-cluster covariances at given angles."""
    covs = np.stack([synth_covariance(UlaGeometry(n_tx), a, sigma_as).matrix
                     for a in angles])
    K = len(angles)
    return GmmModel(weights=np.full(K, 1.0 / K), covariances=covs,
                    n_tx=n_tx, n_rx=1)


@pytest.fixture(scope="module")
def miso_model():
    ds = generate_samples(DatasetConfig(n_samples=2000, tx=UlaGeometry(N_TX),
                                        rx=UlaGeometry(1), seed=3))
    return fit_em(ds, K=4, config=FitConfig(max_iters=30, seed=1))


@pytest.fixture(scope="module")
def miso_codebook(miso_model):
    return build_codebook(miso_model, n_p=N_P)


def make_config(model, codebook, schemes, J=50, snr_db=10.0, T=3,
                eval_block=2, seed=7, **kwargs):
    proto = ProtocolConfig(T=T, eval_block=eval_block, snr_db=snr_db,
                           n_p=N_P, seed=seed)
    return BenchmarkConfig(model=model, protocol=proto, schemes=schemes,
                           J=J, codebook=codebook, **kwargs)


class TestConfigs:
    def test_snr_grid_scalar_and_list(self):
        assert ProtocolConfig(snr_db=10).snr_grid == (10.0,)
        assert ProtocolConfig(snr_db=[0, 10, 20]).snr_grid == (0.0, 10.0, 20.0)

    def test_eval_block_bounds(self):
        with pytest.raises(ConfigError):
            ProtocolConfig(T=5, eval_block=6)
        with pytest.raises(ConfigError):
            ProtocolConfig(T=5, eval_block=-1)
        ProtocolConfig(T=5, eval_block=0)
        ProtocolConfig(T=5, eval_block=5)

    def test_sigma2_from_snr(self):
        assert abs(sigma2_from_snr(10.0) - 0.1) < 1e-15
        assert abs(sigma2_from_snr(10.0, rho=2.0) - 0.2) < 1e-15
        assert abs(sigma2_from_snr(0.0) - 1.0) < 1e-15

    def test_scheme_spec_validation(self):
        with pytest.raises(ConfigError):
            SchemeSpec("kalman", "dft")
        with pytest.raises(ConfigError):
            SchemeSpec("gmm", "hadamard")

    def test_negative_nmse_rejected(self):
        with pytest.raises(ConfigError):
            NmseRecord(t=0, snr_db=0.0, estimator_id="gmm",
                       pilot_scheme_id="dft", n_p=2, K=4, nmse=-0.1,
                       n_eval=10, seed=0)

    def test_benchmark_config_validation(self, miso_model, miso_codebook):
        with pytest.raises(ConfigError):
            make_config(miso_model, miso_codebook, ())
        with pytest.raises(ConfigError):
            make_config(miso_model, None, (SchemeSpec("gmm", "gmm"),))
        with pytest.raises(ConfigError):
            make_config(miso_model, miso_codebook,
                        (SchemeSpec("slmmse", "dft"),))
        bad_np = ProtocolConfig(n_p=N_TX + 1)
        with pytest.raises(ConfigError):
            BenchmarkConfig(model=miso_model, protocol=bad_np,
                            schemes=(SchemeSpec("gmm", "dft"),))


class TestRunEpisode:
    def run_one(self, model, codebook, T=4, seed=0, snr_db=10.0):
        bs = BsState(codebook=codebook, dft=dft_pilot(model.n_tx, N_P))
        mt = MtState(model=model)
        proto = ProtocolConfig(T=T, eval_block=min(2, T), snr_db=snr_db,
                               n_p=N_P, seed=seed)
        rng = substream(seed, 0, 0)
        scenario = ClusterParams(aod=np.array([0.3]), aoa=np.array([0.0]))
        return run_episode(scenario, bs, mt, proto, rng)

    def test_record_count_is_T_plus_one(self, miso_model, miso_codebook):
        records = self.run_one(miso_model, miso_codebook, T=4)
        assert len(records) == 5
        assert [r["t"] for r in records] == [0, 1, 2, 3, 4]

    def test_first_block_uses_dft_pilot(self, miso_model, miso_codebook):
        records = self.run_one(miso_model, miso_codebook)
        assert records[0]["pilot_provenance"] == "dft"
        for r in records[1:]:
            assert r["pilot_provenance"].startswith("codebook")

    def test_single_component_pins_pilot_and_feedback(self):
        model = synthetic_model([0.4][:1])
        codebook = build_codebook(model, n_p=N_P)
        records = self.run_one(model, codebook, T=3)
        # K=1: the only possible feedback is 0 at zero bit cost, and the
        # adapted pilot never changes
        assert all(r["feedback"] == 0 for r in records)
        assert all(r["bits"] == 0 for r in records)
        keys = {r["pilot_key"] for r in records[1:]}
        assert keys == {codebook[0].cache_key}

    def test_bit_budget_is_log2_K(self):
        model = synthetic_model(np.linspace(-1.0, 1.0, 8))
        codebook = build_codebook(model, n_p=N_P)
        records = self.run_one(model, codebook, T=2)
        assert all(r["bits"] == 3 for r in records)
        assert all(0 <= r["feedback"] < 8 for r in records)

    def test_causality_by_truncated_replay(self, miso_model, miso_codebook):
        # the first blocks of a long run must be reproduced exactly by a
        # shorter run over the same draws: block t sees only past feedback
        N = miso_model.dim
        rng = substream(11, 0, 0)
        cov = synth_covariance(UlaGeometry(N_TX), 0.2, np.deg2rad(10)).matrix
        F = _coloring_factor(cov)
        channels = complex_normal(rng, (7, N)) @ F.T
        noise = complex_normal(rng, (7, N_P))
        scenario = ClusterParams(aod=np.array([0.2]), aoa=np.array([0.0]))

        def replay(T):
            bs = BsState(codebook=miso_codebook, dft=dft_pilot(N_TX, N_P))
            mt = MtState(model=miso_model)
            proto = ProtocolConfig(T=T, eval_block=0, snr_db=10.0, n_p=N_P)
            return run_episode(scenario, bs, mt, proto, substream(0, 0),
                               channels=channels[:T + 1],
                               unit_noise=noise[:T + 1])

        long_run, short_run = replay(6), replay(3)
        for a, b in zip(short_run, long_run[:4]):
            assert a["pilot_key"] == b["pilot_key"]
            assert a["feedback"] == b["feedback"]
            assert a["sq_err"] == b["sq_err"]

    def test_matched_model_improves_after_feedback(self):
        # near-noiseless, channels drawn from one model component: adapted
        # pilots must not lose to the generic DFT opener in expectation
        model = synthetic_model([-0.6, 0.8])
        codebook = build_codebook(model, n_p=N_P)
        F = _coloring_factor(model.covariances[0])
        proto = ProtocolConfig(T=1, eval_block=1, snr_db=80.0, n_p=N_P)
        scenario = ClusterParams(aod=np.array([-0.6]), aoa=np.array([0.0]))
        rng = substream(42, 5)
        err0, err1 = [], []
        for _ in range(500):
            channels = complex_normal(rng, (2, N_TX)) @ F.T
            noise = complex_normal(rng, (2, N_P))
            bs = BsState(codebook=codebook, dft=dft_pilot(N_TX, N_P))
            mt = MtState(model=model)
            recs = run_episode(scenario, bs, mt, proto, rng,
                               channels=channels, unit_noise=noise)
            err0.append(recs[0]["sq_err"])
            err1.append(recs[1]["sq_err"])
        assert np.mean(err1) <= np.mean(err0)

    def test_draws_own_randomness_when_not_supplied(self, miso_model,
                                                    miso_codebook):
        a = self.run_one(miso_model, miso_codebook, seed=5)
        b = self.run_one(miso_model, miso_codebook, seed=5)
        assert all(x["sq_err"] == y["sq_err"] for x, y in zip(a, b))


class TestEpisodeBank:
    def test_shapes(self, miso_model, miso_codebook):
        cfg = make_config(miso_model, miso_codebook,
                          (SchemeSpec("gmm", "gmm"),), J=10, T=3)
        bank = build_episode_bank(cfg)
        assert bank.channels.shape == (10, 4, N_TX)
        assert bank.unit_noise.shape == (10, 4, N_P)
        assert bank.cov_tx.shape == (10, N_TX, N_TX)
        assert bank.genie_pilots is None and bank.rnd_pilots is None

    def test_common_randomness_across_scheme_grids(self, miso_model,
                                                   miso_codebook):
        # the draws depend only on (seed, J, T); the scheme mix must not
        # perturb them, else scheme deltas lose their pairing
        cfg_a = make_config(miso_model, miso_codebook,
                            (SchemeSpec("gmm", "gmm"),), J=8)
        cfg_b = make_config(miso_model, miso_codebook,
                            (SchemeSpec("glmmse", "genie"),
                             SchemeSpec("omp", "rnd")), J=8)
        bank_a, bank_b = build_episode_bank(cfg_a), build_episode_bank(cfg_b)
        assert np.array_equal(bank_a.channels, bank_b.channels)
        assert np.array_equal(bank_a.unit_noise, bank_b.unit_noise)
        assert bank_b.genie_pilots is not None
        assert bank_b.rnd_pilots is not None

    def test_per_episode_pilots_deterministic(self, miso_model,
                                              miso_codebook):
        cfg = make_config(miso_model, miso_codebook,
                          (SchemeSpec("gmm", "rnd"),
                           SchemeSpec("glmmse", "genie")), J=6)
        p1, p2 = build_episode_bank(cfg), build_episode_bank(cfg)
        for a, b in zip(p1.rnd_pilots, p2.rnd_pilots):
            assert np.array_equal(a.matrix, b.matrix)
        for a, b in zip(p1.genie_pilots, p2.genie_pilots):
            assert np.array_equal(a.matrix, b.matrix)
        assert p1.genie_pilots[0].provenance == "genie"
        # distinct episodes get distinct random pilots
        assert not np.allclose(p1.rnd_pilots[0].matrix,
                               p1.rnd_pilots[1].matrix)


@pytest.fixture(scope="module")
def result(miso_model, miso_codebook):
    cfg = make_config(
        miso_model, miso_codebook,
        (SchemeSpec("gmm", "gmm"), SchemeSpec("glmmse", "genie"),
         SchemeSpec("oracle", "dft"), SchemeSpec("zero", "dft")),
        J=200, snr_db=[0.0, 10.0], T=2, eval_block=2)
    return run_benchmark(cfg)


class TestRunBenchmark:
    def test_record_count(self, result):
        # 4 schemes x 2 SNRs x (T+1) blocks
        assert len(result.records) == 4 * 2 * 3

    def test_oracle_nmse_is_zero(self, result):
        for snr in (0.0, 10.0):
            for t in range(3):
                assert result.nmse("oracle", "dft", snr, t) == 0.0

    def test_zero_estimate_nmse_is_one(self, result):
        # channel energy per episode has mean N by construction
        N = N_TX
        for snr in (0.0, 10.0):
            err = result.errors[("zero", "dft", snr)]
            for t in range(3):
                nmse = err[:, t].mean() / N
                se = err[:, t].std(ddof=1) / N / np.sqrt(len(err))
                assert abs(nmse - 1.0) <= 2 * se

    def test_genie_beats_gmm_paired(self, result):
        for snr in (0.0, 10.0):
            gmm = result.errors[("gmm", "gmm", snr)]
            genie = result.errors[("glmmse", "genie", snr)]
            for t in range(3):
                d = gmm[:, t] - genie[:, t]
                se = d.std(ddof=1) / np.sqrt(len(d))
                assert d.mean() >= -2 * se, (snr, t)

    def test_adaptation_does_not_hurt(self, result):
        # paired over episodes: one feedback round at 10 dB should not
        # increase the error
        err = result.errors[("gmm", "gmm", 10.0)]
        d = err[:, 0] - err[:, 1]
        se = d.std(ddof=1) / np.sqrt(len(d))
        assert d.mean() >= -2 * se

    def test_nmse_accessor_matches_records(self, result):
        for r in result.records:
            v = result.nmse(r.estimator_id, r.pilot_scheme_id, r.snr_db, r.t)
            assert v == r.nmse

    def test_matches_sequential_replay(self, miso_model, miso_codebook):
        cfg = make_config(miso_model, miso_codebook,
                          (SchemeSpec("gmm", "gmm"),), J=30,
                          snr_db=[0.0, 10.0], T=3, seed=13)
        res = run_benchmark(cfg)
        bank = build_episode_bank(cfg)
        scenario = ClusterParams(aod=np.array([0.0]), aoa=np.array([0.0]))
        for snr in (0.0, 10.0):
            err = res.errors[("gmm", "gmm", snr)]
            for j in (0, 7, 17):
                bs = BsState(codebook=miso_codebook,
                             dft=dft_pilot(N_TX, N_P))
                mt = MtState(model=miso_model)
                proto = ProtocolConfig(T=3, eval_block=2, snr_db=snr,
                                       n_p=N_P, seed=13)
                recs = run_episode(scenario, bs, mt, proto,
                                   substream(13, j, 0), snr_db=snr,
                                   channels=bank.channels[j],
                                   unit_noise=bank.unit_noise[j])
                seq = np.array([r["sq_err"] for r in recs])
                assert np.allclose(seq, err[j], rtol=0, atol=1e-9)

    def test_thread_count_does_not_change_results(self, miso_model,
                                                  miso_codebook):
        schemes = (SchemeSpec("gmm", "gmm"), SchemeSpec("gmm", "dft"))
        cfg1 = make_config(miso_model, miso_codebook, schemes, J=20,
                           snr_db=[0.0, 10.0], threads=1)
        cfg4 = make_config(miso_model, miso_codebook, schemes, J=20,
                           snr_db=[0.0, 10.0], threads=4)
        r1, r4 = run_benchmark(cfg1), run_benchmark(cfg4)
        assert r1.records == r4.records
        for key in r1.errors:
            assert np.array_equal(r1.errors[key], r4.errors[key])

    def test_scheme_grid_does_not_change_a_cell(self, miso_model,
                                                miso_codebook):
        alone = make_config(miso_model, miso_codebook,
                            (SchemeSpec("gmm", "dft"),), J=15)
        mixed = make_config(miso_model, miso_codebook,
                            (SchemeSpec("gmm", "gmm"),
                             SchemeSpec("gmm", "dft"),
                             SchemeSpec("zero", "dft")), J=15)
        ra, rm = run_benchmark(alone), run_benchmark(mixed)
        assert np.array_equal(ra.errors[("gmm", "dft", 10.0)],
                              rm.errors[("gmm", "dft", 10.0)])

    def test_all_estimators_run_under_all_pilot_policies(self, miso_model,
                                                         miso_codebook):
        N = N_TX
        sample_cov = np.eye(N, dtype=complex)
        schemes = tuple(SchemeSpec(e, p)
                        for e in ("gmm", "glmmse", "slmmse", "omp")
                        for p in ("gmm", "dft", "rnd", "genie"))
        cfg = make_config(miso_model, miso_codebook, schemes, J=5, T=1,
                          eval_block=1, sample_cov=sample_cov,
                          dictionary=DictionaryConfig(sparsity_mode="genie"))
        res = run_benchmark(cfg)
        for s in schemes:
            v = res.nmse(s.estimator_id, s.pilot_scheme_id, 10.0)
            assert np.isfinite(v) and v >= 0.0


class TestCsv:
    def make_records(self):
        return [NmseRecord(t=t, snr_db=10.0, estimator_id="gmm",
                           pilot_scheme_id="dft", n_p=2, K=4,
                           nmse=0.1 * (t + 1) / 3.0, n_eval=7, seed=1)
                for t in range(3)]

    def test_stream_roundtrip_is_exact(self):
        records = self.make_records()
        buf = io.StringIO()
        write_records_csv(records, buf)
        back = read_records_csv(io.StringIO(buf.getvalue()))
        assert back == records

    def test_file_roundtrip(self, tmp_path):
        records = self.make_records()
        path = tmp_path / "results.csv"
        write_records_csv(records, path)
        header = path.read_text().splitlines()[0]
        assert tuple(header.split(",")) == CSV_COLUMNS
        assert read_records_csv(path) == records

    def test_bad_header_rejected(self):
        with pytest.raises(ConfigError):
            read_records_csv(io.StringIO("a,b,c\n1,2,3\n"))
