"""GMM-based pilot design and downlink channel estimation for FDD-MIMO."""

from .channel_model import (ClusterParams, Dataset, DatasetConfig,
                            QuadratureConfig, SpatialCovariance, UlaGeometry,
                            complex_normal, draw_scenario, generate_dataset,
                            generate_samples, kron_covariance, read_dataset,
                            sample_channel, scenario_covariances,
                            steering_vector, substream, synth_covariance,
                            unvec, vec, write_dataset)
from .errors import (ConfigError, FddlabError, FormatError, NumericError,
                     UnsupportedModelError)
from .estimators import (DictionaryConfig, Estimate, Observation,
                         batch_gmm_estimate, genie_lmmse, gmm_estimate,
                         lmmse_filter, omp_estimate, sample_cov_lmmse,
                         sample_covariance, sensing_matrix,
                         simulate_observation)
from .fdd_protocol import (BenchmarkConfig, BenchmarkResult, BsState,
                           EpisodeBank, MtState, NmseRecord, ProtocolConfig,
                           SchemeSpec, build_episode_bank, read_records_csv,
                           run_benchmark, run_episode, sigma2_from_snr,
                           write_records_csv)
from .gmm_core import (FeedbackIndex, FitConfig, GmmModel, ObservationGmm,
                       Responsibilities, fit_em, fit_kronecker, load_model,
                       map_feedback, observation_model,
                       responsibilities_channel, responsibilities_observation,
                       save_model)
from .pilot_design import (PilotCodebook, PilotMatrix, build_codebook,
                           dft_pilot, genie_pilot, random_pilot,
                           read_codebook, write_codebook)

__version__ = "0.1.0"
