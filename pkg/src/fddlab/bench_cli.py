"""Command-line front end: dataset generation, fitting, codebooks, sweeps.

The four presets reproduce the benchmark figures at desk scale; every
stage writes its artifacts into --out-dir and validates the upstream
files before doing any work, so a missing stage fails with the command
that produces it.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .channel_model import DatasetConfig, UlaGeometry, generate_dataset, read_dataset
from .errors import ConfigError, FddlabError
from .estimators import DictionaryConfig, sample_covariance
from .fdd_protocol import (BenchmarkConfig, BenchmarkResult, NmseRecord,
                           ProtocolConfig, SchemeSpec, resolve_threads,
                           run_benchmark, write_records_csv)
from .gmm_core import FitConfig, fit_em, fit_kronecker, load_model, save_model
from .pilot_design import build_codebook, read_codebook, write_codebook

PAPER_TRAIN_SIZE = 100_000
PAPER_EPISODES = 10_000
DESK_TRAIN_SIZE = 20_000
DESK_EPISODES = 2_000
DESK_EVAL_SIZE = 4_000

SIDECAR_NAME = "results.json"
CSV_NAME = "results.csv"


@dataclass(frozen=True)
class Preset:
    n_tx: int
    n_rx: int
    k_pairs: Tuple[Tuple[int, int], ...]   # (K_tx, K_rx) per fitted model
    n_p_list: Tuple[int, ...]
    snr_list: Tuple[float, ...]
    T: int
    eval_block: int
    schemes: Tuple[Tuple[str, str], ...]


PRESETS = {
    # paper scale uses K_tx = 32; halved here to keep the desk run fast
    "fig1_mimo_16x4": Preset(
        n_tx=16, n_rx=4, k_pairs=((16, 4),), n_p_list=(4,),
        snr_list=tuple(float(s) for s in range(-10, 31, 5)),
        T=10, eval_block=5,
        schemes=(("gmm", "gmm"), ("gmm", "dft"), ("gmm", "rnd"),
                 ("glmmse", "genie"), ("slmmse", "dft"), ("omp", "dft"))),
    "fig2_blocks": Preset(
        n_tx=16, n_rx=4, k_pairs=((16, 4),), n_p_list=(4,),
        snr_list=(0.0, 10.0, 20.0), T=10, eval_block=5,
        schemes=(("gmm", "gmm"), ("glmmse", "genie"))),
    "fig3_miso_64": Preset(
        n_tx=64, n_rx=1, k_pairs=((64, 1),), n_p_list=(16, 32, 48),
        snr_list=(15.0,), T=5, eval_block=5,
        schemes=(("gmm", "gmm"), ("gmm", "rnd"), ("gmm", "dft"))),
    "fig4_k_sweep": Preset(
        n_tx=64, n_rx=1,
        k_pairs=tuple((2 ** b, 1) for b in range(7)), n_p_list=(16,),
        snr_list=(0.0, 10.0, 20.0), T=5, eval_block=5,
        schemes=(("gmm", "gmm"),)),
}


@dataclass(frozen=True)
class ExperimentSpec:
    """A preset with every override resolved; shared by all subcommands."""

    preset: str
    out_dir: Path
    n_tx: int
    n_rx: int
    k_pairs: Tuple[Tuple[int, int], ...]
    n_p_list: Tuple[int, ...]
    snr_list: Tuple[float, ...]
    T: int
    eval_block: int
    train_size: int = DESK_TRAIN_SIZE
    eval_size: int = DESK_EVAL_SIZE
    episodes: int = DESK_EPISODES
    seed: int = 0
    force: bool = False
    schemes: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        if any(n_p > self.n_tx for n_p in self.n_p_list):
            raise ConfigError("n_p cannot exceed N_tx")
        if min(self.train_size, self.eval_size, self.episodes) < 1:
            raise ConfigError("sizes must be positive")

    @property
    def train_path(self) -> Path:
        return self.out_dir / "train.dat"

    @property
    def eval_path(self) -> Path:
        return self.out_dir / "eval.dat"

    def model_path(self, K: int) -> Path:
        return self.out_dir / f"model_K{K}.mdl"

    def codebook_path(self, K: int, n_p: int) -> Path:
        return self.out_dir / f"codebook_K{K}_np{n_p}.pcb"


def resolve_spec(args: argparse.Namespace) -> ExperimentSpec:
    preset = PRESETS.get(args.preset)
    if preset is None:
        raise ConfigError(f"unknown preset '{args.preset}'; choose from "
                          + ", ".join(sorted(PRESETS)))
    k_pairs = preset.k_pairs
    if args.ktx is not None or args.krx is not None:
        ktx = args.ktx if args.ktx is not None else preset.k_pairs[-1][0]
        krx = args.krx if args.krx is not None else preset.k_pairs[-1][1]
        k_pairs = ((ktx, krx),)
    T = preset.T if args.blocks is None else args.blocks
    return ExperimentSpec(
        preset=args.preset,
        out_dir=Path(args.out_dir),
        n_tx=preset.n_tx,
        n_rx=preset.n_rx,
        k_pairs=k_pairs,
        n_p_list=tuple(args.np) if args.np else preset.n_p_list,
        snr_list=tuple(args.snr_db) if args.snr_db else preset.snr_list,
        T=T,
        eval_block=min(preset.eval_block, T),
        train_size=args.train_size or DESK_TRAIN_SIZE,
        eval_size=args.eval_size or DESK_EVAL_SIZE,
        episodes=args.episodes or DESK_EPISODES,
        seed=args.seed,
        force=args.force,
        schemes=preset.schemes)


def _refuse_existing(path: Path, force: bool):
    if path.exists() and not force:
        raise ConfigError(f"{path} exists; pass --force to overwrite")


def _require(path: Path, stage: str, spec: ExperimentSpec):
    if not path.exists():
        raise ConfigError(
            f"missing {path}: run `fddlab {stage} --preset {spec.preset} "
            f"--out-dir {spec.out_dir}` first")


def _print_scale_note(spec: ExperimentSpec):
    if spec.train_size < PAPER_TRAIN_SIZE or spec.episodes < PAPER_EPISODES:
        print(f"note: desk scale (L={spec.train_size}, J={spec.episodes}); "
              f"paper scale is L={PAPER_TRAIN_SIZE}, J={PAPER_EPISODES}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_generate(spec: ExperimentSpec) -> int:
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    _print_scale_note(spec)
    jobs = ((spec.train_path, spec.train_size, spec.seed),
            (spec.eval_path, spec.eval_size, spec.seed + 1))
    for path, size, seed in jobs:
        _refuse_existing(path, spec.force)
    for path, size, seed in jobs:
        cfg = DatasetConfig(n_samples=size, tx=UlaGeometry(spec.n_tx),
                            rx=UlaGeometry(spec.n_rx), seed=seed)
        header = generate_dataset(cfg, path)
        print(f"wrote {path}: {header.n_samples} samples of dim "
              f"{header.dim} (N_tx={header.n_tx}, N_rx={header.n_rx}, "
              f"seed={seed})")
    return 0


def cmd_fit(spec: ExperimentSpec) -> int:
    _require(spec.train_path, "generate", spec)
    dataset = read_dataset(spec.train_path)
    if (dataset.n_tx, dataset.n_rx) != (spec.n_tx, spec.n_rx):
        raise ConfigError(f"{spec.train_path} holds a "
                          f"{dataset.n_tx}x{dataset.n_rx} array layout, "
                          f"preset expects {spec.n_tx}x{spec.n_rx}")
    for ktx, krx in spec.k_pairs:
        K = ktx * krx
        path = spec.model_path(K)
        _refuse_existing(path, spec.force)
        config = FitConfig(seed=spec.seed)
        if spec.n_rx == 1:
            print(f"fitting K={K} full-covariance mixture "
                  f"on {dataset.samples.shape[0]} samples")
            model = fit_em(dataset, K, config)
        else:
            print(f"fitting factored mixture K={K} (K_tx={ktx}, K_rx={krx})")
            model = fit_kronecker(dataset, ktx, krx, config)
        trace = "factored fit, tx then rx side" if spec.n_rx > 1 else "fit"
        print(f"log-likelihood trace ({trace}):")
        for i, ll in enumerate(model.ll_history):
            print(f"  iter {i}: {ll:.6f}")
        save_model(model, path)
        print(f"wrote {path}: K={model.K} components, dim {model.dim}")
    return 0


def cmd_codebook(spec: ExperimentSpec) -> int:
    for ktx, krx in spec.k_pairs:
        K = ktx * krx
        model_path = spec.model_path(K)
        _require(model_path, "fit", spec)
        model = load_model(model_path)
        for n_p in spec.n_p_list:
            path = spec.codebook_path(K, n_p)
            _refuse_existing(path, spec.force)
            book = build_codebook(model, n_p)
            write_codebook(book, path)
            read_codebook(path)  # revalidates sub-unitarity on load
            print(f"wrote {path}: {book.K} pilots of shape "
                  f"{n_p}x{spec.n_tx}")
    return 0


def _sweep_runs(spec: ExperimentSpec) -> List[dict]:
    """One benchmark run per (model, n_p) pair, as sidecar-ready dicts."""
    runs = []
    for ktx, krx in spec.k_pairs:
        K = ktx * krx
        for n_p in spec.n_p_list:
            runs.append({
                "model": spec.model_path(K).name,
                "codebook": spec.codebook_path(K, n_p).name,
                "K": K, "n_p": n_p,
                "snr_db": list(spec.snr_list),
                "T": spec.T, "eval_block": spec.eval_block,
                "episodes": spec.episodes, "seed": spec.seed,
                "schemes": [list(s) for s in spec.schemes],
            })
    return runs


def run_from_sidecar(out_dir: Path, run: dict,
                     schemes: Optional[Sequence[Tuple[str, str]]] = None,
                     snr_db: Optional[Sequence[float]] = None,
                     ) -> BenchmarkResult:
    """Execute one sidecar run entry, optionally restricted to a sub-grid.

    Restricting schemes or SNRs does not perturb the per-episode draws, so
    any row of the full run is reproducible from the sidecar alone.
    """
    out_dir = Path(out_dir)
    model = load_model(out_dir / run["model"])
    scheme_list = [tuple(s) for s in (schemes or run["schemes"])]
    codebook = None
    if any(p == "gmm" for _, p in scheme_list):
        codebook = read_codebook(out_dir / run["codebook"])
    sample_cov = None
    if any(e == "slmmse" for e, _ in scheme_list):
        sample_cov = sample_covariance(read_dataset(out_dir / "train.dat"))
    protocol = ProtocolConfig(
        T=run["T"], eval_block=run["eval_block"],
        snr_db=list(snr_db) if snr_db is not None else run["snr_db"],
        n_p=run["n_p"], seed=run["seed"])
    cfg = BenchmarkConfig(
        model=model, protocol=protocol,
        schemes=tuple(SchemeSpec(e, p) for e, p in scheme_list),
        J=run["episodes"], codebook=codebook, sample_cov=sample_cov)
    return run_benchmark(cfg)


def cmd_sweep(spec: ExperimentSpec) -> int:
    csv_path = spec.out_dir / CSV_NAME
    sidecar_path = spec.out_dir / SIDECAR_NAME
    _refuse_existing(csv_path, spec.force)
    runs = _sweep_runs(spec)
    for run in runs:
        _require(spec.out_dir / run["model"], "fit", spec)
        if any(p == "gmm" for _, p in spec.schemes):
            _require(spec.out_dir / run["codebook"], "codebook", spec)
    if any(e == "slmmse" for e, _ in spec.schemes):
        _require(spec.train_path, "generate", spec)

    _print_scale_note(spec)
    t0 = time.time()
    records: List[NmseRecord] = []
    for run in runs:
        result = run_from_sidecar(spec.out_dir, run)
        records.extend(result.records)
        t = spec.eval_block
        for scheme in result.config.schemes:
            for snr in result.config.protocol.snr_grid:
                nmse = result.nmse(scheme.estimator_id,
                                   scheme.pilot_scheme_id, snr, t)
                print(f"K={run['K']:3d} n_p={run['n_p']:3d} "
                      f"snr={snr:6.1f} dB t={t} "
                      f"{scheme.estimator_id}+{scheme.pilot_scheme_id}: "
                      f"NMSE {nmse:.4e} ({10 * np.log10(nmse):+.2f} dB)")
    runtime = time.time() - t0

    write_records_csv(records, csv_path)
    sidecar = {
        "preset": spec.preset,
        "seed": spec.seed,
        "csv": CSV_NAME,
        "desk_scale_factor": {
            "train_size": spec.train_size / PAPER_TRAIN_SIZE,
            "episodes": spec.episodes / PAPER_EPISODES},
        "config": {
            "n_tx": spec.n_tx, "n_rx": spec.n_rx,
            "train_size": spec.train_size, "eval_size": spec.eval_size,
            "episodes": spec.episodes, "T": spec.T,
            "eval_block": spec.eval_block,
            "snr_db": list(spec.snr_list), "n_p": list(spec.n_p_list),
            "k_pairs": [list(p) for p in spec.k_pairs]},
        "runs": runs,
        "threads": resolve_threads(),
        "runtime_seconds": runtime,
    }
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    print(f"wrote {csv_path} ({len(records)} rows) and {sidecar_path} "
          f"in {runtime:.1f} s")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fddlab",
        description="GMM-based pilot design and channel estimation benchmark")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("generate", "write training and evaluation channel datasets"),
            ("fit", "fit the mixture model(s) from the training dataset"),
            ("codebook", "build pilot codebooks from fitted models"),
            ("sweep", "run the benchmark grid and write CSV results")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--preset", required=True, choices=sorted(PRESETS))
        p.add_argument("--out-dir", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--snr-db", type=float, nargs="+", default=None)
        p.add_argument("--np", type=int, nargs="+", default=None,
                       help="pilot length(s)")
        p.add_argument("--ktx", type=int, default=None)
        p.add_argument("--krx", type=int, default=None)
        p.add_argument("--train-size", type=int, default=None)
        p.add_argument("--eval-size", type=int, default=None)
        p.add_argument("--episodes", type=int, default=None,
                       help="benchmark episodes J")
        p.add_argument("--blocks", type=int, default=None,
                       help="coherence blocks T per episode")
        p.add_argument("--force", action="store_true")
    return parser


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "codebook": cmd_codebook,
    "sweep": cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = resolve_spec(args)
        return COMMANDS[args.command](spec)
    except FddlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
