"""Experiment driver: evaluation, multi-seed statistics, CSV artifacts.

All outputs are deterministic functions of the configuration. Every CSV
starts with '#'-prefixed metadata lines recording the config hash, the
seeds, and the values of all tunable conventions, so runs are auditable.
Independent (seed, method) cells may fan out to worker processes; assembly
is ordered, so thread count never changes the output.
"""

from __future__ import annotations

import io
import multiprocessing
from dataclasses import dataclass

import numpy as np

from . import nn, transceiver
from .baseband import snr_db_to_noise_variance
from .channels import make_adapter, make_channel
from .config import METHOD_KEYS, ExperimentConfig
from .policy import PolicyConfig
from .training import (
    RngBundle,
    SystemState,
    TracePoint,
    TrainSchedule,
    alternating_train,
    eval_stream,
    supervised_train,
    training_source,
)
from .transceiver import hard_decision, rx_forward, tx_forward

EVAL_CHUNK = 8192


@dataclass(frozen=True)
class ErrorEstimate:
    """Block-error-rate estimate with a 95% Wilson interval half-width."""

    rate: float
    n: int
    ci95: float


def wilson_halfwidth(rate: float, n: int, z: float = 1.959963984540054) -> float:
    if n < 1:
        raise ValueError("n must be at least 1")
    z2n = z * z / n
    half = z * np.sqrt(rate * (1.0 - rate) / n + z2n / (4.0 * n))
    return float(half / (1.0 + z2n))


def evaluate_error_rate(state: SystemState, channel, n_msgs: int, rng) -> ErrorEstimate:
    """Fraction of uniform messages the receiver decodes wrongly.

    Uses the deterministic transmitter (no exploration), in chunks.
    """
    if n_msgs < 1:
        raise ValueError(f"n_msgs must be at least 1, got {n_msgs}")
    errors = 0
    remaining = n_msgs
    while remaining > 0:
        batch = min(EVAL_CHUNK, remaining)
        msgs = training_source(rng, batch, state.tx.m)
        x, _ = tx_forward(state.tx, msgs)
        y = channel.transmit(x, rng)
        probs, _ = rx_forward(state.rx, y)
        errors += int((hard_decision(probs) != msgs).sum())
        remaining -= batch
    rate = errors / n_msgs
    return ErrorEstimate(rate=rate, n=n_msgs, ci95=wilson_halfwidth(rate, n_msgs))


def schedule_from_config(cfg: ExperimentConfig) -> TrainSchedule:
    return TrainSchedule(
        main_iterations=cfg.main_iterations,
        snr_db=cfg.train_snr_db,
        rx_steps=cfg.rx_steps,
        tx_steps=cfg.tx_steps,
        batch_rx=cfg.batch_rx,
        batch_tx=cfg.batch_tx,
        lr_rx=cfg.lr_rx,
        lr_tx=cfg.lr_tx,
    )


def train_system(cfg: ExperimentConfig, method: str, seed: int) -> tuple[SystemState, list[TracePoint]]:
    """Train one system for one (method, seed) cell of the experiment."""
    sched = schedule_from_config(cfg)
    state = SystemState.init(
        cfg.m,
        cfg.n,
        seed,
        rx_variant=cfg.rx_variant,
        est_width=cfg.rbf_est_width,
        policy=PolicyConfig(cfg.policy_var),
    )
    rngs = RngBundle.from_seed(seed)
    if method == "supervised":
        adapter = make_adapter(cfg.channel, sched.noise_var)
        return supervised_train(state, adapter, sched, rngs)
    channel = make_channel(cfg.channel, sched.noise_var)
    return alternating_train(state, channel, sched, rngs, baseline=cfg.baseline)


def _trace_cell(args) -> list[float]:
    cfg_dict, method, seed = args
    cfg = ExperimentConfig(**cfg_dict)
    _, trace = train_system(cfg, method, seed)
    return [point.error_rate for point in trace]


def _sweep_cell(args) -> list[float]:
    cfg_dict, method, seed = args
    cfg = ExperimentConfig(**cfg_dict)
    state, _ = train_system(cfg, method, seed)
    rates = []
    for snr_index, snr_db in enumerate(cfg.eval_snr_db):
        channel = make_channel(cfg.channel, snr_db_to_noise_variance(snr_db))
        rng = eval_stream(seed, snr_index)
        rates.append(evaluate_error_rate(state, channel, cfg.eval_msgs, rng).rate)
    return rates


def _map_cells(worker, cells, threads: int):
    if threads <= 1 or len(cells) <= 1:
        return [worker(cell) for cell in cells]
    with multiprocessing.get_context("fork").Pool(min(threads, len(cells))) as pool:
        return pool.map(worker, cells)


def metadata_lines(cfg: ExperimentConfig, kind: str) -> list[str]:
    return [
        f"# chanfree {kind}",
        f"# config_hash={cfg.config_hash()}",
        f"# seeds={','.join(str(s) for s in cfg.seeds)}",
        f"# channel={cfg.channel} method={cfg.method} m={cfg.m} n={cfg.n} train_snr_db={cfg.train_snr_db}",
        f"# main_iterations={cfg.main_iterations} rx_steps={cfg.rx_steps} tx_steps={cfg.tx_steps}"
        f" batch_rx={cfg.batch_rx} batch_tx={cfg.batch_tx} lr_rx={cfg.lr_rx} lr_tx={cfg.lr_tx}",
        f"# policy_var={cfg.policy_var} loss_baseline={'on' if cfg.baseline else 'off'}"
        f" rbf_est_width={cfg.rbf_est_width} eval_msgs={cfg.eval_msgs}",
        "# rng=pcg64 init=glorot_uniform normalization=per_message_energy packing=even_real_odd_imag",
        f"# adam_beta1={nn.ADAM_BETA1} adam_beta2={nn.ADAM_BETA2} adam_eps={nn.ADAM_EPS}"
        f" prob_clip={transceiver.PROB_CLIP} eps_div={transceiver.EPS_DIV}",
        "# rbf_fading=cn01_per_message error_rate=block iteration=rx_phase_plus_tx_phase",
    ]


def run_convergence_experiment(cfg: ExperimentConfig) -> str:
    """Per-iteration training error, mean and std across seeds, as CSV text.

    Column layout: iterations, then per method the cross-seed mean error,
    then per method the cross-seed standard deviation.
    """
    cfg.validate()
    methods = cfg.methods
    cells = [(cfg.to_dict(), method, seed) for method in methods for seed in cfg.seeds]
    results = _map_cells(_trace_cell, cells, cfg.threads)
    by_method = {}
    for (_, method, _), trace in zip(cells, results):
        by_method.setdefault(method, []).append(trace)
    out = io.StringIO()
    for line in metadata_lines(cfg, "convergence"):
        out.write(line + "\n")
    keys = [METHOD_KEYS[m] for m in methods]
    header = ["iterations"]
    header += [f"{cfg.channel}_{k}" for k in keys]
    header += [f"{cfg.channel}_{k}_std" for k in keys]
    out.write(",".join(header) + "\n")
    stacked = {m: np.array(by_method[m]) for m in methods}  # seeds x iterations
    for it in range(cfg.main_iterations):
        row = [str(it + 1)]
        row += [repr(float(stacked[m][:, it].mean())) for m in methods]
        row += [repr(float(stacked[m][:, it].std())) for m in methods]
        out.write(",".join(row) + "\n")
    return out.getvalue()


def run_snr_sweep(cfg: ExperimentConfig) -> str:
    """Error rate over the evaluation SNR grid, median across seeds, as CSV.

    Column layout: snr, then one column per method.
    """
    cfg.validate()
    methods = cfg.methods
    cells = [(cfg.to_dict(), method, seed) for method in methods for seed in cfg.seeds]
    results = _map_cells(_sweep_cell, cells, cfg.threads)
    by_method = {}
    for (_, method, _), rates in zip(cells, results):
        by_method.setdefault(method, []).append(rates)
    out = io.StringIO()
    for line in metadata_lines(cfg, "snr sweep"):
        out.write(line + "\n")
    keys = [METHOD_KEYS[m] for m in methods]
    out.write(",".join(["snr"] + keys) + "\n")
    medians = {m: np.median(np.array(by_method[m]), axis=0) for m in methods}
    for i, snr_db in enumerate(cfg.eval_snr_db):
        row = [repr(float(snr_db))] + [repr(float(medians[m][i])) for m in methods]
        out.write(",".join(row) + "\n")
    return out.getvalue()


def trace_csv(cfg: ExperimentConfig, method: str, trace: list[TracePoint]) -> str:
    """Single-run training trace as CSV (error rate and mean loss)."""
    out = io.StringIO()
    for line in metadata_lines(cfg, f"training trace method={method}"):
        out.write(line + "\n")
    out.write("iterations,error_rate,mean_loss\n")
    for point in trace:
        out.write(f"{point.iteration},{point.error_rate!r},{point.mean_loss!r}\n")
    return out.getvalue()
