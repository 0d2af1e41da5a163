"""Alternating training loop and the fully supervised baseline.

One main iteration of the alternating loop runs a block of supervised
receiver steps followed by a block of policy-gradient transmitter steps.
During transmitter training, the only data crossing from receiver to
transmitter is a serialized batch of per-example scalar losses; the
training code for this path touches nothing of a channel beyond
transmit().
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import nn, transceiver
from .baseband import RngStream, snr_db_to_noise_variance
from .nn import AdamState, ParamSet
from .policy import PolicyConfig, estimate_tx_gradient, policy_sample
from .transceiver import (
    RxModel,
    TxModel,
    ce_per_example,
    hard_decision,
    rx_backward,
    rx_forward,
    tx_backward,
    tx_forward,
)

CHECKPOINT_VERSION = 1

# Substream labels under one experiment seed. Transmitter and receiver
# message streams share a label: equal seeds, equal sequences.
_PATH_INIT_TX = 0
_PATH_INIT_RX = 1
_PATH_MSGS = 2
_PATH_CHANNEL = 3
_PATH_POLICY = 4
_PATH_EVAL = 5


@dataclass
class TrainSchedule:
    """Iteration counts, batch sizes, learning rates, and the training SNR."""

    main_iterations: int
    snr_db: float
    rx_steps: int = 1
    tx_steps: int = 1
    batch_rx: int = 64
    batch_tx: int = 64
    lr_rx: float = 1e-3
    lr_tx: float = 1e-3

    def __post_init__(self):
        if self.main_iterations < 0 or self.rx_steps < 0 or self.tx_steps < 0:
            raise ValueError("iteration counts must be nonnegative")
        if self.batch_rx < 1 or self.batch_tx < 1:
            raise ValueError("batch sizes must be at least 1")
        if self.lr_rx <= 0 or self.lr_tx <= 0:
            raise ValueError("learning rates must be positive")

    @property
    def noise_var(self) -> float:
        return snr_db_to_noise_variance(self.snr_db)


@dataclass
class SystemState:
    """Both models, their optimizer states, and phase counters."""

    tx: TxModel
    rx: RxModel
    tx_opt: AdamState
    rx_opt: AdamState
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    rx_steps_done: int = 0
    tx_steps_done: int = 0
    main_iterations_done: int = 0

    @classmethod
    def init(
        cls,
        m: int,
        n: int,
        seed: int,
        rx_variant: str = "awgn",
        est_width: int = transceiver.DEFAULT_EST_WIDTH,
        policy: PolicyConfig | None = None,
    ) -> "SystemState":
        root = RngStream(seed)
        tx = TxModel.init(m, n, root.derive(_PATH_INIT_TX))
        rx = RxModel.init(m, n, rx_variant, root.derive(_PATH_INIT_RX), est_width)
        return cls(
            tx=tx,
            rx=rx,
            tx_opt=nn.init_adam(tx.params),
            rx_opt=nn.init_adam(rx.params),
            policy=policy or PolicyConfig(),
        )


@dataclass
class RngBundle:
    """Named substreams of one experiment seed.

    msgs_tx and msgs_rx are separate streams built from the same address,
    so both sides of the link generate identical training messages without
    exchanging them.
    """

    msgs_tx: RngStream
    msgs_rx: RngStream
    channel: RngStream
    policy: RngStream

    @classmethod
    def from_seed(cls, seed: int) -> "RngBundle":
        root = RngStream(seed)
        return cls(
            msgs_tx=root.derive(_PATH_MSGS),
            msgs_rx=root.derive(_PATH_MSGS),
            channel=root.derive(_PATH_CHANNEL),
            policy=root.derive(_PATH_POLICY),
        )

    def state(self) -> dict:
        return {
            "msgs_tx": self.msgs_tx.state(),
            "msgs_rx": self.msgs_rx.state(),
            "channel": self.channel.state(),
            "policy": self.policy.state(),
        }

    @classmethod
    def from_state(cls, record: dict) -> "RngBundle":
        return cls(**{name: RngStream.from_state(entry) for name, entry in record.items()})


def eval_stream(seed: int, *path: int) -> RngStream:
    """Evaluation substream of an experiment seed, disjoint from training."""
    return RngStream(seed).derive(_PATH_EVAL, *path)


class FeedbackMessage(NamedTuple):
    """Per-example losses plus a minibatch sequence number; scalars only."""

    seq: int
    losses: np.ndarray

    _MAGIC = b"CFB1"

    def to_bytes(self) -> bytes:
        data = np.ascontiguousarray(self.losses, dtype="<f8").tobytes()
        return self._MAGIC + struct.pack("<II", self.seq, self.losses.shape[0]) + data

    @classmethod
    def from_bytes(cls, blob: bytes) -> "FeedbackMessage":
        if blob[:4] != cls._MAGIC:
            raise ValueError("not a feedback message")
        seq, count = struct.unpack("<II", blob[4:12])
        losses = np.frombuffer(blob[12:], dtype="<f8")
        if losses.shape[0] != count:
            raise ValueError("feedback message length mismatch")
        return cls(seq=seq, losses=losses.copy())


class StepMetrics(NamedTuple):
    error_rate: float
    mean_loss: float


class TracePoint(NamedTuple):
    iteration: int
    error_rate: float
    mean_loss: float


def training_source(rng: RngStream, count: int, m: int) -> np.ndarray:
    """i.i.d. uniform message ids over [0, m)."""
    if count < 0:
        raise ValueError(f"count must be nonnegative, got {count}")
    return rng.integers(0, m, count)


def train_receiver_step(
    state: SystemState, channel, batch: int, lr: float, rngs: RngBundle
) -> tuple[SystemState, StepMetrics]:
    """One supervised receiver update; transmitter untouched, no exploration."""
    msgs_sent = training_source(rngs.msgs_tx, batch, state.tx.m)
    msgs_known = training_source(rngs.msgs_rx, batch, state.rx.m)
    x, _ = tx_forward(state.tx, msgs_sent)
    y = channel.transmit(x, rngs.channel)
    probs, cache = rx_forward(state.rx, y)
    losses = ce_per_example(probs, msgs_known)
    d_logits = nn.softmax_ce_backward(probs, msgs_known) / batch
    grads, _ = rx_backward(state.rx, cache, d_logits)
    new_params, new_opt = nn.adam_step(state.rx.params, grads, state.rx_opt, lr)
    metrics = StepMetrics(
        error_rate=float((hard_decision(probs) != msgs_known).mean()),
        mean_loss=float(losses.mean()),
    )
    new_state = replace(
        state,
        rx=replace(state.rx, params=new_params),
        rx_opt=new_opt,
        rx_steps_done=state.rx_steps_done + 1,
    )
    return new_state, metrics


def train_transmitter_step(
    state: SystemState,
    channel,
    batch: int,
    lr: float,
    rngs: RngBundle,
    baseline: bool = False,
) -> tuple[SystemState, StepMetrics]:
    """One policy-gradient transmitter update from scalar loss feedback."""
    msgs_sent = training_source(rngs.msgs_tx, batch, state.tx.m)
    msgs_known = training_source(rngs.msgs_rx, batch, state.rx.m)
    x, cache = tx_forward(state.tx, msgs_sent)
    sample = policy_sample(x, state.policy, rngs.policy, cache)
    y = channel.transmit(sample.x_p, rngs.channel)
    probs, _ = rx_forward(state.rx, y)
    losses = ce_per_example(probs, msgs_known)
    # receiver -> transmitter crossing: serialized scalars only
    feedback = FeedbackMessage(seq=state.tx_steps_done, losses=losses).to_bytes()
    received = FeedbackMessage.from_bytes(feedback)
    grads = estimate_tx_gradient(state.tx, received.losses, sample, state.policy, baseline)
    new_params, new_opt = nn.adam_step(state.tx.params, grads, state.tx_opt, lr)
    metrics = StepMetrics(
        error_rate=float((hard_decision(probs) != msgs_known).mean()),
        mean_loss=float(received.losses.mean()),
    )
    new_state = replace(
        state,
        tx=replace(state.tx, params=new_params),
        tx_opt=new_opt,
        tx_steps_done=state.tx_steps_done + 1,
    )
    return new_state, metrics


def alternating_train(
    state: SystemState,
    channel,
    sched: TrainSchedule,
    rngs: RngBundle,
    baseline: bool = False,
) -> tuple[SystemState, list[TracePoint]]:
    """Alternate receiver and transmitter phases for sched.main_iterations.

    The trace records, per main iteration, the error rate and mean loss of
    that iteration's first receiver-phase minibatch (deterministic
    transmitter, training SNR), measured before any update of the iteration.
    """
    trace: list[TracePoint] = []
    for it in range(sched.main_iterations):
        iter_metrics: StepMetrics | None = None
        for _ in range(sched.rx_steps):
            state, metrics = train_receiver_step(state, channel, sched.batch_rx, sched.lr_rx, rngs)
            if iter_metrics is None:
                iter_metrics = metrics
        for _ in range(sched.tx_steps):
            state, metrics = train_transmitter_step(
                state, channel, sched.batch_tx, sched.lr_tx, rngs, baseline
            )
            if iter_metrics is None:
                iter_metrics = metrics
        state = replace(state, main_iterations_done=state.main_iterations_done + 1)
        if iter_metrics is not None:
            trace.append(TracePoint(it + 1, iter_metrics.error_rate, iter_metrics.mean_loss))
    return state, trace


def supervised_train(
    state: SystemState, adapter, sched: TrainSchedule, rngs: RngBundle
) -> tuple[SystemState, list[TracePoint]]:
    """Joint end-to-end training through a differentiable channel adapter."""
    trace: list[TracePoint] = []
    for it in range(sched.main_iterations):
        msgs = training_source(rngs.msgs_tx, sched.batch_rx, state.tx.m)
        x, tx_cache = tx_forward(state.tx, msgs)
        y, ch_cache = adapter.transmit_diff(x, rngs.channel)
        probs, rx_cache = rx_forward(state.rx, y)
        losses = ce_per_example(probs, msgs)
        d_logits = nn.softmax_ce_backward(probs, msgs) / sched.batch_rx
        rx_grads, d_received = rx_backward(state.rx, rx_cache, d_logits)
        d_x = adapter.backward(ch_cache, d_received)
        tx_grads = tx_backward(state.tx, tx_cache, d_x)
        new_rx_params, new_rx_opt = nn.adam_step(state.rx.params, rx_grads, state.rx_opt, sched.lr_rx)
        new_tx_params, new_tx_opt = nn.adam_step(state.tx.params, tx_grads, state.tx_opt, sched.lr_tx)
        trace.append(
            TracePoint(
                it + 1,
                float((hard_decision(probs) != msgs).mean()),
                float(losses.mean()),
            )
        )
        state = replace(
            state,
            tx=replace(state.tx, params=new_tx_params),
            rx=replace(state.rx, params=new_rx_params),
            tx_opt=new_tx_opt,
            rx_opt=new_rx_opt,
            rx_steps_done=state.rx_steps_done + 1,
            tx_steps_done=state.tx_steps_done + 1,
            main_iterations_done=state.main_iterations_done + 1,
        )
    return state, trace


# --- checkpointing -----------------------------------------------------------


def _adam_record(opt: AdamState) -> dict:
    return {
        "m": transceiver.encode_params(opt.m),
        "v": transceiver.encode_params(opt.v),
        "t": opt.t,
    }


def _adam_from_record(record: dict) -> AdamState:
    return AdamState(
        m=transceiver.decode_params(record["m"]),
        v=transceiver.decode_params(record["v"]),
        t=record["t"],
    )


def checkpoint_record(state: SystemState, rngs: RngBundle | None = None) -> dict:
    record = {
        "format": "chanfree-checkpoint",
        "version": CHECKPOINT_VERSION,
        "tx": transceiver.model_record(state.tx),
        "rx": transceiver.model_record(state.rx),
        "tx_opt": _adam_record(state.tx_opt),
        "rx_opt": _adam_record(state.rx_opt),
        "policy_variance": state.policy.variance,
        "rx_steps_done": state.rx_steps_done,
        "tx_steps_done": state.tx_steps_done,
        "main_iterations_done": state.main_iterations_done,
    }
    if rngs is not None:
        record["rng"] = rngs.state()
    return record


def save_checkpoint(path, state: SystemState, rngs: RngBundle | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(checkpoint_record(state, rngs), fh, sort_keys=True, separators=(",", ":"))


def load_checkpoint(path) -> tuple[SystemState, RngBundle | None]:
    with open(path) as fh:
        record = json.load(fh)
    if record.get("format") != "chanfree-checkpoint":
        raise ValueError("not a chanfree checkpoint")
    if record.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {record.get('version')}")
    state = SystemState(
        tx=transceiver.model_from_record(record["tx"]),
        rx=transceiver.model_from_record(record["rx"]),
        tx_opt=_adam_from_record(record["tx_opt"]),
        rx_opt=_adam_from_record(record["rx_opt"]),
        policy=PolicyConfig(record["policy_variance"]),
        rx_steps_done=record["rx_steps_done"],
        tx_steps_done=record["tx_steps_done"],
        main_iterations_done=record["main_iterations_done"],
    )
    rngs = RngBundle.from_state(record["rng"]) if "rng" in record else None
    return state, rngs
