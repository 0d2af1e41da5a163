"""Model-free end-to-end training of point-to-point transceivers.

A transmitter/receiver pair over an unknown channel is trained by
alternating supervised receiver updates with policy-gradient transmitter
updates that need only per-example scalar losses, and benchmarked against
the fully supervised autoencoder that backpropagates through a
differentiable channel model.
"""

# Pin BLAS to one thread before numpy loads anywhere in this process.
# Parallelism comes from process fan-out in the harness; single-threaded
# GEMM keeps results bitwise reproducible and avoids oversubscription.
import os

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

from .baseband import RngStream
from .channels import make_adapter, make_channel
from .config import ExperimentConfig
from .harness import ErrorEstimate, evaluate_error_rate, run_convergence_experiment, run_snr_sweep
from .policy import PolicyConfig
from .training import SystemState, TrainSchedule, alternating_train, supervised_train
from .transceiver import RxModel, TxModel

__all__ = [
    "ErrorEstimate",
    "ExperimentConfig",
    "PolicyConfig",
    "RngStream",
    "RxModel",
    "SystemState",
    "TrainSchedule",
    "TxModel",
    "alternating_train",
    "evaluate_error_rate",
    "make_adapter",
    "make_channel",
    "run_convergence_experiment",
    "run_snr_sweep",
    "supervised_train",
]

__version__ = "0.1.0"
