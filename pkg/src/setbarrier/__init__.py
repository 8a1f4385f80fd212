"""Set-based training of neural barrier certificates."""
from .dynsys import SystemSpec, benchmark, load_system
from .estimator import BarrierCertificate
from .trainer import TrainConfig, RunReport, simulate_check, train, verify

__version__ = "0.1.0"

__all__ = [
    "BarrierCertificate", "SystemSpec", "TrainConfig", "RunReport", "benchmark", "load_system",
    "train", "verify", "simulate_check",
]
