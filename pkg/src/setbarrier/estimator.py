"""Scikit-learn style front end for certificate synthesis."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .dynsys.benchmarks import benchmark
from .dynsys.systems import SystemSpec
from .errors import DimensionError, InvalidInputError
from .neural.network import Network
from .trainer import (RunReport, TrainConfig, simulate_check, preset_config, train, verify)
from .zeroset import ZeroParams


def _resolve_system(system) -> SystemSpec:
    if isinstance(system, SystemSpec):
        return system
    if isinstance(system, str):
        return benchmark(system)
    raise InvalidInputError(f"expected a SystemSpec or benchmark name, got {type(system).__name__}")


class BarrierCertificate(BaseEstimator):
    """Learn a neural barrier certificate ``B`` for a dynamical system.

    ``fit(system)`` trains until the set-based loss is exactly zero (or
    ``max_epochs`` runs out).  ``decision_function`` returns ``B(x)`` and
    ``predict`` labels states with ``B(x) <= 0`` (the certified reachable
    region) as 1.  Hyper-parameters left as ``None`` take the built-in
    per-benchmark preset when the system name has one.

    Fitted attributes: ``network_``, ``report_``, ``verified_``,
    ``n_features_in_``, ``system_``.
    """

    def __init__(self, arch=None, eta=None, beta1=None, eps=None, zero=None,
                 lie_subsplits=None, max_epochs=None, seed=0):
        self.arch = arch
        self.eta = eta
        self.beta1 = beta1
        self.eps = eps
        self.zero = zero
        self.lie_subsplits = lie_subsplits
        self.max_epochs = max_epochs
        self.seed = seed

    def config_for(self, system: SystemSpec) -> TrainConfig:
        zero = ZeroParams.parse(self.zero) if isinstance(self.zero, str) else self.zero
        return preset_config(system.name, arch=self.arch, eta=self.eta, beta1=self.beta1,
                             eps=self.eps, zero=zero, lie_subsplits=self.lie_subsplits,
                             max_epochs=self.max_epochs, seed=self.seed)

    def fit(self, system, y=None):
        sys = _resolve_system(system)
        net, report = train(sys, self.config_for(sys))
        self.system_ = sys
        self.network_ = net
        self.report_ = report
        self.verified_ = report.verified
        self.n_features_in_ = sys.dim
        return self

    @classmethod
    def from_network(cls, net: Network, system, **params) -> "BarrierCertificate":
        """Wrap an existing network (e.g. a loaded model) as a fitted estimator."""
        sys = _resolve_system(system)
        if net.input_dim != sys.dim:
            raise DimensionError(f"network expects {net.input_dim} inputs, system has dimension {sys.dim}")
        est = cls(**params)
        est.system_ = sys
        est.network_ = net
        est.report_ = None
        est.verified_ = None
        est.n_features_in_ = sys.dim
        return est

    def _states(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"X has {X.shape[1]} features, the certificate expects {self.n_features_in_}")
        return X

    def decision_function(self, X) -> np.ndarray:
        X = self._states(X)
        return self.network_(X)

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) <= 0.0).astype(int)

    def verify(self, system=None, refine: int = 0) -> RunReport:
        """Re-run the set-based check, optionally with ``refine`` extra zero-set iterations."""
        check_is_fitted(self, "network_")
        sys = self.system_ if system is None else _resolve_system(system)
        return verify(self.network_, sys, self.config_for(sys), refine=refine)

    def simulate(self, horizon: float = 10.0, count: int = 100, seed: int = 0) -> dict:
        check_is_fitted(self, "network_")
        return simulate_check(self.network_, self.system_, horizon=horizon, count=count, seed=seed)
