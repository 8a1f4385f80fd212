"""Published reference results for the built-in benchmarks.

Mean and standard deviation of training wall time (seconds) and of the
number of training epochs, over ten seeds, as reported for the original
set-based training implementation.  Used as the comparison column of
``bench`` summaries and by the acceptance suite.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Reference:
    time_s: float
    time_std: float
    epochs: float
    epochs_std: float
    success_pct: float = 100.0


REFERENCE = {
    "three-sets": Reference(0.5, 0.16, 16.1, 10.85),
    "two-barriers": Reference(0.6, 0.23, 27.7, 34.05),
    "peruffo-4d": Reference(0.5, 0.02, 25.1, 5.32),
    "peruffo-6d": Reference(3.1, 2.50, 3186.8, 2918.83),
    "peruffo-8d": Reference(1.0, 1.27, 642.9, 1238.83),
    "darboux": Reference(5.2, 3.44, 1027.5, 708.85),
    "polynomial": Reference(1.4, 0.24, 234.6, 66.18),
    "lyapunov": Reference(2.1, 1.40, 39.7, 33.75),
    "exponential": Reference(19.0, 13.29, 1799.0, 1270.11),
    "ratschan-3d": Reference(0.5, 0.02, 65.4, 5.02),
    "ratschan-5d": Reference(0.5, 0.03, 49.9, 19.68),
    "ratschan-7d": Reference(0.6, 0.34, 284.3, 428.92),
    "ratschan-9d": Reference(1.1, 0.98, 399.1, 553.93),
}
