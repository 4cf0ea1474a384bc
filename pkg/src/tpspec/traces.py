"""Delay-resolved correlation traces."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np


@dataclass(frozen=True, eq=False)
class CorrelationTrace:
    """g2 sampled on an ascending delay grid.

    ``metadata`` carries everything needed to reproduce the trace: emitter
    parameters, filters, post-processing applied and sensor diagnostics.
    """

    tau_grid_ns: np.ndarray
    values: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        tau = np.array(self.tau_grid_ns, dtype=float)
        val = np.array(self.values, dtype=float)
        if tau.ndim != 1 or tau.shape != val.shape:
            raise ValueError(f"tau grid {tau.shape} and values {val.shape} must be 1-D and equally long")
        if tau.size > 1 and np.any(np.diff(tau) <= 0):
            raise ValueError("tau grid must be strictly ascending")
        tau.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "tau_grid_ns", tau)
        object.__setattr__(self, "values", val)

    def __len__(self):
        return self.values.size

    @property
    def is_uniform(self) -> bool:
        if self.tau_grid_ns.size < 3:
            return True
        d = np.diff(self.tau_grid_ns)
        return bool(np.allclose(d, d[0], rtol=1e-9, atol=0.0))

    def with_values(self, values, **metadata) -> "CorrelationTrace":
        return replace(self, values=values, metadata={**self.metadata, **metadata})

    def reversed(self) -> "CorrelationTrace":
        """Trace of the same correlation with the roles of the detectors swapped."""
        return CorrelationTrace(-self.tau_grid_ns[::-1], self.values[::-1], dict(self.metadata))

    def value_at(self, tau_ns: float) -> float:
        return float(np.interp(tau_ns, self.tau_grid_ns, self.values))

    def long_delay_deviation(self) -> float:
        """Relative deviation from 1 of the mean over the outer 10% of the grid."""
        n = max(1, self.values.size // 10)
        order = np.argsort(np.abs(self.tau_grid_ns))
        tail = self.values[order[-n:]]
        return float(abs(tail.mean() - 1.0))
