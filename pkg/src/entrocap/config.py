"""Run-level configuration shared by the command-line front end and the scripts."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass

from .capacity import CapacityOptions
from .protocol import DIM_CAP
from .sdp import SolverTolerances


@dataclass
class RunConfig:
    psd_tol: float = 1e-12   # negative eigenvalues tolerated on loaded states
    gap_tol: float = 1e-8    # SDP duality gap
    opt_tol: float = 1e-7    # Riemannian gradient norm at the capacity optimizer
    add_tol: float = 1e-3    # additivity verdict
    seed: int = 0
    restarts: int = 32
    dim_cap: int = DIM_CAP
    format: str = "json"
    jobs: int = 1

    def __post_init__(self):
        for name in ("psd_tol", "gap_tol", "opt_tol", "add_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.restarts < 1 or self.dim_cap < 1 or self.jobs < 1:
            raise ValueError("restarts, dim_cap and jobs must be >= 1")
        if self.format not in ("json", "csv"):
            raise ValueError("format must be json or csv")

    def solver(self) -> SolverTolerances:
        return SolverTolerances(gap_tol=self.gap_tol)

    def capacity(self, **over) -> CapacityOptions:
        kw = dict(restarts=self.restarts, seed=self.seed, opt_tol=self.opt_tol, jobs=self.jobs)
        kw.update(over)
        return CapacityOptions(**kw)

    def to_dict(self) -> dict:
        return asdict(self)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("ENTROCAP_JOBS", "1")))
    except ValueError:
        return 1
