from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..flow import IntegratorConfig
from ..poincare import DEFAULT_POINCARE, PoincareConfig


def default_grid(step: float = 0.25, stop: float = 10.0) -> tuple:
    n = int(round(stop / step))
    return tuple(round(step * k, 12) for k in range(1, n + 1))


@dataclass(frozen=True)
class AnalysisConfig:
    poincare: PoincareConfig = DEFAULT_POINCARE
    seed: tuple = (1.0, 1.0, 1.0)
    transient: float = 50.0
    n_samples: int = 1000
    spacing: float = 0.05
    split_T: float = 1.0
    k_pow: int = 20
    dir_tol: float = 1e-8
    angle_floor: float = 1e-3
    gap_tol: float = 1e-6
    T_grid: tuple = field(default_factory=default_grid)
    pass_threshold: float = 0.99
    chart_eps: Optional[float] = None  # None: 0.05 * box diagonal
    exclusion_factor: float = 0.5  # in-chart exclusion radius, as a fraction of chart_eps
    sep_threshold: float = 0.1
    notconv_limit: float = 0.1
    jobs: int = 1

    def __post_init__(self):
        for name in ("spacing", "split_T", "dir_tol", "angle_floor", "gap_tol", "sep_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.k_pow < 2:
            raise ValueError("k_pow must be at least 2")
        if not 0 < self.pass_threshold <= 1:
            raise ValueError("pass_threshold must lie in (0, 1]")
        if not self.T_grid or min(self.T_grid) <= 0:
            raise ValueError("T_grid must hold positive times")

    @property
    def integrator(self) -> IntegratorConfig:
        return self.poincare.integrator

    @property
    def frame_eps(self) -> float:
        return self.poincare.frame_eps

    @property
    def grid(self) -> tuple:
        return tuple(sorted(self.T_grid))

    def eps_for(self, box_diagonal: float) -> float:
        return 0.05 * box_diagonal if self.chart_eps is None else self.chart_eps

    @property
    def history(self) -> float:
        return self.k_pow * self.split_T + max(self.T_grid)

    @property
    def future(self) -> float:
        return self.k_pow * self.split_T + max(self.T_grid)
