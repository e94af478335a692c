from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

CRITERIA = (
    "domination",
    "two_domination",
    "e_contraction",
    "tangent_e_contraction",
    "sectional_expansion",
    "mixed_domination",
    "strong_stable_separation",
    "pliss",
    "lyapunov",
    "singular_hyperbolic",
)

MEASURED_NOTE = (
    "Constants are measured on a finite sample of a numerically integrated orbit; "
    "they do not certify the limit set."
)


@dataclass
class HyperbolicityReport:
    criterion: str
    constants: dict = field(default_factory=dict)
    pass_fraction: float = 0.0
    worst_margin: Optional[float] = None
    passed: bool = False
    counts: dict = field(default_factory=dict)
    grid: list = field(default_factory=list)  # rows {"T", "pass_fraction", "worst_margin"}
    details: list = field(default_factory=list)  # per-sample rows
    notes: list = field(default_factory=list)
    sub: dict = field(default_factory=dict)  # nested reports (verdict)

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")

    def to_dict(self, with_details: bool = False) -> dict:
        out = {
            "criterion": self.criterion,
            "constants": self.constants,
            "pass_fraction": self.pass_fraction,
            "worst_margin": self.worst_margin,
            "passed": self.passed,
            "counts": self.counts,
            "grid": self.grid,
            "notes": self.notes,
        }
        if self.sub:
            out["sub"] = {k: v.to_dict(with_details) if hasattr(v, "to_dict") else v
                          for k, v in sorted(self.sub.items())}
        if with_details:
            out["details"] = self.details
        return out

    def pass_fraction_at(self, T: float) -> Optional[float]:
        for row in self.grid:
            if abs(row["T"] - T) < 1e-12:
                return row["pass_fraction"]
        return None


def grid_report(criterion: str, grid: Sequence[float], margins: np.ndarray, sample_ids: Sequence[int],
                threshold: float, constant: str, counts: dict, notes: Sequence[str] = (),
                details_extra: Optional[dict] = None) -> HyperbolicityReport:
    """Summarise per-sample margins (``<= 1`` passes) over a time grid.

    ``margins`` has shape ``(n_used, len(grid))``. The reported constant is the
    smallest grid time whose pass fraction reaches ``threshold``;
    ``<constant>_all`` is the smallest time at which every sample passes.
    """
    margins = np.asarray(margins, dtype=float).reshape(len(sample_ids), len(grid))
    rows = []
    chosen = chosen_all = None
    for g, T in enumerate(grid):
        col = margins[:, g]
        frac = float(np.mean(col <= 1.0)) if len(col) else 0.0
        worst = float(np.max(col)) if len(col) else None
        rows.append({"T": float(T), "pass_fraction": frac, "worst_margin": worst})
        if chosen is None and len(col) and frac >= threshold:
            chosen = g
        if chosen_all is None and len(col) and frac == 1.0:
            chosen_all = g
    pick = chosen if chosen is not None else (max(range(len(grid)), key=lambda g: rows[g]["pass_fraction"])
                                              if rows else None)
    constants = {
        constant: float(grid[chosen]) if chosen is not None else None,
        constant + "_all": float(grid[chosen_all]) if chosen_all is not None else None,
        "threshold": threshold,
    }
    details = []
    if pick is not None:
        for row_i, sid in enumerate(sample_ids):
            d = {"sample": int(sid), "margin": float(margins[row_i, pick])}
            if details_extra:
                for k, v in details_extra.items():
                    d[k] = v[row_i]
            details.append(d)
    return HyperbolicityReport(
        criterion=criterion,
        constants=constants,
        pass_fraction=rows[pick]["pass_fraction"] if pick is not None else 0.0,
        worst_margin=rows[pick]["worst_margin"] if pick is not None else None,
        passed=chosen is not None,
        counts=counts,
        grid=rows,
        details=details,
        notes=[MEASURED_NOTE, *notes],
    )
