"""Pliss string extraction.

Index ``i`` of a sequence of one-block log norms ``a`` is a Pliss index when
every partial sum starting there satisfies

    sum_{j=i}^{i+m-1} a_j <= -m * tau0 * log(gamma)   for all admissible m >= 1.

Comparisons are done in exact dyadic arithmetic (floats scaled to integers),
so the linear scan and any brute-force enumeration agree bit for bit.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from ..errors import NumericalError
from ..field import VectorField
from .config import AnalysisConfig
from .report import MEASURED_NOTE, HyperbolicityReport
from .sampling import steps_for
from .splitting import SplittingEstimate, unstable_line


def exact_shifted(log_norms: Sequence[float], tau0: float, gamma: float) -> list:
    """Integers proportional to ``a_j + tau0*log(gamma)`` with one common positive scale."""
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    if not tau0 > 0:
        raise ValueError("tau0 must be positive")
    c = Fraction(float(tau0) * math.log(gamma))
    vals = []
    for a in log_norms:
        a = float(a)
        if not math.isfinite(a):
            raise ValueError("log norms must be finite")
        vals.append(Fraction(a) + c)
    if not vals:
        return []
    den = max(v.denominator for v in vals)  # powers of two: den is a common multiple
    return [v.numerator * (den // v.denominator) for v in vals]


def pliss_strings(log_norms: Sequence[float], tau0: float, gamma: float) -> list:
    """All Pliss indices, by one backward scan.

    ``best[i]``, the largest partial sum of the shifted sequence starting at
    ``i``, obeys ``best[i] = b[i] + max(0, best[i+1])``; ``i`` qualifies iff
    ``best[i] <= 0``.
    """
    b = exact_shifted(log_norms, tau0, gamma)
    out = []
    best = 0
    for i in range(len(b) - 1, -1, -1):
        best = b[i] + max(0, best) if i < len(b) - 1 else b[i]
        if best <= 0:
            out.append(i)
    out.reverse()
    return out


def backward_block_logs(window, f2: np.ndarray, block: int, count: int, rescaled: bool = True,
                        tail: int = 0) -> np.ndarray:
    """``a_k = log |psi*_{-tau0} | F|`` at ``phi_{-k tau0}(x)``, ``k = 0..count-1``.

    ``F`` is read off a forward sweep started ``tail`` steps before the oldest
    block; carrying it backward would collapse it onto ``E``.
    """
    depth = block * count + tail
    _, logs = unstable_line(window, f2, depth)
    if rescaled:
        logs = logs + np.array([math.log(window.speed(j) / window.speed(j + 1)) for j in range(-depth, 0)])
    out = np.empty(count)
    for k in range(count):
        hi = depth - k * block  # index of offset -k*block
        out[k] = -float(np.sum(logs[hi - block:hi]))
    return out


def pliss_report(split: SplittingEstimate, f: VectorField, tau0: float, gamma: float,
                 blocks: Optional[int] = None, cfg: AnalysisConfig = AnalysisConfig()) -> HyperbolicityReport:
    """Pliss indices of the backward ``F`` norms ending at the latest converged sample.

    The string is read backward in time from that sample with blocks of
    length ``tau0``; ``blocks`` defaults to as many as the stored history allows.
    """
    b = steps_for(tau0, split.dt)
    if b < 1:
        raise ValueError("tau0 must be at least one sample spacing")
    ok = [i for i, s in enumerate(split.status) if s == "ok"]
    notes = [MEASURED_NOTE]
    if not ok:
        return HyperbolicityReport("pliss", {"tau0": tau0, "gamma": gamma}, 0.0, None, False,
                                   split.counts(), notes=notes + ["no converged sample"])
    anchor = ok[-1]
    tail = 2 * steps_for(split.T, split.dt)
    if blocks is None:
        blocks = max(1, (anchor + int(round(cfg.history / split.dt)) - tail) // b)
    try:
        a = backward_block_logs(split.windows[anchor], split.f_dir[anchor], b, blocks, tail=tail)
    except NumericalError as exc:
        blocks = 0
        a = np.empty(0)
        notes.append(f"backward string stopped: {type(exc).__name__}")
    idx = pliss_strings(a, tau0, gamma) if len(a) else []
    frac = len(idx) / len(a) if len(a) else 0.0
    hits = set(idx)
    return HyperbolicityReport(
        criterion="pliss",
        constants={"tau0": tau0, "gamma": gamma, "density": frac,
                   "mean_log_norm_per_time": float(np.mean(a) / tau0) if len(a) else None},
        pass_fraction=frac,
        worst_margin=float(np.max(a) + tau0 * math.log(gamma)) if len(a) else None,
        passed=bool(idx),
        counts={"blocks": int(len(a)), "pliss_indices": len(idx), "anchor_sample": anchor},
        details=[{"block": int(k), "log_norm": float(a[k]), "pliss": k in hits} for k in range(len(a))],
        notes=notes,
    )
