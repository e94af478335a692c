from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NearSingularity
from ..field import VectorField
from ..flow import DEFAULT_CONFIG, IntegratorConfig, tangent_flow_with_divergence
from .sampling import frame_basis


@dataclass
class LyapunovResult:
    tangent: np.ndarray  # 3 exponents, descending
    normal: np.ndarray  # 2 exponents of the rescaled normal cocycle, descending
    mean_divergence: float
    T_total: float
    renorm_dt: float
    skipped_normal: int  # intervals with an endpoint at |X| <= frame_eps

    def to_dict(self) -> dict:
        return {
            "tangent": [float(v) for v in self.tangent],
            "normal": [float(v) for v in self.normal],
            "sum": float(np.sum(self.tangent)),
            "mean_divergence": self.mean_divergence,
            "T_total": self.T_total,
            "renorm_dt": self.renorm_dt,
            "skipped_normal": self.skipped_normal,
        }


def _qr_positive(m: np.ndarray):
    q, r = np.linalg.qr(m)
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    return q * s, np.abs(np.diag(r))


def lyapunov_exponents(f: VectorField, x, T_total: float, renorm_dt: float,
                       cfg: IntegratorConfig = DEFAULT_CONFIG, frame_eps: float = 1e-8) -> LyapunovResult:
    """Discrete QR estimate of the tangent and rescaled-normal Lyapunov spectra.

    Every ``renorm_dt`` the tangent map of the interval is applied to an
    orthonormal frame and re-orthonormalised; the logs of the ``R`` diagonal
    are averaged over ``T_total``. The 2x2 normal steps ``psi*`` are handled
    the same way.
    """
    if not (renorm_dt > 0 and T_total >= renorm_dt):
        raise ValueError("need 0 < renorm_dt <= T_total")
    n = int(round(T_total / renorm_dt))
    p = np.asarray(x, dtype=float)
    q3 = np.eye(3)
    q2 = np.eye(2)
    sum3 = np.zeros(3)
    sum2 = np.zeros(2)
    div = 0.0
    skipped = 0
    try:
        fr0 = frame_basis(f, p, frame_eps)
    except NearSingularity:
        fr0 = None
    for _ in range(n):
        p1, m, d = tangent_flow_with_divergence(f, p, renorm_dt, cfg)
        div += d
        q3, r = _qr_positive(m @ q3)
        sum3 += np.log(r)
        try:
            fr1 = frame_basis(f, p1, frame_eps)
        except NearSingularity:
            fr1 = None
        if fr0 is not None and fr1 is not None:
            psi = (fr1[1].T @ m @ fr0[1]) * (fr0[2] / fr1[2])
            q2, r2 = _qr_positive(psi @ q2)
            sum2 += np.log(r2)
        else:
            skipped += 1
        p, fr0 = p1, fr1
    total = n * renorm_dt
    used = (n - skipped) * renorm_dt
    tangent = np.sort(sum3 / total)[::-1]
    normal = np.sort(sum2 / used)[::-1] if used > 0 else np.full(2, math.nan)
    return LyapunovResult(tangent, normal, div / total, total, renorm_dt, skipped)
