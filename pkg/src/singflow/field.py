"""Polynomial vector fields on R^3 with closed-form Jacobians, and their singularities."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import NotASingularity, SingularJacobian

MAX_DEGREE = 4


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo_i, hi_i]`` in state space."""

    lo: tuple
    hi: tuple

    @classmethod
    def cube(cls, half_width: float, center=(0.0, 0.0, 0.0)) -> "Box":
        c = np.asarray(center, dtype=float)
        return cls(tuple(c - half_width), tuple(c + half_width))

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def contains(self, x, pad: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.asarray(self.lo) - pad) and np.all(x <= np.asarray(self.hi) + pad))

    def grid(self, n: int) -> np.ndarray:
        axes = [np.linspace(a, b, n) for a, b in zip(self.lo, self.hi)]
        return np.array(list(itertools.product(*axes)))


DEFAULT_BOX = Box.cube(10.0)


class VectorField:
    """Base class. Subclasses implement ``eval`` and ``jacobian`` in closed form."""

    kind = "abstract"
    box: Box

    def eval(self, x) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x) -> np.ndarray:
        raise NotImplementedError

    def divergence(self, x) -> float:
        return float(np.trace(self.jacobian(x)))

    def negated(self) -> "VectorField":
        return NegatedField(self)

    def params(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class LorenzField(VectorField):
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0
    box: Box = field(default_factory=lambda: Box((-30.0, -30.0, -5.0), (30.0, 30.0, 60.0)))

    kind = "lorenz"

    def eval(self, x) -> np.ndarray:
        x0, x1, x2 = x
        return np.array([
            self.sigma * (x1 - x0),
            x0 * (self.rho - x2) - x1,
            x0 * x1 - self.beta * x2,
        ])

    def jacobian(self, x) -> np.ndarray:
        x0, x1, x2 = x
        return np.array([
            [-self.sigma, self.sigma, 0.0],
            [self.rho - x2, -1.0, -x0],
            [x1, x0, -self.beta],
        ])

    def divergence(self, x) -> float:
        return -self.sigma - 1.0 - self.beta

    def params(self) -> dict:
        return {"sigma": self.sigma, "rho": self.rho, "beta": self.beta}


@dataclass(frozen=True, eq=False)
class LinearField(VectorField):
    matrix: np.ndarray
    box: Box = DEFAULT_BOX

    kind = "linear"

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.shape != (3, 3):
            raise ValueError("linear field needs a 3x3 matrix")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    def eval(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)

    def jacobian(self, x) -> np.ndarray:
        return self.matrix.copy()

    def divergence(self, x) -> float:
        return float(np.trace(self.matrix))

    def params(self) -> dict:
        return {"matrix": self.matrix.tolist()}


def _monomial_terms(component) -> tuple:
    terms = []
    for coef, powers in component:
        powers = tuple(int(p) for p in powers)
        if len(powers) != 3 or min(powers) < 0:
            raise ValueError(f"bad exponent tuple {powers!r}")
        if sum(powers) > MAX_DEGREE:
            raise ValueError(f"monomial degree {sum(powers)} exceeds {MAX_DEGREE}")
        c = float(coef)
        if not math.isfinite(c):
            raise ValueError("non-finite coefficient")
        terms.append((c, powers))
    return tuple(terms)


@dataclass(frozen=True)
class PolynomialField(VectorField):
    """Each component is a list of ``(coefficient, (i, j, k))`` for ``c x^i y^j z^k``."""

    components: tuple
    box: Box = DEFAULT_BOX

    kind = "polynomial"

    def __post_init__(self):
        if len(self.components) != 3:
            raise ValueError("polynomial field needs exactly 3 components")
        object.__setattr__(self, "components", tuple(_monomial_terms(c) for c in self.components))

    @property
    def degree(self) -> int:
        return max((sum(p) for comp in self.components for _, p in comp), default=0)

    def eval(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(3)
        for k, comp in enumerate(self.components):
            out[k] = sum(c * x[0] ** p[0] * x[1] ** p[1] * x[2] ** p[2] for c, p in comp)
        return out

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        jac = np.zeros((3, 3))
        for k, comp in enumerate(self.components):
            for c, p in comp:
                for d in range(3):
                    if p[d] == 0:
                        continue
                    q = list(p)
                    q[d] -= 1
                    jac[k, d] += c * p[d] * x[0] ** q[0] * x[1] ** q[1] * x[2] ** q[2]
        return jac

    def params(self) -> dict:
        return {"components": [[[c, list(p)] for c, p in comp] for comp in self.components]}


@dataclass(frozen=True, eq=False)
class NegatedField(VectorField):
    """The time-reversed field ``-X``."""

    base: VectorField

    kind = "negated"

    @property
    def box(self) -> Box:
        return self.base.box

    def eval(self, x) -> np.ndarray:
        return -self.base.eval(x)

    def jacobian(self, x) -> np.ndarray:
        return -self.base.jacobian(x)

    def divergence(self, x) -> float:
        return -self.base.divergence(x)

    def negated(self) -> VectorField:
        return self.base

    def params(self) -> dict:
        return {"base": {"kind": self.base.kind, **self.base.params()}}


def eval_field(f: VectorField, x) -> np.ndarray:
    return f.eval(x)


def eval_jacobian(f: VectorField, x) -> np.ndarray:
    return f.jacobian(x)


# --- singularities -----------------------------------------------------------

NEWTON_GRID = 9
NEWTON_MAX_ITER = 50
DEDUP_FACTOR = 10.0


class RootList(list):
    """List of roots that also remembers how many Newton seeds were skipped."""

    skipped_seeds: int = 0


def _newton(f: VectorField, x0: np.ndarray, tol: float) -> Optional[np.ndarray]:
    x = x0.copy()
    for _ in range(NEWTON_MAX_ITER):
        fx = f.eval(x)
        if np.linalg.norm(fx) < tol:
            # one extra polish step; harmless when already converged
            jac = f.jacobian(x)
            try:
                x_new = x - np.linalg.solve(jac, fx)
                if np.linalg.norm(f.eval(x_new)) <= np.linalg.norm(fx):
                    x = x_new
            except np.linalg.LinAlgError:
                pass
            return x
        jac = f.jacobian(x)
        if np.linalg.cond(jac) > 1e13:
            raise SingularJacobian(f"singular Jacobian at {x}")
        x = x - np.linalg.solve(jac, fx)
        if not np.all(np.isfinite(x)):
            return None
    return None


def find_singularities(f: VectorField, box: Optional[Box] = None, tol: float = 1e-9) -> RootList:
    """Newton from a 9x9x9 grid of seeds; roots deduplicated at radius ``10*tol``.

    Only roots lying in ``box`` are kept. Seeds where Newton meets a singular
    Jacobian are skipped and counted in ``skipped_seeds``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    box = box or f.box
    radius = DEDUP_FACTOR * tol
    roots = RootList()
    skipped = 0
    for seed in box.grid(NEWTON_GRID):
        try:
            r = _newton(f, seed, tol)
        except SingularJacobian:
            skipped += 1
            continue
        if r is None or not box.contains(r, pad=radius):
            continue
        if np.linalg.norm(f.eval(r)) >= tol:
            continue
        if all(np.linalg.norm(r - q) >= radius for q in roots):
            roots.append(r)
    roots.sort(key=lambda p: tuple(np.round(p, 9)))
    roots.skipped_seeds = skipped
    return roots


@dataclass
class SingularityInfo:
    location: np.ndarray
    eigenvalues: np.ndarray  # complex, sorted by real part
    eigenvectors: list  # unit real vectors, None for non-real eigenvalues
    hyperbolic: bool
    simple_real: bool
    lorenz_like_forward: bool
    lorenz_like_backward: bool

    def real_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues.real

    def eigenvector(self, i: int) -> np.ndarray:
        v = self.eigenvectors[i]
        if v is None:
            raise ValueError(f"eigenvalue {i} is not real")
        return v

    def to_dict(self) -> dict:
        return {
            "location": self.location.tolist(),
            "eigenvalues_real": self.eigenvalues.real.tolist(),
            "eigenvalues_imag": self.eigenvalues.imag.tolist(),
            "eigenvectors": [None if v is None else v.tolist() for v in self.eigenvectors],
            "hyperbolic": self.hyperbolic,
            "simple_real": self.simple_real,
            "lorenz_like_forward": self.lorenz_like_forward,
            "lorenz_like_backward": self.lorenz_like_backward,
        }


def sign_normalize(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so its largest-magnitude component is positive."""
    return -v if v[np.argmax(np.abs(v))] < 0 else v


def _lorenz_like(lams: Sequence[float]) -> bool:
    l1, l2, l3 = sorted(lams)
    return l1 < l2 < 0 < l3 and l2 + l3 > 0 and -l1 > l3


def classify_singularity(f: VectorField, sigma, tol: float = 1e-9) -> SingularityInfo:
    sigma = np.asarray(sigma, dtype=float)
    if np.linalg.norm(f.eval(sigma)) >= tol:
        raise NotASingularity(f"|X(sigma)| >= {tol}")
    lams, vecs = np.linalg.eig(f.jacobian(sigma))
    order = np.lexsort((lams.imag, lams.real))
    lams, vecs = lams[order], vecs[:, order]
    is_real = np.abs(lams.imag) < tol * (1.0 + np.abs(lams))
    lams = np.where(is_real, lams.real + 0j, lams)
    eigvecs = []
    for k in range(3):
        if is_real[k]:
            v = vecs[:, k].real
            eigvecs.append(sign_normalize(v / np.linalg.norm(v)))
        else:
            eigvecs.append(None)
    hyperbolic = bool(np.all(np.abs(lams.real) > tol))
    scale = 1.0 + np.max(np.abs(lams))
    separated = all(abs(lams[i] - lams[j]) > tol * scale for i in range(3) for j in range(i + 1, 3))
    simple_real = bool(np.all(is_real) and separated)
    if simple_real:
        m = np.column_stack(eigvecs)
        simple_real = bool(np.linalg.matrix_rank(m, tol=1e-10) == 3)
    re = lams.real
    return SingularityInfo(
        location=sigma,
        eigenvalues=lams,
        eigenvectors=eigvecs,
        hyperbolic=hyperbolic,
        simple_real=simple_real,
        lorenz_like_forward=simple_real and _lorenz_like(re),
        lorenz_like_backward=simple_real and _lorenz_like(-re),
    )
