"""
Closed-form spectra of star and bone trees.

Eigenvalues form ladders ``lambda_k = lambda_0 + i c k pi`` solving
``exp(2 lambda / c) = ratio``, where the ratio depends on the junction
damping. The logarithm is taken on the plane cut along the negative
imaginary axis, with argument in ``(-pi/2, 3pi/2]``.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    BranchCut,
    DegenerateInput,
    GridTooCoarse,
    IllPosedAlpha,
    InsufficientTrace,
    NoEigenvalue,
    ZeroEnergy,
)
from .network import ALPHA_TOLERANCE, BoundaryKind, NetworkTree

logger = logging.getLogger(__name__)

BRANCH_TOLERANCE = 1e-12
MIN_GRID_POINTS = 5


@dataclass(frozen=True)
class StarGeometry:
    N: int
    alpha_1: float
    c_1: float


@dataclass(frozen=True)
class BoneGeometry:
    k_1: int
    k_2: int
    alpha_1: float
    alpha_2: float
    c_2: float


Geometry = Union[StarGeometry, BoneGeometry]


@dataclass(frozen=True)
class EigenFamily:
    """
    An eigenvalue ladder. ``base`` is None when the point spectrum is empty.
    """
    geometry: Geometry
    exists: bool
    ratio: float
    base: Optional[complex]
    spacing: complex
    k_range: Tuple[int, ...] = (0,)

    def eigenvalue(self, k: int) -> complex:
        if not self.exists:
            raise NoEigenvalue(f"{self.geometry} has no point spectrum")
        return self.base + self.spacing * k

    @property
    def ladder(self) -> List[Tuple[int, complex]]:
        if not self.exists:
            return []
        return [(k, self.eigenvalue(k)) for k in self.k_range]


@dataclass(frozen=True)
class EigenFunctionSamples:
    """
    Sampled eigenfunction ``u_i = a_i e^{lambda x/c_i} + b_i e^{-lambda x/c_i}``
    with ``v_i = lambda u_i``, on a uniform grid per edge.
    """
    eigenvalue: complex
    speeds: Tuple[float, ...]
    a: Tuple[complex, ...]
    b: Tuple[complex, ...]
    x: Tuple[np.ndarray, ...]
    u: Tuple[np.ndarray, ...]
    v: Tuple[np.ndarray, ...]


def branch_log(z: complex) -> complex:
    """
    Logarithm with argument in ``(-pi/2, 3pi/2]``.

    :raises BranchCut: ``z`` is zero or lies on the negative imaginary axis.
    """
    z = complex(z)
    if abs(z) < BRANCH_TOLERANCE:
        raise BranchCut(f"log undefined at z={z}")
    if abs(z.real) <= BRANCH_TOLERANCE and z.imag < 0:
        raise BranchCut(f"z={z} lies on the negative imaginary axis")
    w = complex(np.log(z))
    if np.angle(z) <= -np.pi / 2:
        w += 2j * np.pi
    return w


def _family(geometry: Geometry, ratio_num: float, ratio_den: float, c: float,
            k_range: Iterable[int]) -> EigenFamily:
    exists = abs(ratio_num) >= ALPHA_TOLERANCE
    ratio = ratio_num / ratio_den
    base = 0.5 * c * branch_log(ratio) if exists else None
    return EigenFamily(geometry=geometry, exists=exists, ratio=ratio, base=base,
                       spacing=1j * c * np.pi, k_range=tuple(k_range))


def star_eigenvalues(N: int, alpha_1: float, c_1: float = 1.0, k_range: Iterable[int] = range(-2, 3)) -> EigenFamily:
    """
    Ladder of a star with ``N`` edges and a Dirichlet root.

    :raises IllPosedAlpha: ``alpha_1 == N``.
    """
    if N < 2:
        raise ValueError(f"a star needs N >= 2 edges, got {N}")
    if abs(alpha_1 - N) < ALPHA_TOLERANCE:
        raise IllPosedAlpha(1, alpha_1, N)
    geometry = StarGeometry(N=N, alpha_1=float(alpha_1), c_1=float(c_1))
    return _family(geometry, N - 2 - alpha_1, N - alpha_1, c_1, k_range)


def bone_eigenvalues(k_1: int, k_2: int, alpha_1: float, alpha_2: float, c_2: float = 1.0,
                     k_range: Iterable[int] = range(-2, 3)) -> EigenFamily:
    """
    Ladder of a bone tree with a transparent root.

    :raises IllPosedAlpha: ``alpha_1 == k_1`` or ``alpha_2 == k_2``.
    """
    if k_1 < 2 or k_2 < 2:
        raise ValueError(f"bone needs k_1, k_2 >= 2, got ({k_1}, {k_2})")
    for node, alpha, k in ((1, alpha_1, k_1), (2, alpha_2, k_2)):
        if abs(alpha - k) < ALPHA_TOLERANCE:
            raise IllPosedAlpha(node, alpha, k)
    geometry = BoneGeometry(k_1=k_1, k_2=k_2, alpha_1=float(alpha_1), alpha_2=float(alpha_2), c_2=float(c_2))
    first, second = 2 + alpha_1 - k_1, 2 + alpha_2 - k_2
    # product form keeps `exists` false on either line alpha_j = k_j - 2
    numerator = 0.0 if min(abs(first), abs(second)) < ALPHA_TOLERANCE else first * second
    return _family(geometry, numerator, (alpha_1 - k_1) * (alpha_2 - k_2), c_2, k_range)


def bone_finite_time_stable(k_1: int, k_2: int, alpha_1: float, alpha_2: float) -> bool:
    """Whether every bone solution becomes constant in finite time."""
    if abs(alpha_1 - k_1) < ALPHA_TOLERANCE or abs(alpha_2 - k_2) < ALPHA_TOLERANCE:
        return False
    return abs(alpha_1 - (k_1 - 2)) < ALPHA_TOLERANCE or abs(alpha_2 - (k_2 - 2)) < ALPHA_TOLERANCE


def stability_class(family: EigenFamily) -> str:
    """``finite-time``, ``decaying``, ``neutral`` or ``growing`` from the sign of Re lambda_0."""
    if not family.exists:
        return "finite-time"
    modulus = abs(family.ratio)
    if abs(modulus - 1.0) < BRANCH_TOLERANCE:
        return "neutral"
    return "decaying" if modulus < 1.0 else "growing"


# --- Eigenfunctions ---

def _sample(eigenvalue: complex, speeds: Sequence[float], a: Sequence[complex], b: Sequence[complex],
            samples_per_edge: int) -> EigenFunctionSamples:
    if samples_per_edge < MIN_GRID_POINTS:
        raise GridTooCoarse(f"need at least {MIN_GRID_POINTS} samples per edge, got {samples_per_edge}")
    x = np.linspace(0.0, 1.0, samples_per_edge)
    us = tuple(ai * np.exp(eigenvalue * x / c) + bi * np.exp(-eigenvalue * x / c) for ai, bi, c in zip(a, b, speeds))
    return EigenFunctionSamples(
        eigenvalue=complex(eigenvalue),
        speeds=tuple(float(c) for c in speeds),
        a=tuple(complex(v) for v in a),
        b=tuple(complex(v) for v in b),
        x=tuple(x.copy() for _ in speeds),
        u=us,
        v=tuple(eigenvalue * u for u in us),
    )


def star_eigenfunction(family: EigenFamily, k: int, samples_per_edge: int = 101,
                       speeds: Optional[Sequence[float]] = None) -> EigenFunctionSamples:
    """
    ``u_1 = e^{lx/c_1} - e^{-lx/c_1}`` on the root edge and
    ``u_i = (e^{l/c_1} - e^{-l/c_1}) e^{-lx/c_i}`` on the pendant edges.

    :param speeds: speeds of all ``N`` edges; defaults to ``c_1`` everywhere.
    :raises NoEigenvalue: the family is empty.
    """
    if not isinstance(family.geometry, StarGeometry):
        raise TypeError("star_eigenfunction needs a star family")
    lam = family.eigenvalue(k)
    g = family.geometry
    speeds = tuple(speeds) if speeds is not None else (g.c_1,) * g.N
    center = np.exp(lam / g.c_1) - np.exp(-lam / g.c_1)
    a = [1.0] + [0.0] * (g.N - 1)
    b = [-1.0] + [center] * (g.N - 1)
    return _sample(lam, speeds, a, b, samples_per_edge)


def bone_eigenfunction(family: EigenFamily, c: Sequence[float], k: int,
                       samples_per_edge: int = 101) -> EigenFunctionSamples:
    """
    Eigenfunction of a bone tree normalised by ``a_1 = 1``.

    :param c: speeds of all ``k_1 + k_2 - 1`` edges in bone numbering.
    :raises NoEigenvalue: the family is empty.
    """
    if not isinstance(family.geometry, BoneGeometry):
        raise TypeError("bone_eigenfunction needs a bone family")
    g = family.geometry
    n_edges = g.k_1 + g.k_2 - 1
    if len(c) != n_edges:
        raise ValueError(f"expected {n_edges} speeds, got {len(c)}")
    lam = family.eigenvalue(k)
    e1 = np.exp(lam / c[0])
    e2 = np.exp(lam / c[1])
    a2 = -(g.alpha_1 - g.k_1) * e1 / 2.0
    b2 = e1 - a2
    at_node_2 = a2 * e2 + b2 / e2
    a = [1.0, a2] + [0.0] * (n_edges - 2)
    b = [0.0, b2] + [e1] * (g.k_1 - 2) + [at_node_2] * (g.k_2 - 1)
    return _sample(lam, c, a, b, samples_per_edge)


# --- Residual check ---

def _edge_values(fn: EigenFunctionSamples, i: int, x: float, order: int) -> complex:
    w = fn.eigenvalue / fn.speeds[i - 1]
    a, b = fn.a[i - 1], fn.b[i - 1]
    return complex(w ** order * (a * np.exp(w * x) + (-1) ** order * b * np.exp(-w * x)))


def eigen_residual(tree: NetworkTree, lam: complex, fn: EigenFunctionSamples) -> float:
    """
    Largest normalised defect of ``(fn, lam)`` as an eigenpair on ``tree``.

    Checks the interior equation ``c^2 u'' = lam^2 u`` by second differences
    (minus their truncation and round-off bound), the node and boundary laws
    with analytic derivatives, agreement of samples with the closed form and
    ``v = lam u``. Everything is divided by ``max |u|``.

    :raises GridTooCoarse: an edge has fewer than 5 samples.
    :raises DegenerateInput: ``fn`` vanishes identically.
    """
    if len(fn.u) != tree.edge_count:
        raise ValueError(f"eigenfunction has {len(fn.u)} edges, tree has {tree.edge_count}")
    if any(len(u) < MIN_GRID_POINTS for u in fn.u):
        raise GridTooCoarse(f"need at least {MIN_GRID_POINTS} samples per edge")
    scale = max(float(np.max(np.abs(u))) for u in fn.u)
    if scale == 0.0:
        raise DegenerateInput("eigenfunction is identically zero")

    lam = complex(lam)
    eps = np.finfo(float).eps
    residuals = []
    for i, (x, u, v) in enumerate(zip(fn.x, fn.u, fn.v), start=1):
        c = tree.wave_speed(i)
        h = x[1] - x[0]
        second = c * c * (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (h * h)
        envelope = (abs(fn.a[i - 1]) + abs(fn.b[i - 1])) * np.exp(abs(fn.eigenvalue.real) / c)
        bound = (2.0 * h * h / 12.0 * abs(fn.eigenvalue) ** 4 / (c * c) * envelope
                 + 64.0 * eps * (4.0 * c * c / (h * h) + abs(lam) ** 2) * scale)
        residuals.append(max(0.0, float(np.max(np.abs(second - lam * lam * u[1:-1]))) - bound))
        closed = fn.a[i - 1] * np.exp(fn.eigenvalue * x / c) + fn.b[i - 1] * np.exp(-fn.eigenvalue * x / c)
        residuals.append(float(np.max(np.abs(u - closed))))
        residuals.append(float(np.max(np.abs(v - lam * u))))

    value = lambda i, x: _edge_values(fn, i, x, 0)
    slope = lambda i, x: _edge_values(fn, i, x, 1)
    for n in tree.internal_nodes:
        for child in tree.children[n]:
            residuals.append(abs(value(child, 0.0) - value(n, 1.0)))
        flux = sum(tree.wave_speed(e) * slope(e, 0.0) for e in tree.children[n])
        flux -= tree.wave_speed(n) * slope(n, 1.0)
        residuals.append(abs(flux + tree.alpha(n) * lam * value(n, 1.0)))
    for leaf in tree.leaves:
        residuals.append(abs(tree.wave_speed(leaf) * slope(leaf, 1.0) + lam * value(leaf, 1.0)))
    if tree.root_bc is BoundaryKind.DIRICHLET:
        residuals.append(abs(value(1, 0.0)))
    elif tree.root_bc is BoundaryKind.NEUMANN:
        residuals.append(abs(slope(1, 0.0)))
    else:
        residuals.append(abs(tree.wave_speed(1) * slope(1, 0.0) - lam * value(1, 0.0)))
    return max(residuals) / scale


# --- Decay fitting ---

def decay_rate_fit(times: Sequence[float], energy: Sequence[float]) -> float:
    """
    Least-squares slope of ``ln E`` over the trailing half of an energy trace.

    :raises InsufficientTrace: fewer than 10 points.
    :raises ZeroEnergy: some energy in the trailing half is not positive.
    """
    times = np.asarray(times, dtype=float)
    energy = np.asarray(energy, dtype=float)
    if times.size < 10 or times.size != energy.size:
        raise InsufficientTrace(f"need at least 10 paired points, got {times.size} times and {energy.size} energies")
    tail = slice(times.size // 2, None)
    if np.any(energy[tail] <= 0.0):
        raise ZeroEnergy("energy vanishes in the trailing half of the trace")
    slope, _ = np.polyfit(times[tail], np.log(energy[tail]), 1)
    return float(slope)


# --- Sweeps ---

def _sweep_point(geometry: Geometry, alphas: Tuple[float, ...]) -> dict:
    if isinstance(geometry, StarGeometry):
        family = star_eigenvalues(geometry.N, alphas[0], geometry.c_1, k_range=(0,))
        row = {"alpha_1": alphas[0]}
    else:
        alpha_2 = alphas[1] if len(alphas) > 1 else geometry.alpha_2
        family = bone_eigenvalues(geometry.k_1, geometry.k_2, alphas[0], alpha_2, geometry.c_2, k_range=(0,))
        row = {"alpha_1": alphas[0], "alpha_2": alpha_2}
    row["re_lambda_0"] = family.base.real if family.exists else float("nan")
    row["exists"] = family.exists
    return row


def sweep_alpha(geometry: Geometry, grid: Sequence[Tuple[float, ...]], threads: Optional[int] = None) -> List[dict]:
    """
    Evaluate the ladder base over a grid of alpha tuples, concurrently.

    Points on the ill-posed lines are skipped. Rows come back in grid order.
    """
    def evaluate(alphas):
        try:
            return _sweep_point(geometry, tuple(alphas))
        except IllPosedAlpha as e:
            logger.warning(f"Skipping sweep point {alphas}: {e}")
            return None

    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = list(pool.map(evaluate, grid))
    return [row for row in rows if row is not None]
