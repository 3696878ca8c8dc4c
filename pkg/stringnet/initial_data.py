"""
Catalog of analytic initial profiles.

Each profile evaluates its value and first two spatial derivatives exactly,
so the characteristic buffers are built without finite differences.
"""
import logging
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial as _NumpyPolynomial

from .errors import IncompatibleInitialData, InvalidProfile
from .network import BoundaryKind, NetworkTree

logger = logging.getLogger(__name__)

CONTINUITY_TOLERANCE = 1e-12
GAUSSIAN_SUPPORT_WIDTHS = 8.0


class Profile:
    """A smooth function on ``[0, 1]`` with analytic derivatives."""

    def value(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, x: np.ndarray, order: int = 1) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Zero(Profile):

    def value(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def derivative(self, x, order=1):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class GaussianBump(Profile):
    """``amplitude * exp(-(x - center)^2 / (2 width^2))``, negligible outside ``center +- 8 width``."""
    center: float
    width: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.width <= 0:
            raise InvalidProfile(f"gaussian width must be positive, got {self.width}")
        reach = GAUSSIAN_SUPPORT_WIDTHS * self.width
        if self.center - reach < 0.0 or self.center + reach > 1.0:
            raise InvalidProfile(
                f"gaussian at {self.center} with width {self.width} leaks out of the edge; "
                f"keep center +- {GAUSSIAN_SUPPORT_WIDTHS:g} widths inside [0, 1]"
            )

    def value(self, x):
        z = (np.asarray(x, dtype=float) - self.center) / self.width
        return self.amplitude * np.exp(-0.5 * z * z)

    def derivative(self, x, order=1):
        z = (np.asarray(x, dtype=float) - self.center) / self.width
        g = self.amplitude * np.exp(-0.5 * z * z)
        if order == 1:
            return -z * g / self.width
        if order == 2:
            return (z * z - 1.0) * g / self.width ** 2
        raise ValueError(f"unsupported derivative order {order}")


@dataclass(frozen=True)
class SineMode(Profile):
    """``amplitude * sin(m pi x)``."""
    mode: int
    amplitude: float = 1.0

    def value(self, x):
        return self.amplitude * np.sin(self.mode * np.pi * np.asarray(x, dtype=float))

    def derivative(self, x, order=1):
        w = self.mode * np.pi
        x = np.asarray(x, dtype=float)
        if order == 1:
            return self.amplitude * w * np.cos(w * x)
        if order == 2:
            return -self.amplitude * w * w * np.sin(w * x)
        raise ValueError(f"unsupported derivative order {order}")


@dataclass(frozen=True)
class Polynomial(Profile):
    """Coefficients in increasing degree."""
    coefficients: Tuple[float, ...]

    def __post_init__(self):
        if len(self.coefficients) == 0:
            raise InvalidProfile("polynomial needs at least one coefficient")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    def value(self, x):
        return _NumpyPolynomial(self.coefficients)(np.asarray(x, dtype=float))

    def derivative(self, x, order=1):
        return _NumpyPolynomial(self.coefficients).deriv(order)(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class EigenReal(Profile):
    """
    ``Re(scale * (a e^{rate x / speed} + b e^{-rate x / speed}))``, the real
    part of one edge of an eigenfunction. ``scale = rate`` gives the velocity
    component ``lambda * u``.
    """
    a: complex
    b: complex
    rate: complex
    speed: float
    scale: complex = 1.0

    def _terms(self, x, order):
        x = np.asarray(x, dtype=float)
        w = self.rate / self.speed
        plus = self.a * np.exp(w * x)
        minus = self.b * np.exp(-w * x)
        return np.real(self.scale * w ** order * (plus + (-1) ** order * minus))

    def value(self, x):
        return self._terms(x, 0)

    def derivative(self, x, order=1):
        return self._terms(x, order)


@dataclass(frozen=True)
class Combination(Profile):
    """Linear combination ``sum(weight * profile)``."""
    terms: Tuple[Tuple[float, Profile], ...]

    def value(self, x):
        return sum((w * p.value(x) for w, p in self.terms), np.zeros_like(np.asarray(x, dtype=float)))

    def derivative(self, x, order=1):
        return sum((w * p.derivative(x, order) for w, p in self.terms), np.zeros_like(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class EdgeData:
    displacement: Profile = field(default_factory=Zero)
    """u0 on the edge."""
    velocity: Profile = field(default_factory=Zero)
    """u1 on the edge."""


@dataclass(frozen=True)
class InitialDataSpec:
    """Per-edge initial data; ``edges[i-1]`` belongs to edge ``i``."""
    edges: Tuple[EdgeData, ...]

    @classmethod
    def zero(cls, edge_count: int) -> "InitialDataSpec":
        return cls(edges=tuple(EdgeData() for _ in range(edge_count)))

    @classmethod
    def on_edges(cls, edge_count: int, **per_edge: EdgeData) -> "InitialDataSpec":
        """Zero everywhere except the edges named ``e<i>``, e.g. ``on_edges(3, e1=EdgeData(...))``."""
        edges = [EdgeData() for _ in range(edge_count)]
        for key, data in per_edge.items():
            edges[int(key.lstrip("e")) - 1] = data
        return cls(edges=tuple(edges))

    @classmethod
    def from_eigenfunction(cls, fn, amplitude: float = 1.0) -> "InitialDataSpec":
        """
        Real part of an eigenpair ``amplitude * (u, lambda u)``.

        :param fn: an :class:`stringnet.spectrum.EigenFunctionSamples`.
        """
        lam = complex(fn.eigenvalue)
        edges = []
        for a, b, c in zip(fn.a, fn.b, fn.speeds):
            edges.append(EdgeData(
                displacement=EigenReal(a=complex(a), b=complex(b), rate=lam, speed=float(c),
                                       scale=amplitude),
                velocity=EigenReal(a=complex(a), b=complex(b), rate=lam, speed=float(c),
                                   scale=amplitude * lam),
            ))
        return cls(edges=tuple(edges))

    def combine(self, weight: float, other: "InitialDataSpec", other_weight: float) -> "InitialDataSpec":
        """``weight * self + other_weight * other`` edge by edge."""
        if len(self.edges) != len(other.edges):
            raise InvalidProfile(f"cannot combine data on {len(self.edges)} and {len(other.edges)} edges")
        return InitialDataSpec(edges=tuple(
            EdgeData(
                displacement=Combination(((weight, mine.displacement), (other_weight, theirs.displacement))),
                velocity=Combination(((weight, mine.velocity), (other_weight, theirs.velocity))),
            )
            for mine, theirs in zip(self.edges, other.edges)
        ))


def check_compatibility(tree: NetworkTree, init: InitialDataSpec) -> None:
    """
    Continuity of u0 at every internal node and ``u0_1(0) = 0`` under a Dirichlet root.

    :raises IncompatibleInitialData: a node violates the conditions by more than 1e-12.
    """
    if len(init.edges) != tree.edge_count:
        raise IncompatibleInitialData(0, f"data given for {len(init.edges)} edges, tree has {tree.edge_count}")
    for n in tree.internal_nodes:
        parent_edge = n
        at_node = float(init.edges[parent_edge - 1].displacement(1.0))
        for child in tree.children[n]:
            gap = abs(float(init.edges[child - 1].displacement(0.0)) - at_node)
            if gap > CONTINUITY_TOLERANCE:
                raise IncompatibleInitialData(n, f"u0 jumps by {gap:.3e} between edge {parent_edge} and edge {child}")
    if tree.root_bc is BoundaryKind.DIRICHLET:
        at_root = abs(float(init.edges[0].displacement(0.0)))
        if at_root > CONTINUITY_TOLERANCE:
            raise IncompatibleInitialData(0, f"Dirichlet root needs u0(0) = 0, got {at_root:.3e}")
