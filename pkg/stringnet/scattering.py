"""
Junction scattering maps.

At an internal node with ``k`` incident edges the incoming characteristic
values ``(d_parent, s_child_1, ..., s_child_{k-1})`` determine the outgoing
ones ``(s_parent, d_child_1, ..., d_child_{k-1})`` through continuity

    s_1 + d_1 = s_i + d_i                                  (i = 2..k)

and the damped Kirchhoff law

    (1 - alpha) s_1 + sum(d_i) = (1 + alpha) d_1 + sum(s_i).

Children are ordered by ascending edge index.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import SingularJunction
from .network import ALPHA_TOLERANCE, BoundaryKind, NetworkTree

logger = logging.getLogger(__name__)

PIVOT_THRESHOLD = 1e-12


@dataclass(frozen=True)
class NodeScatterMatrix:
    k: int
    alpha: float
    matrix: np.ndarray
    """``k x k`` map from incoming to outgoing values; read-only."""

    def apply(self, incoming: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(incoming, dtype=float)


@dataclass(frozen=True)
class RootReflection:
    """``d(0, t) = coefficient * s(0, t)`` at the root."""
    kind: BoundaryKind
    coefficient: float


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix = np.array(matrix, dtype=float)
    matrix.setflags(write=False)
    return matrix


def _check(k: int, alpha: float):
    if k < 2:
        raise ValueError(f"a junction needs k >= 2 incident edges, got {k}")
    if abs(alpha - k) < ALPHA_TOLERANCE:
        raise SingularJunction(k, alpha)


def coupling_system(k: int, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Left and right matrices ``(L, R)`` of the junction laws written as
    ``L @ (s_1, d_2..d_k) = R @ (d_1, s_2..s_k)``.
    """
    L = np.zeros((k, k))
    R = np.zeros((k, k))
    for row, i in enumerate(range(2, k + 1)):
        L[row, 0], L[row, i - 1] = 1.0, -1.0
        R[row, 0], R[row, i - 1] = -1.0, 1.0
    L[k - 1, 0] = 1.0 - alpha
    L[k - 1, 1:] = 1.0
    R[k - 1, 0] = 1.0 + alpha
    R[k - 1, 1:] = 1.0
    return L, R


def assemble_internal(k: int, alpha: float) -> NodeScatterMatrix:
    """
    Solve the junction laws by LU factorisation with partial pivoting.

    :raises SingularJunction: ``alpha`` is within 1e-9 of ``k`` or a pivot falls below 1e-12.
    """
    _check(k, alpha)
    L, R = coupling_system(k, alpha)
    lu, piv = scipy.linalg.lu_factor(L)
    if np.min(np.abs(np.diag(lu))) < PIVOT_THRESHOLD:
        raise SingularJunction(k, alpha)
    return NodeScatterMatrix(k=k, alpha=float(alpha), matrix=_frozen(scipy.linalg.lu_solve((lu, piv), R)))


def closed_form_internal(k: int, alpha: float) -> NodeScatterMatrix:
    """
    Back-substitution form of the junction map.

    ``d_k`` comes first from ``(k - alpha) d_k = 2 d_1 + 2 sum_{i=2}^{k-1} s_i + (alpha - k + 2) s_k``,
    then ``d_i = d_{i+1} - s_i + s_{i+1}`` down to ``d_2`` and finally
    ``s_1 = d_2 - d_1 + s_2``. Rows are linear forms over ``(d_1, s_2..s_k)``.

    When ``alpha == k - 2`` every coefficient is a small integer, so the
    first row is exactly ``(0, 1, ..., 1)``.
    """
    _check(k, alpha)
    A = np.zeros((k, k))
    last = np.zeros(k)
    last[0] = 2.0
    last[1:k - 1] = 2.0
    last[k - 1] = alpha - k + 2.0
    A[k - 1] = last / (k - alpha)
    # rows 1..k-1 hold d_2..d_k; column j >= 1 is s_{j+1}
    for i in range(k - 1, 1, -1):
        A[i - 1] = A[i]
        A[i - 1, i - 1] -= 1.0
        A[i - 1, i] += 1.0
    A[0] = A[1]
    A[0, 0] -= 1.0
    A[0, 1] += 1.0
    return NodeScatterMatrix(k=k, alpha=float(alpha), matrix=_frozen(A))


@lru_cache(maxsize=256)
def cached_internal(k: int, alpha: float) -> NodeScatterMatrix:
    return closed_form_internal(k, alpha)


def junction_matrices(tree: NetworkTree) -> Dict[int, NodeScatterMatrix]:
    """One scattering map per internal node, built once per distinct ``(k, alpha)``."""
    matrices = {n: cached_internal(tree.k(n), tree.alpha(n)) for n in tree.internal_nodes}
    logger.debug(f"Junction maps for {len(matrices)} nodes, {len({(m.k, m.alpha) for m in matrices.values()})} distinct")
    return matrices


def junction_residuals(scatter: NodeScatterMatrix, incoming: Sequence[float]) -> Tuple[float, float]:
    """
    Apply ``scatter`` and measure how well the result satisfies the junction laws.

    :return: ``(continuity, kirchhoff)`` absolute residuals.
    """
    incoming = np.asarray(incoming, dtype=float)
    outgoing = scatter.apply(incoming)
    d1, s_children = incoming[0], incoming[1:]
    s1, d_children = outgoing[0], outgoing[1:]
    continuity = float(np.max(np.abs((s1 + d1) - (s_children + d_children)))) if len(s_children) else 0.0
    kirchhoff = abs((1.0 - scatter.alpha) * s1 + d_children.sum() - (1.0 + scatter.alpha) * d1 - s_children.sum())
    return continuity, float(kirchhoff)


def compatibility_defect(v_parent: float, v_children: Sequence[float], alpha: float) -> float:
    """
    ``(1 - alpha) v_parent + sum(v_children)``.

    At ``alpha == k`` a nonzero defect means the node velocities admit no
    classical solution.
    """
    return (1.0 - alpha) * v_parent + float(np.sum(v_children))


_REFLECTION = {
    BoundaryKind.DIRICHLET: -1.0,
    BoundaryKind.NEUMANN: 1.0,
    BoundaryKind.TRANSPARENT: 0.0,
}


def root_reflection(kind: BoundaryKind) -> RootReflection:
    kind = BoundaryKind(kind)
    return RootReflection(kind=kind, coefficient=_REFLECTION[kind])
