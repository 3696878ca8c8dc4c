"""
Rooted tree networks of strings.

A :class:`NetworkTree` stores edges in the canonical numbering: edge ``i``
(1-based) runs from its parent node at ``x=0`` to node ``i`` at ``x=1``, and
node ``0`` is the root, touched only by edge 1. Trees are immutable; every
transformation returns a fresh value.

Usage as a module::

    from stringnet.network import star_tree, timing_report, BoundaryKind

    tree = star_tree(speeds=(1.0, 1.0, 1.0), alpha=1.0, root_bc=BoundaryKind.DIRICHLET)
    report = timing_report(tree)
    report.predicted_extinction   # 4.0
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from .errors import (
    ConditionFTSViolated,
    CycleDetected,
    DisconnectedGraph,
    IllPosedAlpha,
    NonPositiveSpeed,
    NotExternalNode,
    NumberingViolation,
    RootDegreeNotOne,
    TopologyError,
)

logger = logging.getLogger(__name__)

ALPHA_TOLERANCE = 1e-9
"""Distance below which alpha is considered equal to k or k-2."""


class BoundaryKind(str, Enum):
    """Boundary condition applied at the root. Non-root leaves are always transparent."""
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    TRANSPARENT = "transparent"


@dataclass(frozen=True)
class NetworkTree:
    """
    A tree of unit-length strings.

    :param edges: ``edges[i-1] = (initial_node, final_node)`` for edge ``i``.
    :param speeds: ``speeds[i-1] = c_i``.
    :param alphas: damping coefficient per internal node; missing nodes default to 0.
    :param root_bc: boundary condition at node 0.
    :param labels: original node label of each node, carried through re-rooting.
    """
    edges: Tuple[Tuple[int, int], ...]
    speeds: Tuple[float, ...]
    alphas: Mapping[int, float] = field(default_factory=dict)
    root_bc: BoundaryKind = BoundaryKind.TRANSPARENT
    labels: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(a), int(b)) for a, b in self.edges))
        object.__setattr__(self, "speeds", tuple(float(c) for c in self.speeds))
        object.__setattr__(self, "alphas", MappingProxyType({int(n): float(a) for n, a in dict(self.alphas).items()}))
        object.__setattr__(self, "root_bc", BoundaryKind(self.root_bc))
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(range(len(self.edges) + 1)))
        else:
            object.__setattr__(self, "labels", tuple(int(n) for n in self.labels))
        if len(self.speeds) != len(self.edges):
            raise TopologyError(f"{len(self.edges)} edges but {len(self.speeds)} speeds")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def node_count(self) -> int:
        return len(self.edges) + 1

    def parent_node(self, edge: int) -> int:
        return self.edges[edge - 1][0]

    def final_node(self, edge: int) -> int:
        return self.edges[edge - 1][1]

    def wave_speed(self, edge: int) -> float:
        return self.speeds[edge - 1]

    def travel_time(self, edge: int) -> float:
        return 1.0 / self.speeds[edge - 1]

    @cached_property
    def children(self) -> Mapping[int, Tuple[int, ...]]:
        """Edges leaving each node, in ascending edge index."""
        result: Dict[int, List[int]] = {n: [] for n in range(self.node_count)}
        for i, (a, _) in enumerate(self.edges, start=1):
            result.setdefault(a, []).append(i)
        return MappingProxyType({n: tuple(sorted(e)) for n, e in result.items()})

    def k(self, node: int) -> int:
        """Number of edges incident to an internal node."""
        return len(self.children[node]) + 1

    def alpha(self, node: int) -> float:
        return self.alphas.get(node, 0.0)

    @cached_property
    def internal_nodes(self) -> Tuple[int, ...]:
        return tuple(n for n in range(1, self.node_count) if self.children[n])

    @cached_property
    def leaves(self) -> Tuple[int, ...]:
        """External nodes other than the root."""
        return tuple(n for n in range(1, self.node_count) if not self.children[n])

    @cached_property
    def external_nodes(self) -> Tuple[int, ...]:
        return (0,) + self.leaves

    @cached_property
    def preorder(self) -> Tuple[int, ...]:
        """Edges in depth-first order from the root, children by ascending index."""
        order, stack = [], [1] if self.edges else []
        while stack:
            e = stack.pop()
            order.append(e)
            stack.extend(reversed(self.children.get(self.final_node(e), ())))
        return tuple(order)

    def node_of_label(self, label: int) -> int:
        return self.labels.index(label)

    def graph(self) -> nx.MultiGraph:
        """Undirected multigraph view, edge attributes ``index`` and ``speed``."""
        g = nx.MultiGraph()
        g.add_nodes_from(range(self.node_count))
        for i, (a, b) in enumerate(self.edges, start=1):
            g.add_edge(a, b, index=i, speed=self.speeds[i - 1])
        return g


@dataclass(frozen=True)
class TimingReport:
    """Clearing times and the extinction horizons derived from them."""
    t: Mapping[int, float]
    """Clearing time per edge."""
    T_root: float
    """T(R) = t_1."""
    T_tree: float
    """T(T), the largest root time over all rootings at external nodes."""
    leaf_times: Mapping[int, float]
    """T(R) of the tree re-rooted at each non-root leaf, keyed by leaf label."""
    predicted_extinction: Optional[float] = None
    """Predicted extinction time when every alpha_n equals k_n - 2, otherwise None."""


# --- Validation ---

def validate_tree(tree: NetworkTree) -> None:
    """
    Check topology, numbering, speeds and the well-posedness gate.

    :raises CycleDetected: the edge list contains a cycle (duplicated edges included).
    :raises DisconnectedGraph: some node cannot be reached from the root.
    :raises RootDegreeNotOne: node 0 is not touched exactly once, by edge 1.
    :raises NumberingViolation: edge ``i`` does not end at node ``i`` or points toward the root.
    :raises NonPositiveSpeed: some ``c_i <= 0``.
    :raises IllPosedAlpha: ``alpha_n == k_n`` at an internal node.
    """
    g = tree.graph()
    if nx.number_of_selfloops(g) or not nx.is_forest(g):
        raise CycleDetected(f"edge list of {tree.edge_count} edges over {tree.node_count} nodes contains a cycle")
    if not nx.is_connected(g):
        raise DisconnectedGraph(f"{nx.number_connected_components(g)} connected components")
    if g.degree(0) != 1 or 0 not in tree.edges[0]:
        raise RootDegreeNotOne(f"root has degree {g.degree(0)}; it must be touched only by edge 1")

    depth = nx.single_source_shortest_path_length(g, 0)
    for i, (a, b) in enumerate(tree.edges, start=1):
        if b != i:
            raise NumberingViolation(i, f"final node is {b}, expected {i}")
        if depth[a] >= depth[b]:
            raise NumberingViolation(i, "edge points toward the root")
    for i, c in enumerate(tree.speeds, start=1):
        if not np.isfinite(c) or c <= 0.0:
            raise NonPositiveSpeed(i, c)

    for n in tree.internal_nodes:
        if abs(tree.alpha(n) - tree.k(n)) < ALPHA_TOLERANCE:
            raise IllPosedAlpha(n, tree.alpha(n), tree.k(n))
    stray = sorted(set(tree.alphas) - set(tree.internal_nodes))
    if stray:
        logger.warning(f"Ignoring alphas given on external nodes {stray}")
    logger.debug(f"Validated tree with {tree.edge_count} edges, internal nodes {tree.internal_nodes}")


# --- Timing functionals ---

def edge_times(tree: NetworkTree) -> Dict[int, float]:
    """
    Clearing time of every edge: ``t_i = 1/c_i + max(t_j for j in I_i)``, the
    max being 0 for edges ending at a leaf.
    """
    t: Dict[int, float] = {}
    for e in reversed(tree.preorder):
        below = [t[j] for j in tree.children[tree.final_node(e)]]
        t[e] = tree.travel_time(e) + (max(below) if below else 0.0)
    return dict(sorted(t.items()))


def root_time(tree: NetworkTree) -> float:
    """T(R) = t_1."""
    return edge_times(tree)[1]


def root_paths(tree: NetworkTree) -> List[Tuple[Tuple[int, ...], float]]:
    """Every root-to-leaf edge path with its summed travel time."""
    paths = []

    def walk(edge: int, path: Tuple[int, ...], elapsed: float):
        path, elapsed = path + (edge,), elapsed + tree.travel_time(edge)
        below = tree.children[tree.final_node(edge)]
        if not below:
            paths.append((path, elapsed))
        for child in below:
            walk(child, path, elapsed)

    walk(1, (), 0.0)
    return paths


def depth(tree: NetworkTree) -> int:
    """Number of edges on the longest root-to-leaf path."""
    return max(len(p) for p, _ in root_paths(tree))


def reroot(tree: NetworkTree, leaf: int, root_bc: Optional[BoundaryKind] = None) -> NetworkTree:
    """
    Re-root ``tree`` at the external node ``leaf`` and renumber it canonically.

    Nodes are renumbered by a depth-first walk from the new root that visits
    child edges in ascending original edge index. Speeds stay with their edges,
    alphas and labels with their nodes.

    :param leaf: node index (in ``tree``'s numbering) of the new root.
    :param root_bc: boundary condition of the new root; defaults to ``tree.root_bc``.
    :raises NotExternalNode: ``leaf`` is not an external node.
    """
    if leaf not in tree.external_nodes:
        raise NotExternalNode(leaf)

    # adjacency follows insertion order, so edges go in by ascending index
    g = nx.Graph()
    g.add_node(leaf)
    for i, (a, b) in enumerate(tree.edges, start=1):
        g.add_edge(a, b, index=i)

    new_index = {leaf: 0}
    edges, speeds = [], []
    for position, (a, b) in enumerate(nx.dfs_edges(g, source=leaf), start=1):
        new_index[b] = position
        edges.append((new_index[a], position))
        speeds.append(tree.speeds[g.edges[a, b]["index"] - 1])

    old_of = {new: old for old, new in new_index.items()}
    labels = tuple(tree.labels[old_of[n]] for n in range(tree.node_count))
    alphas = {new_index[n]: a for n, a in tree.alphas.items() if n in tree.internal_nodes}
    return NetworkTree(
        edges=tuple(edges),
        speeds=tuple(speeds),
        alphas=alphas,
        root_bc=tree.root_bc if root_bc is None else root_bc,
        labels=labels,
    )


def leaf_times(tree: NetworkTree) -> Dict[int, float]:
    """T(R) of the tree re-rooted at each non-root leaf, keyed by the leaf's label."""
    return {tree.labels[n]: root_time(reroot(tree, n)) for n in tree.leaves}


def tree_time(tree: NetworkTree) -> float:
    """T(T): the largest root time over all rootings at external nodes."""
    return max([root_time(tree)] + list(leaf_times(tree).values()))


def satisfies_fts(tree: NetworkTree) -> bool:
    """True when ``alpha_n == k_n - 2`` at every internal node."""
    return all(abs(tree.alpha(n) - (tree.k(n) - 2)) < ALPHA_TOLERANCE for n in tree.internal_nodes)


def predicted_extinction(tree: NetworkTree) -> float:
    """
    Time after which every solution is constant (zero under a Dirichlet root).

    :return: ``2*T(R)`` for a Dirichlet or Neumann root, ``T(T)`` for a transparent root.
    :raises ConditionFTSViolated: some internal node has ``alpha_n != k_n - 2``.
    """
    for n in tree.internal_nodes:
        if abs(tree.alpha(n) - (tree.k(n) - 2)) >= ALPHA_TOLERANCE:
            raise ConditionFTSViolated(n, tree.alpha(n), tree.k(n))
    if tree.root_bc is BoundaryKind.TRANSPARENT:
        return tree_time(tree)
    return 2.0 * root_time(tree)


def star_transparent_extinction(tree: NetworkTree) -> float:
    """
    Extinction horizon of a star with a transparent root, valid for any
    well-posed alpha at the center: ``2 * max(1/c_i)``.

    :raises TopologyError: the tree is not a star with a transparent root.
    """
    if tree.internal_nodes != (1,) or tree.root_bc is not BoundaryKind.TRANSPARENT:
        raise TopologyError("expected a star (single internal node 1) with a transparent root")
    return 2.0 * max(1.0 / c for c in tree.speeds)


def timing_report(tree: NetworkTree) -> TimingReport:
    validate_tree(tree)
    t = edge_times(tree)
    per_leaf = leaf_times(tree)
    predicted = predicted_extinction(tree) if satisfies_fts(tree) else None
    report = TimingReport(
        t=MappingProxyType(t),
        T_root=t[1],
        T_tree=max([t[1]] + list(per_leaf.values())),
        leaf_times=MappingProxyType(per_leaf),
        predicted_extinction=predicted,
    )
    logger.info(f"T(R)={report.T_root}, T(T)={report.T_tree}, predicted extinction={predicted}")
    return report


# --- Factories ---

Speeds = Union[float, Sequence[float]]


def _speeds(speeds: Speeds, count: int) -> Tuple[float, ...]:
    if np.isscalar(speeds):
        return (float(speeds),) * count
    speeds = tuple(float(c) for c in speeds)
    if len(speeds) != count:
        raise TopologyError(f"expected {count} speeds, got {len(speeds)}")
    return speeds


def from_parents(parents: Sequence[int], speeds: Speeds = 1.0, alphas: Optional[Mapping[int, float]] = None,
                 root_bc: BoundaryKind = BoundaryKind.TRANSPARENT) -> NetworkTree:
    """Build a tree from ``parents[i-1]``, the initial node of edge ``i``."""
    edges = tuple((p, i) for i, p in enumerate(parents, start=1))
    return NetworkTree(edges=edges, speeds=_speeds(speeds, len(edges)), alphas=alphas or {}, root_bc=root_bc)


def fts_alphas(tree: NetworkTree) -> Dict[int, float]:
    """``alpha_n = k_n - 2`` at every internal node."""
    return {n: float(tree.k(n) - 2) for n in tree.internal_nodes}


def with_alphas(tree: NetworkTree, alphas: Mapping[int, float]) -> NetworkTree:
    return NetworkTree(edges=tree.edges, speeds=tree.speeds, alphas=alphas, root_bc=tree.root_bc, labels=tree.labels)


def with_root_bc(tree: NetworkTree, root_bc: BoundaryKind) -> NetworkTree:
    return NetworkTree(edges=tree.edges, speeds=tree.speeds, alphas=tree.alphas, root_bc=root_bc, labels=tree.labels)


def chain_tree(speeds: Sequence[float], alphas: Optional[Mapping[int, float]] = None,
               root_bc: BoundaryKind = BoundaryKind.TRANSPARENT) -> NetworkTree:
    """Edges in series; every inner node is unary (k=2)."""
    return from_parents(list(range(len(speeds))), speeds, alphas, root_bc)


def star_tree(speeds: Sequence[float], alpha: float = 0.0,
              root_bc: BoundaryKind = BoundaryKind.TRANSPARENT) -> NetworkTree:
    """
    Star with ``N = len(speeds)`` edges: edge 1 joins the root to the center
    node 1, edges 2..N are pendant at node 1.
    """
    n = len(speeds)
    if n < 2:
        raise TopologyError("a star needs at least two edges")
    return from_parents([0] + [1] * (n - 1), speeds, {1: alpha}, root_bc)


def bone_tree(k1: int, k2: int, speeds: Speeds = 1.0, alpha1: float = 0.0, alpha2: float = 0.0,
              root_bc: BoundaryKind = BoundaryKind.TRANSPARENT) -> NetworkTree:
    """
    Two internal nodes joined by a bridge.

    Edge 1 is the root edge, edge 2 the bridge from node 1 to node 2, edges
    ``3..k1`` are pendant at node 1 and edges ``k1+1..k1+k2-1`` at node 2.
    """
    if k1 < 2 or k2 < 2:
        raise TopologyError(f"bone needs k1, k2 >= 2, got ({k1}, {k2})")
    parents = [0, 1] + [1] * (k1 - 2) + [2] * (k2 - 1)
    return from_parents(parents, _speeds(speeds, len(parents)), {1: alpha1, 2: alpha2}, root_bc)


FOURTEEN_NODE_PARENTS = (0, 1, 1, 2, 2, 3, 5, 5, 5, 6, 6, 7, 7)


def fourteen_node_tree(speeds: Speeds = 1.0, alphas: Optional[Mapping[int, float]] = None,
                       root_bc: BoundaryKind = BoundaryKind.TRANSPARENT) -> NetworkTree:
    """
    Thirteen-edge reference tree of depth 5 with a unary node (3).

    With unit speeds T(R) = 5 and T(T) = 7. ``alphas=None`` picks ``k_n - 2``.
    """
    tree = from_parents(FOURTEEN_NODE_PARENTS, speeds, {}, root_bc)
    return with_alphas(tree, fts_alphas(tree) if alphas is None else alphas)
