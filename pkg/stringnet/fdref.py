"""
Second-order finite-difference reference solver for the displacement.

Leapfrog in the interior of every edge. A node ``U`` owns a half cell on each
incident edge; integrating ``u_tt / c = (c u_x)_x`` over those half cells gives

    m U_tt = sum_e c_e (a_e - U) / h - beta U_t,    m = (h / 2) sum_e 1 / c_e

where ``a_e`` is the first inward neighbour on incident edge ``e``. ``beta`` is
``-alpha_n`` at internal nodes, ``+1`` at transparent ends and ``0`` at a
Neumann root; Dirichlet ends are pinned to zero. ``U_tt`` and ``U_t`` are
centred at the current level, which is the ghost-point closure and keeps
second order at every node.

The implicit factor ``m / dt^2 - alpha_n / (2 dt)`` can only vanish when
``alpha_n > k_n``; the derived time step is capped to keep it at least half
of ``m / dt^2``.

This solver is an oracle for the characteristics engine and is never used
by it.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .charsim import SimReport, Snapshot
from .errors import CourantViolation, StringNetError
from .initial_data import InitialDataSpec, check_compatibility
from .network import BoundaryKind, NetworkTree, validate_tree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FdConfig:
    points_per_edge: int = 200
    """Grid intervals P per edge; spacing h = 1/P."""
    horizon: float = 1.0
    courant: float = 0.5
    """Target max c dt / h when ``dt`` is not given."""
    dt: Optional[float] = None
    stride: int = 1
    far_end_bc: BoundaryKind = BoundaryKind.TRANSPARENT
    """Condition at non-root leaves; Dirichlet is only meant for classical checks."""
    snapshot_times: Tuple[float, ...] = ()

    def timestep(self, tree: NetworkTree) -> float:
        """
        ``dt`` as given, or ``courant h / max c`` capped so that every node with
        ``alpha_n > 0`` keeps ``h sum_e 1/c_e >= 2 alpha_n dt``.
        """
        if self.dt is not None:
            return float(self.dt)
        h = 1.0 / self.points_per_edge
        dt = self.courant * h / max(tree.speeds)
        for n in tree.internal_nodes:
            alpha = tree.alpha(n)
            if alpha > 0.0:
                slowness = sum(1.0 / tree.wave_speed(e) for e in (n,) + tuple(tree.children[n]))
                dt = min(dt, h * slowness / (2.0 * alpha))
        return dt


@dataclass(frozen=True)
class _NodeStencil:
    node: int
    pinned: bool
    beta: float
    rows: np.ndarray
    """Edge rows incident to the node."""
    ends: np.ndarray
    """Column of the node on each row (0 or P)."""
    first: np.ndarray
    """Column of the first inward neighbour on each row."""
    speeds: np.ndarray
    mass: float
    """Half-cell mass ``(h / 2) sum_e 1 / c_e``."""


def _stencils(tree: NetworkTree, P: int, far_end_bc: BoundaryKind) -> List[_NodeStencil]:
    h = 1.0 / P

    def make(node, pinned, beta, incident):
        rows = np.array([e - 1 for e, _ in incident])
        at_start = np.array([start for _, start in incident])
        ends = np.where(at_start, 0, P)
        speeds = np.array([tree.wave_speed(e) for e, _ in incident])
        return _NodeStencil(node=node, pinned=pinned, beta=beta, rows=rows, ends=ends,
                            first=ends + np.where(at_start, 1, -1), speeds=speeds,
                            mass=0.5 * h * float(np.sum(1.0 / speeds)))

    stencils = [make(0, tree.root_bc is BoundaryKind.DIRICHLET,
                     0.0 if tree.root_bc is BoundaryKind.NEUMANN else 1.0, [(1, True)])]
    for n in tree.internal_nodes:
        stencils.append(make(n, False, -tree.alpha(n), [(n, False)] + [(e, True) for e in tree.children[n]]))
    for leaf in tree.leaves:
        stencils.append(make(leaf, far_end_bc is BoundaryKind.DIRICHLET, 1.0, [(leaf, False)]))
    return stencils


def _flux(st: _NodeStencil, u: np.ndarray, h: float) -> float:
    U = u[st.rows[0], st.ends[0]]
    return float(np.sum(st.speeds * (u[st.rows, st.first] - U))) / h


def _start_nodes(stencils, first: np.ndarray, u0: np.ndarray, u1: np.ndarray, h: float, dt: float):
    """Second-order Taylor start ``U + dt V + dt^2/2 U_tt`` from the node balance."""
    for st in stencils:
        if st.pinned:
            first[st.rows, st.ends] = 0.0
            continue
        U = u0[st.rows[0], st.ends[0]]
        V = float(np.mean(u1[st.rows, st.ends]))
        accel = (_flux(st, u0, h) - st.beta * V) / st.mass
        first[st.rows, st.ends] = U + dt * V + 0.5 * dt * dt * accel


def _solve_nodes(stencils, new: np.ndarray, current: np.ndarray, previous: np.ndarray, h: float, dt: float):
    for st in stencils:
        if st.pinned:
            new[st.rows, st.ends] = 0.0
            continue
        U = current[st.rows[0], st.ends[0]]
        U_old = previous[st.rows[0], st.ends[0]]
        inertia = st.mass / (dt * dt)
        lhs = inertia + st.beta / (2.0 * dt)
        if abs(lhs) < 1e-12 * inertia:
            raise StringNetError(f"node {st.node}: dt={dt} makes the node closure singular; "
                                 f"use a smaller dt")
        rhs = inertia * (2.0 * U - U_old) + _flux(st, current, h) + st.beta * U_old / (2.0 * dt)
        new[st.rows, st.ends] = rhs / lhs


def _invariants(u_x: np.ndarray, v: np.ndarray, c: np.ndarray):
    return v + c[:, None] * u_x, v - c[:, None] * u_x


def fd_run(tree: NetworkTree, init: InitialDataSpec, cfg: FdConfig) -> SimReport:
    """
    Integrate the displacement formulation to ``cfg.horizon``.

    Traces use the same layout as :func:`stringnet.charsim.run`, with the
    invariants recovered from centred differences. No extinction is detected.

    :raises CourantViolation: ``c_i dt / h > 1`` on some edge.
    :raises StringNetError: an explicit ``dt`` makes a node closure singular.
    :raises IllPosedAlpha: inherited from tree validation.
    """
    validate_tree(tree)
    check_compatibility(tree, init)
    P = int(cfg.points_per_edge)
    if P < 3:
        raise ValueError(f"points_per_edge must be >= 3, got {P}")
    h = 1.0 / P
    dt = cfg.timestep(tree)
    c = np.array(tree.speeds)
    for i, ci in enumerate(c, start=1):
        if ci * dt / h > 1.0 + 1e-12:
            raise CourantViolation(i, ci * dt / h)

    x = np.linspace(0.0, 1.0, P + 1)
    u0 = np.array([e.displacement.value(x) for e in init.edges])
    ddu0 = np.array([e.displacement.derivative(x, 2) for e in init.edges])
    u1 = np.array([e.velocity.value(x) for e in init.edges])
    stencils = _stencils(tree, P, cfg.far_end_bc)

    current = u0 + dt * u1 + 0.5 * dt * dt * (c * c)[:, None] * ddu0
    _start_nodes(stencils, current, u0, u1, h, dt)
    previous = u0

    n_steps = int(round(cfg.horizon / dt))
    snapshot_steps = {int(round(t / dt)) for t in cfg.snapshot_times}
    r2 = ((c * dt / h) ** 2)[:, None]
    logger.info(f"FD run: P={P}, dt={dt}, {n_steps} steps, Courant {c.max() * dt / h:.3f}")

    times, energy, sup_s, sup_d, edge_sup = [], [], [], [], []
    nodes = {n: [] for n in tree.internal_nodes}
    snapshots = []

    def record(level: int, u: np.ndarray, v: np.ndarray):
        u_x = np.gradient(u, h, axis=1, edge_order=2)
        s, d = _invariants(u_x, v, c)
        density = (v * v + (c * c)[:, None] * u_x * u_x) / (2.0 * c[:, None])
        times.append(level * dt)
        energy.append(float(np.trapezoid(density, dx=h, axis=1).sum()))
        sup_s.append(float(np.abs(s).max()))
        sup_d.append(float(np.abs(d).max()))
        edge_sup.append(np.abs(s).max(axis=1))
        for n in nodes:
            nodes[n].append(float(v[n - 1, P]))
        if level in snapshot_steps:
            snapshots.append(Snapshot(t=level * dt, x=[x.copy() for _ in c], u=list(u.copy()),
                                      s=list(s), d=list(d)))

    record(0, u0, u1)
    for level in range(1, n_steps + 1):
        following = np.empty_like(current)
        following[:, 1:-1] = (2.0 * current[:, 1:-1] - previous[:, 1:-1]
                              + r2 * (current[:, 2:] - 2.0 * current[:, 1:-1] + current[:, :-2]))
        _solve_nodes(stencils, following, current, previous, h, dt)
        if level % cfg.stride == 0 or level == n_steps or level in snapshot_steps:
            record(level, current, (following - previous) / (2.0 * dt))
        previous, current = current, following

    final = [row.copy() for row in previous]
    edge_sup = np.array(edge_sup)
    return SimReport(
        times=np.array(times),
        energy=np.array(energy),
        sup_s=np.array(sup_s),
        sup_d=np.array(sup_d),
        node_velocity={n: np.array(v) for n, v in nodes.items()},
        edge_sup_s={i: edge_sup[:, i - 1] for i in range(1, tree.edge_count + 1)},
        dt=dt,
        epsilon=0.0,
        extinction_time=None,
        predicted_extinction=None,
        final_constant=float(np.mean(previous)),
        final_displacement=final,
        grids=[x.copy() for _ in c],
        snapshots=snapshots,
    )


def _snapshot_at(report: SimReport, t: float) -> Snapshot:
    for snap in report.snapshots:
        if abs(snap.t - t) <= 1e-9 * max(1.0, abs(t)):
            return snap
    raise KeyError(f"no snapshot at t={t}; add it to snapshot_times")


def compare_displacements(reference: SimReport, candidate: SimReport, times: Sequence[float]) -> List[dict]:
    """
    L2 and sup deviation of the candidate's displacement from the reference at
    each time, on the candidate's grid (reference linearly interpolated).
    """
    rows = []
    for t in times:
        ref, cand = _snapshot_at(reference, t), _snapshot_at(candidate, t)
        diff_sq, norm_sq, sup = 0.0, 0.0, 0.0
        for x_ref, u_ref, x, u in zip(ref.x, ref.u, cand.x, cand.u):
            target = np.interp(x, x_ref, u_ref)
            diff_sq += float(np.trapezoid((u - target) ** 2, x))
            norm_sq += float(np.trapezoid(target ** 2, x))
            sup = max(sup, float(np.max(np.abs(u - target))))
        l2 = np.sqrt(diff_sq)
        rows.append({
            "t": float(t),
            "l2": l2,
            "sup": sup,
            "relative_l2": l2 / np.sqrt(norm_sq) if norm_sq > 0.0 else l2,
        })
    return rows
