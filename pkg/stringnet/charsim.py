"""
Exact delay-line evolution of the Riemann invariants on a tree.

On edge ``i`` the invariants ``s = u_t + c u_x`` and ``d = u_t - c u_x`` are
sampled at ``M_i + 1`` points with spacing ``c_i dt``, so one time step moves
every sample exactly one cell: ``s`` toward ``x=0`` and ``d`` toward ``x=1``.
The cells vacated at the edge ends are refilled by the junction maps, the
transparent leaf rule ``s(1)=0`` and the root reflection.

All edges live in two flat arrays (edge ``i`` occupies
``offsets[i-1] : offsets[i-1] + M_i + 1``), so a step is one global shift,
one sparse matrix-vector product over the edge-end samples and a scatter.

Usage::

    from stringnet import star_tree, run, InitialDataSpec, EdgeData, GaussianBump

    tree = star_tree((1.0, 1.0, 1.0), alpha=1.0, root_bc="dirichlet")
    init = InitialDataSpec.on_edges(3, e1=EdgeData(displacement=GaussianBump(0.5, 0.05)))
    report = run(tree, init, dt=1e-3, horizon=8.0)
    report.extinction_time    # <= 4.0
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.sparse

from .errors import HorizonTooShort, IncommensurableTimestep
from .initial_data import InitialDataSpec, check_compatibility
from .network import BoundaryKind, NetworkTree, predicted_extinction, satisfies_fts, tree_time, validate_tree
from .scattering import RootReflection, junction_matrices, root_reflection

logger = logging.getLogger(__name__)

COMMENSURABILITY_TOLERANCE = 1e-9
DEFAULT_RELATIVE_EPSILON = 1e-10


@dataclass
class SimState:
    """
    Mutable simulation state. Confined to one run; ``step`` updates it in place.
    """
    tree: NetworkTree
    dt: float
    cells: tuple
    """M_i per edge."""
    offsets: np.ndarray
    """Flat start index of each edge."""
    s: np.ndarray
    d: np.ndarray
    u: np.ndarray
    """Trapezoid accumulator of u0 + integral of v."""
    start_correction: np.ndarray
    """``dt^2/12 * c^2 u0''``, the initial endpoint term of the time quadrature."""
    weights: np.ndarray
    """Energy quadrature weights per flat sample."""
    root: RootReflection
    operator: scipy.sparse.csr_array
    incoming_d: np.ndarray
    incoming_s: np.ndarray
    outgoing_s: np.ndarray
    outgoing_d: np.ndarray
    steps: int = 0

    @property
    def t(self) -> float:
        return self.steps * self.dt

    def edge(self, i: int) -> slice:
        start = int(self.offsets[i - 1])
        return slice(start, start + self.cells[i - 1] + 1)

    def start_of(self, i: int) -> int:
        return int(self.offsets[i - 1])

    def end_of(self, i: int) -> int:
        return int(self.offsets[i - 1]) + self.cells[i - 1]

    def grid(self, i: int) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.cells[i - 1] + 1)


@dataclass
class Snapshot:
    t: float
    x: List[np.ndarray]
    u: List[np.ndarray]
    s: List[np.ndarray]
    d: List[np.ndarray]


@dataclass
class SimReport:
    """Traces of one run. All traces share ``times``."""
    times: np.ndarray
    energy: np.ndarray
    sup_s: np.ndarray
    sup_d: np.ndarray
    node_velocity: Dict[int, np.ndarray]
    edge_sup_s: Dict[int, np.ndarray]
    dt: float
    epsilon: float
    extinction_time: Optional[float]
    predicted_extinction: Optional[float]
    final_constant: float
    final_displacement: List[np.ndarray]
    grids: List[np.ndarray]
    snapshots: List[Snapshot] = field(default_factory=list)

    @property
    def sup(self) -> np.ndarray:
        """Sup-norm over both invariants."""
        return np.maximum(self.sup_s, self.sup_d)


# --- State construction ---

def _cells(tree: NetworkTree, dt: float) -> tuple:
    cells = []
    for i, c in enumerate(tree.speeds, start=1):
        ratio = 1.0 / (c * dt)
        m = int(round(ratio))
        if m < 2 or abs(ratio - m) > COMMENSURABILITY_TOLERANCE * ratio:
            raise IncommensurableTimestep(i, ratio)
        cells.append(m)
    return tuple(cells)


def _junction_operator(tree: NetworkTree, offsets: np.ndarray, cells: tuple, root: RootReflection):
    """
    Sparse map from the arriving edge-end samples to the refilled ones.

    Columns: ``d`` at the end of each internal node's parent edge, then ``s``
    at the start of every edge. Rows: ``s`` at the end of every edge, then
    ``d`` at the start of every edge.
    """
    n_edges = tree.edge_count
    start = lambda i: int(offsets[i - 1])
    end = lambda i: int(offsets[i - 1]) + cells[i - 1]

    internal = tree.internal_nodes
    d_column = {n: j for j, n in enumerate(internal)}
    s_column = {i: len(internal) + i - 1 for i in range(1, n_edges + 1)}
    s_row = {i: i - 1 for i in range(1, n_edges + 1)}
    d_row = {i: n_edges + i - 1 for i in range(1, n_edges + 1)}

    rows, cols, vals = [], [], []
    for n, scatter in junction_matrices(tree).items():
        inputs = [d_column[n]] + [s_column[e] for e in tree.children[n]]
        outputs = [s_row[n]] + [d_row[e] for e in tree.children[n]]
        for r, out in enumerate(outputs):
            for c, inp in enumerate(inputs):
                if scatter.matrix[r, c] != 0.0:
                    rows.append(out)
                    cols.append(inp)
                    vals.append(scatter.matrix[r, c])
    if root.coefficient != 0.0:
        rows.append(d_row[1])
        cols.append(s_column[1])
        vals.append(root.coefficient)

    shape = (2 * n_edges, len(internal) + n_edges)
    operator = scipy.sparse.coo_array((vals, (rows, cols)), shape=shape).tocsr()
    incoming_d = np.array([end(n) for n in internal], dtype=np.intp)
    incoming_s = np.array([start(i) for i in range(1, n_edges + 1)], dtype=np.intp)
    outgoing_s = np.array([end(i) for i in range(1, n_edges + 1)], dtype=np.intp)
    outgoing_d = np.array([start(i) for i in range(1, n_edges + 1)], dtype=np.intp)
    return operator, incoming_d, incoming_s, outgoing_s, outgoing_d


def build_state(tree: NetworkTree, init: InitialDataSpec, dt: float) -> SimState:
    """
    Sample the initial invariants ``s = u1 + c u0'`` and ``d = u1 - c u0'``.

    :raises IncommensurableTimestep: ``1/(c_i dt)`` is not an integer >= 2 for some edge.
    :raises IncompatibleInitialData: u0 is discontinuous at a node, or nonzero at a Dirichlet root.
    """
    validate_tree(tree)
    cells = _cells(tree, dt)
    check_compatibility(tree, init)

    offsets = np.concatenate(([0], np.cumsum([m + 1 for m in cells])[:-1])).astype(np.intp)
    s, d, u, correction, weights = [], [], [], [], []
    for i, (m, c, data) in enumerate(zip(cells, tree.speeds, init.edges), start=1):
        x = np.linspace(0.0, 1.0, m + 1)
        u0 = data.displacement.value(x)
        du0 = data.displacement.derivative(x, 1)
        u1 = data.velocity.value(x)
        s.append(u1 + c * du0)
        d.append(u1 - c * du0)
        u.append(u0)
        correction.append(dt * dt / 12.0 * c * c * data.displacement.derivative(x, 2))
        w = np.full(m + 1, dt / 4.0)
        w[[0, -1]] *= 0.5
        weights.append(w)

    root = root_reflection(tree.root_bc)
    operator, in_d, in_s, out_s, out_d = _junction_operator(tree, offsets, cells, root)
    state = SimState(
        tree=tree, dt=float(dt), cells=cells, offsets=offsets,
        s=np.concatenate(s), d=np.concatenate(d), u=np.concatenate(u),
        start_correction=np.concatenate(correction),
        weights=np.concatenate(weights), root=root, operator=operator,
        incoming_d=in_d, incoming_s=in_s, outgoing_s=out_s, outgoing_d=out_d,
    )
    logger.debug(f"Built state: dt={dt}, cells per edge {cells}, {state.s.size} samples")
    return state


# --- Evolution ---

def step(state: SimState) -> SimState:
    """Advance ``state`` by one time step, in place; returns it for chaining."""
    s, d = state.s, state.d
    v_before = 0.5 * (s + d)

    # transport; samples bleeding across edge boundaries land on cells refilled below
    s[:-1] = s[1:]
    d[1:] = d[:-1]

    arriving = np.concatenate((d[state.incoming_d], s[state.incoming_s]))
    leaving = state.operator @ arriving
    n = state.tree.edge_count
    s[state.outgoing_s] = leaving[:n]
    d[state.outgoing_d] = leaving[n:]

    state.u += 0.5 * state.dt * (v_before + 0.5 * (s + d))
    state.steps += 1
    return state


def reconstruct_displacement(state: SimState) -> List[np.ndarray]:
    """
    Displacement per edge at the current time.

    The trapezoid accumulator is complemented by the Euler-Maclaurin endpoint
    terms ``dt^2/12 (v_t(0) - v_t(t))``, with ``v_t = c (s_x - d_x) / 2`` taken
    from the buffers.
    """
    if state.steps == 0:
        return [state.u[state.edge(i)].copy() for i in range(1, state.tree.edge_count + 1)]
    result = []
    for i in range(1, state.tree.edge_count + 1):
        sl = state.edge(i)
        c = state.tree.wave_speed(i)
        h = c * state.dt
        v_t = 0.5 * c * (np.gradient(state.s[sl], h, edge_order=2) - np.gradient(state.d[sl], h, edge_order=2))
        result.append(state.u[sl] + state.start_correction[sl] - state.dt * state.dt / 12.0 * v_t)
    return result


def energy(state: SimState) -> float:
    """Trapezoid value of ``sum_i int (s_i^2 + d_i^2) / (4 c_i) dx``."""
    return float(state.weights @ (state.s * state.s + state.d * state.d))


def node_velocities(state: SimState) -> Dict[int, float]:
    """``v_n = (s + d) / 2`` at every internal node."""
    return {n: 0.5 * float(state.s[state.end_of(n)] + state.d[state.end_of(n)]) for n in state.tree.internal_nodes}


def energy_rate(state: SimState) -> float:
    """
    ``sum(alpha_n v_n^2) - sum(u_t^2 at transparent external nodes)``.

    One step satisfies ``(E_after - E_before) / dt = (rate_before + rate_after) / 2``.
    """
    tree = state.tree
    rate = sum(tree.alpha(n) * v * v for n, v in node_velocities(state).items())
    for leaf in tree.leaves:
        v = 0.5 * (state.s[state.end_of(leaf)] + state.d[state.end_of(leaf)])
        rate -= v * v
    if tree.root_bc is BoundaryKind.TRANSPARENT:
        v = 0.5 * (state.s[0] + state.d[0])
        rate -= v * v
    return float(rate)


# --- Extinction ---

def detect_extinction(times: Sequence[float], sup: Sequence[float], epsilon: float,
                      window: float) -> Optional[float]:
    """
    First recorded time after which the sup-norm never exceeds ``epsilon``.

    :param window: persistence window the trace must cover past the candidate.
    :return: the candidate time, or None when the last record still exceeds ``epsilon``.
    :raises HorizonTooShort: a candidate exists but ``candidate + window`` lies beyond the trace.
    """
    times = np.asarray(times, dtype=float)
    above = np.flatnonzero(np.asarray(sup, dtype=float) > epsilon)
    if above.size == 0:
        candidate = float(times[0])
    elif above[-1] == times.size - 1:
        return None
    else:
        candidate = float(times[above[-1] + 1])
    if candidate + window > times[-1] + 1e-9 * max(1.0, abs(times[-1])):
        raise HorizonTooShort(candidate, window, float(times[-1]))
    return candidate


# --- Runs ---

class _Recorder:

    def __init__(self, state: SimState):
        self.state = state
        self.times, self.energy, self.sup_s, self.sup_d = [], [], [], []
        self.nodes = {n: [] for n in state.tree.internal_nodes}
        self.edge_sup_s = []
        self.snapshots = []

    def record(self):
        st = self.state
        abs_s = np.abs(st.s)
        self.times.append(st.t)
        self.energy.append(energy(st))
        self.sup_s.append(float(abs_s.max()))
        self.sup_d.append(float(np.abs(st.d).max()))
        for n, v in node_velocities(st).items():
            self.nodes[n].append(v)
        self.edge_sup_s.append(np.maximum.reduceat(abs_s, st.offsets))

    def snapshot(self):
        st = self.state
        edges = range(1, st.tree.edge_count + 1)
        self.snapshots.append(Snapshot(
            t=st.t,
            x=[st.grid(i) for i in edges],
            u=reconstruct_displacement(st),
            s=[st.s[st.edge(i)].copy() for i in edges],
            d=[st.d[st.edge(i)].copy() for i in edges],
        ))


def run(tree: NetworkTree, init: InitialDataSpec, dt: float, horizon: float,
        epsilon: Optional[float] = None, stride: int = 1,
        snapshot_times: Sequence[float] = (), detect: bool = True) -> SimReport:
    """
    Simulate up to ``horizon`` and collect traces.

    :param epsilon: extinction threshold; defaults to 1e-10 times the initial sup-norm.
    :param stride: record every ``stride``-th step; the final step is always recorded.
    :param snapshot_times: times (rounded to the grid) at which full profiles are kept.
    :param detect: run extinction detection; off for short comparison runs.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    state = build_state(tree, init, dt)
    n_steps = int(round(horizon / dt))
    snapshot_steps = {int(round(t / dt)) for t in snapshot_times}
    logger.info(f"Running {n_steps} steps of dt={dt} on {tree.edge_count} edges")

    recorder = _Recorder(state)
    recorder.record()
    if 0 in snapshot_steps:
        recorder.snapshot()
    for n in range(1, n_steps + 1):
        step(state)
        if n % stride == 0 or n == n_steps:
            recorder.record()
        if n in snapshot_steps:
            recorder.snapshot()

    sup_s = np.array(recorder.sup_s)
    sup_d = np.array(recorder.sup_d)
    if epsilon is None:
        epsilon = DEFAULT_RELATIVE_EPSILON * max(sup_s[0], sup_d[0])
    times = np.array(recorder.times)
    extinction = detect_extinction(times, np.maximum(sup_s, sup_d), epsilon, tree_time(tree)) if detect else None
    final = reconstruct_displacement(state)
    edge_sup = np.array(recorder.edge_sup_s)

    report = SimReport(
        times=times,
        energy=np.array(recorder.energy),
        sup_s=sup_s,
        sup_d=sup_d,
        node_velocity={n: np.array(v) for n, v in recorder.nodes.items()},
        edge_sup_s={i: edge_sup[:, i - 1] for i in range(1, tree.edge_count + 1)},
        dt=float(dt),
        epsilon=float(epsilon),
        extinction_time=extinction,
        predicted_extinction=predicted_extinction(tree) if satisfies_fts(tree) else None,
        final_constant=float(np.mean(np.concatenate(final))),
        final_displacement=final,
        grids=[state.grid(i) for i in range(1, tree.edge_count + 1)],
        snapshots=recorder.snapshots,
    )
    logger.info(f"Run finished at t={state.t}: extinction {extinction}, predicted {report.predicted_extinction}")
    return report
