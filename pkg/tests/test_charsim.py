import os
import sys

import numpy as np
import pytest

# Adiciona o diretório raiz ao sys.path para encontrar o módulo
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from stringnet.charsim import (
    build_state,
    detect_extinction,
    energy,
    energy_rate,
    node_velocities,
    reconstruct_displacement,
    run,
    step,
)
from stringnet.errors import HorizonTooShort, IncommensurableTimestep, IncompatibleInitialData
from stringnet.initial_data import EdgeData, GaussianBump, InitialDataSpec, Polynomial
from stringnet.network import BoundaryKind, bone_tree, chain_tree, star_tree

# --- Fixtures ---

@pytest.fixture
def single_edge():
    return chain_tree((1.0,))


@pytest.fixture
def bump():
    """Deslocamento gaussiano no meio da aresta, velocidade nula."""
    return InitialDataSpec(edges=(EdgeData(displacement=GaussianBump(0.5, 0.05)),))


@pytest.fixture(scope="module")
def star_fts_report():
    """Estrela N=3, alpha_1=1, raiz Dirichlet: extinção prevista em 4."""
    tree = star_tree((1.0, 1.0, 1.0), alpha=1.0, root_bc=BoundaryKind.DIRICHLET)
    init = InitialDataSpec.on_edges(3, e1=EdgeData(displacement=GaussianBump(0.5, 0.06)))
    return run(tree, init, dt=1e-3, horizon=8.0, stride=5, snapshot_times=(0.0, 1.0, 4.5))


# --- Transport ---

def test_pure_transport_is_exact(single_edge, bump):
    """Cem passos deslocam cada amostra exatamente cem células."""
    state = build_state(single_edge, bump, dt=1e-3)
    s0, d0 = state.s.copy(), state.d.copy()
    for _ in range(100):
        step(state)
    np.testing.assert_array_equal(state.d[100:], d0[:-100])
    np.testing.assert_array_equal(state.d[:100], 0.0)
    np.testing.assert_array_equal(state.s[:-100], s0[100:])
    np.testing.assert_array_equal(state.s[-100:], 0.0)
    assert state.t == pytest.approx(0.1)


def test_dirichlet_root_reflects_with_sign_flip(bump):
    """Após M passos, s guarda só a última amostra e d é s0 refletido com sinal trocado."""
    tree = chain_tree((1.0,), root_bc=BoundaryKind.DIRICHLET)
    state = build_state(tree, bump, dt=1e-3)
    s0 = state.s.copy()
    for _ in range(state.cells[0]):
        step(state)
    np.testing.assert_array_equal(state.d, -s0[::-1])
    assert state.s[0] == s0[-1]
    np.testing.assert_array_equal(state.s[1:], 0.0)


def test_reconstruction_matches_dalembert(single_edge, bump):
    """Antes de tocar as pontas, u(x,t) = (g(x-t) + g(x+t)) / 2."""
    state = build_state(single_edge, bump, dt=1e-3)
    for _ in range(100):
        step(state)
    x = state.grid(1)
    g = GaussianBump(0.5, 0.05)
    exact = 0.5 * (g(x - 0.1) + g(x + 0.1))
    corrected = reconstruct_displacement(state)[0]
    assert np.max(np.abs(corrected - exact)) < 1e-7
    # o trapézio puro erra na ordem de dt^2
    assert np.max(np.abs(state.u - exact)) > 1e-6


# --- Energy ---

@pytest.mark.parametrize("root_bc", list(BoundaryKind))
def test_discrete_energy_identity(root_bc):
    """(E1 - E0) / dt = (R0 + R1) / 2 a cada passo."""
    tree = star_tree((1.0, 2.0, 0.5), alpha=0.7, root_bc=root_bc)
    init = InitialDataSpec.on_edges(
        3,
        e1=EdgeData(displacement=GaussianBump(0.55, 0.05)),
        e3=EdgeData(velocity=GaussianBump(0.5, 0.04, amplitude=2.0)),
    )
    state = build_state(tree, init, dt=1e-3)
    dt = state.dt
    e0 = energy(state)
    for _ in range(1500):
        before, rate_before = energy(state), energy_rate(state)
        step(state)
        after, rate_after = energy(state), energy_rate(state)
        assert (after - before) / dt == pytest.approx(0.5 * (rate_before + rate_after), abs=1e-9 * e0 / dt)


def test_discrete_energy_identity_on_bone():
    tree = bone_tree(3, 4, speeds=(1.0, 0.5, 2.0, 1.0, 1.0, 0.5), alpha1=-0.4, alpha2=1.3)
    init = InitialDataSpec.on_edges(
        6,
        e2=EdgeData(displacement=GaussianBump(0.5, 0.05)),
        e5=EdgeData(velocity=GaussianBump(0.45, 0.05)),
    )
    state = build_state(tree, init, dt=1e-3)
    e0 = energy(state)
    for _ in range(3000):
        before, rate_before = energy(state), energy_rate(state)
        step(state)
        after, rate_after = energy(state), energy_rate(state)
        assert (after - before) / state.dt == pytest.approx(0.5 * (rate_before + rate_after), abs=1e-9 * e0 / state.dt)


def _random_network(rng):
    speeds = (0.5, 1.0, 2.0)

    def pick_alpha(k):
        while True:
            alpha = float(rng.uniform(-1.0, k + 1.0))
            if abs(alpha - k) >= 0.3:
                return alpha

    root_bc = list(BoundaryKind)[int(rng.integers(3))]
    if rng.random() < 0.5:
        n = int(rng.integers(3, 6))
        tree = star_tree(tuple(rng.choice(speeds, n)), alpha=pick_alpha(n), root_bc=root_bc)
    else:
        k1, k2 = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        tree = bone_tree(k1, k2, speeds=tuple(rng.choice(speeds, k1 + k2 - 1)),
                         alpha1=pick_alpha(k1), alpha2=pick_alpha(k2), root_bc=root_bc)
    data = {}
    for edge in rng.choice(np.arange(1, tree.edge_count + 1), 2, replace=False):
        bump = GaussianBump(float(rng.uniform(0.45, 0.55)), float(rng.uniform(0.03, 0.05)),
                            amplitude=float(rng.uniform(-2.0, 2.0)))
        data[f"e{edge}"] = EdgeData(displacement=bump) if rng.random() < 0.5 else EdgeData(velocity=bump)
    return tree, InitialDataSpec.on_edges(tree.edge_count, **data)


@pytest.mark.parametrize("seed", range(6))
def test_energy_identity_on_random_networks(seed):
    """Estrelas e ossos sorteados: velocidades, alphas, raiz e perfis."""
    tree, init = _random_network(np.random.default_rng(seed))
    state = build_state(tree, init, dt=1e-3)
    e0 = energy(state)
    for _ in range(1500):
        before, rate_before = energy(state), energy_rate(state)
        step(state)
        after, rate_after = energy(state), energy_rate(state)
        tolerance = 1e-9 * max(e0, before) / state.dt
        assert (after - before) / state.dt == pytest.approx(0.5 * (rate_before + rate_after), abs=tolerance)


def test_superposition_of_initial_data():
    """A evolução é linear nos dados iniciais."""
    tree = star_tree((1.0, 1.0, 1.0), alpha=0.3, root_bc=BoundaryKind.NEUMANN)
    a = InitialDataSpec.on_edges(3, e1=EdgeData(displacement=GaussianBump(0.5, 0.05)))
    b = InitialDataSpec.on_edges(3, e2=EdgeData(velocity=GaussianBump(0.4, 0.04)))
    states = [build_state(tree, data, dt=1e-3) for data in (a, b, a.combine(2.0, b, -0.5))]
    for _ in range(2500):
        for state in states:
            step(state)
    first, second, mixed = states
    np.testing.assert_allclose(mixed.s, 2.0 * first.s - 0.5 * second.s, rtol=0, atol=1e-10)
    np.testing.assert_allclose(mixed.d, 2.0 * first.d - 0.5 * second.d, rtol=0, atol=1e-10)


# --- Extinction ---

def test_star_fts_extinction(star_fts_report):
    report = star_fts_report
    assert report.predicted_extinction == 4.0
    assert report.extinction_time is not None
    assert report.extinction_time <= 4.0 + report.dt
    assert np.all(report.sup[report.times > 4.0 + report.dt] <= report.epsilon)
    assert max(np.max(np.abs(u)) for u in report.final_displacement) < 1e-6
    assert report.final_constant == pytest.approx(0.0, abs=1e-6)


def test_star_fts_node_velocity_vanishes(star_fts_report):
    v = star_fts_report.node_velocity[1]
    late = star_fts_report.times > 4.0 + star_fts_report.dt
    assert np.max(np.abs(v[late])) <= star_fts_report.epsilon


def test_snapshots(star_fts_report):
    snaps = star_fts_report.snapshots
    assert [s.t for s in snaps] == pytest.approx([0.0, 1.0, 4.5])
    assert len(snaps[0].x) == 3
    assert snaps[0].u[0].shape == snaps[0].x[0].shape == (1001,)
    assert np.max(np.abs(snaps[2].u[0])) < 1e-6


def test_transparent_star_extinct_for_any_alpha():
    """Sem reflexão na raiz, a estrela se esvazia em 2 max(1/c_i)."""
    tree = star_tree((1.0, 1.0, 1.0), alpha=0.0)
    init = InitialDataSpec.on_edges(3, e2=EdgeData(displacement=GaussianBump(0.5, 0.05)))
    report = run(tree, init, dt=1e-3, horizon=5.0, stride=10)
    assert report.predicted_extinction is None
    assert report.extinction_time is not None
    assert report.extinction_time <= 2.0 + report.dt


def test_undamped_dirichlet_star_keeps_ringing():
    """alpha=0 com raiz Dirichlet: não há extinção no horizonte."""
    tree = star_tree((1.0, 1.0, 1.0), alpha=0.0, root_bc=BoundaryKind.DIRICHLET)
    init = InitialDataSpec.on_edges(3, e1=EdgeData(displacement=GaussianBump(0.5, 0.05)))
    report = run(tree, init, dt=1e-3, horizon=6.0, stride=10)
    assert report.extinction_time is None
    assert report.sup[-1] > report.epsilon


def test_node_velocities_keys():
    tree = star_tree((1.0, 1.0, 1.0), alpha=1.0)
    state = build_state(tree, InitialDataSpec.zero(3), dt=0.01)
    assert node_velocities(state) == {1: 0.0}


def test_detect_extinction():
    times = np.linspace(0.0, 10.0, 11)
    sup = np.array([1.0, 1.0, 1.0] + [0.0] * 8)
    assert detect_extinction(times, sup, 1e-10, window=5.0) == 3.0
    assert detect_extinction(times, np.zeros(11), 1e-10, window=5.0) == 0.0
    sup[-1] = 1.0
    assert detect_extinction(times, sup, 1e-10, window=5.0) is None


def test_detect_extinction_needs_a_window():
    times = np.linspace(0.0, 10.0, 11)
    sup = np.array([1.0] * 6 + [0.0] * 5)
    with pytest.raises(HorizonTooShort):
        detect_extinction(times, sup, 1e-10, window=5.0)


# --- Input checks ---

@pytest.mark.parametrize("dt", [0.3, 0.6, 1.0])
def test_incommensurable_timestep(single_edge, bump, dt):
    with pytest.raises(IncommensurableTimestep) as exc:
        build_state(single_edge, bump, dt=dt)
    assert exc.value.edge == 1


def test_mixed_speeds_need_a_common_subdivision():
    tree = star_tree((1.0, 3.0, 1.0))
    with pytest.raises(IncommensurableTimestep) as exc:
        build_state(tree, InitialDataSpec.zero(3), dt=0.01)
    assert exc.value.edge == 2


def test_dirichlet_root_rejects_nonzero_displacement():
    tree = chain_tree((1.0,), root_bc=BoundaryKind.DIRICHLET)
    init = InitialDataSpec(edges=(EdgeData(displacement=Polynomial((1.0,))),))
    with pytest.raises(IncompatibleInitialData) as exc:
        build_state(tree, init, dt=0.01)
    assert exc.value.node == 0


def test_discontinuous_displacement_at_node():
    tree = star_tree((1.0, 1.0, 1.0))
    init = InitialDataSpec.on_edges(3, e1=EdgeData(displacement=Polynomial((1.0,))))
    with pytest.raises(IncompatibleInitialData) as exc:
        build_state(tree, init, dt=0.01)
    assert exc.value.node == 1
