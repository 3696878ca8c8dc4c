import sys
import os

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

import numpy as np
import pytest

from app import services
from stringnet.charsim import run
from stringnet.initial_data import EdgeData, GaussianBump, InitialDataSpec
from stringnet.network import (
    BoundaryKind,
    bone_tree,
    edge_times,
    fourteen_node_tree,
    predicted_extinction,
    root_time,
    star_tree,
    tree_time,
)
from stringnet.spectrum import (
    bone_eigenfunction,
    bone_eigenvalues,
    decay_rate_fit,
    star_eigenfunction,
    star_eigenvalues,
)

pytestmark = pytest.mark.integration

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "stringnet", "configs")
DT = 1e-3


def fourteen_node_data():
    return InitialDataSpec.on_edges(
        13,
        e1=EdgeData(displacement=GaussianBump(0.5, 0.06)),
        e5=EdgeData(velocity=GaussianBump(0.4, 0.05, amplitude=2.0)),
        e12=EdgeData(displacement=GaussianBump(0.55, 0.05, amplitude=-0.5)),
    )


def after(report, t):
    """Registros com tempo >= t + dt."""
    return report.times >= t + report.dt * (1.0 - 1e-9)


def spread(report):
    u = np.concatenate(report.final_displacement)
    return float(u.max() - u.min())


@pytest.fixture(scope="module")
def transparent_run():
    tree = fourteen_node_tree(root_bc=BoundaryKind.TRANSPARENT)
    return tree, run(tree, fourteen_node_data(), dt=DT, horizon=15.0, stride=10)


# --- Extinção em tempo finito ---


def test_star_dirichlet_extinction():
    """Estrela N=3, alpha_1=1: tudo zero a partir de 4 + dt."""
    tree = star_tree((1.0, 1.0, 1.0), alpha=1.0, root_bc=BoundaryKind.DIRICHLET)
    init = InitialDataSpec.on_edges(3, e1=EdgeData(displacement=GaussianBump(0.5, 0.06)))
    report = run(tree, init, dt=DT, horizon=8.0)
    assert np.all(report.sup[after(report, 4.0)] < 1e-10)
    assert max(float(np.max(np.abs(u))) for u in report.final_displacement) < 1e-8


def test_fourteen_node_transparent_root(transparent_run):
    """Constante a partir de T(T) = 7."""
    tree, report = transparent_run
    assert predicted_extinction(tree) == 7.0
    assert report.extinction_time is not None
    assert report.extinction_time <= 7.0 + DT
    assert np.all(report.sup[after(report, 7.0)] < 1e-10)
    assert spread(report) < 1e-8


def test_per_edge_clearing_times(transparent_run):
    """O invariante s da aresta i some a partir de t_i."""
    tree, report = transparent_run
    for i, t_i in edge_times(tree).items():
        late = after(report, t_i)
        assert late.any()
        assert np.all(report.edge_sup_s[i][late] < 1e-10), f"edge {i}"


def test_fourteen_node_neumann_root():
    """Constante a partir de 2 T(R) = 10."""
    tree = fourteen_node_tree(root_bc=BoundaryKind.NEUMANN)
    report = run(tree, fourteen_node_data(), dt=DT, horizon=10.5 + tree_time(tree), stride=10)
    assert 2.0 * root_time(tree) == 10.0
    assert report.extinction_time is not None
    assert report.extinction_time <= 10.0 + DT
    assert np.all(report.sup[after(report, 10.0)] < 1e-10)
    assert spread(report) < 1e-8


def test_bone_with_one_fts_junction_becomes_constant():
    tree = bone_tree(3, 3, alpha1=1.0, alpha2=0.0, root_bc=BoundaryKind.TRANSPARENT)
    init = InitialDataSpec.on_edges(5, e2=EdgeData(displacement=GaussianBump(0.5, 0.06)))
    report = run(tree, init, dt=DT, horizon=8.0, stride=10)
    assert report.predicted_extinction is None
    assert report.extinction_time is not None
    assert report.extinction_time <= 4.0 + DT
    assert spread(report) < 1e-8


# --- Autofunções ---


def test_star_eigen_evolution():
    """Semente Re(U_0) evolui como Re(e^{lambda_0 t} U_0)."""
    family = star_eigenvalues(3, 0.0)
    lam = family.eigenvalue(0)
    fn = star_eigenfunction(family, 0)
    tree = star_tree((1.0, 1.0, 1.0), alpha=0.0, root_bc=BoundaryKind.DIRICHLET)
    times = (0.5, 1.0, 2.0, 3.5)
    report = run(tree, InitialDataSpec.from_eigenfunction(fn), dt=DT, horizon=4.0, snapshot_times=times)

    assert report.extinction_time is None
    for snap in report.snapshots:
        for i, (x, u) in enumerate(zip(snap.x, snap.u)):
            exact = np.real(np.exp(lam * snap.t) * (fn.a[i] * np.exp(lam * x) + fn.b[i] * np.exp(-lam * x)))
            assert np.max(np.abs(u - exact)) < 1e-8, (snap.t, i + 1)
    assert decay_rate_fit(report.times, report.energy) == pytest.approx(2.0 * lam.real, rel=1e-2)


def test_bone_eigen_evolution_does_not_extinguish():
    family = bone_eigenvalues(3, 3, 0.0, 0.0)
    tree = bone_tree(3, 3, root_bc=BoundaryKind.TRANSPARENT)
    fn = bone_eigenfunction(family, tree.speeds, 0)
    report = run(tree, InitialDataSpec.from_eigenfunction(fn), dt=0.01, horizon=20.0)
    assert abs(np.exp(2.0 * family.eigenvalue(0)) - 1.0 / 9.0) < 1e-12
    assert report.extinction_time is None
    assert decay_rate_fit(report.times, report.energy) == pytest.approx(2.0 * family.eigenvalue(0).real, rel=1e-2)


# --- Comparação com diferenças finitas ---


def test_crosscheck_against_finite_differences(tmp_path):
    result = services.run_command("crosscheck", config=os.path.join(CONFIG_DIR, "star_crosscheck.yml"),
                                  out=str(tmp_path))
    assert result.exit_code == 0
    coarse = next(r for r in result.data["rows"] if r["points_per_edge"] == 400)
    assert coarse["relative_l2"] < 0.02
    assert 3.0 <= result.data["ratio"] <= 5.0
    assert (tmp_path / "crosscheck.csv").exists()


def test_bundled_star_config_runs(tmp_path):
    result = services.run_command("simulate", config=os.path.join(CONFIG_DIR, "star_fts.yml"), out=str(tmp_path))
    assert result.exit_code == 0
    assert result.message.startswith("extinct at t ≤ 4.000")
    assert result.data["records"] == 8001
