import os
import sys

from unittest.mock import MagicMock

import pytest
import yaml

# Adiciona o diretório raiz ao sys.path para encontrar 'app', 'storage' e 'stringnet'
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from app import services
from app.cli import main
from app.schema import RunConfig
from stringnet.errors import ConfigError, CycleDetected, DisconnectedGraph, TopologyError

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "stringnet", "configs")

STAR = {
    "network": {
        "nodes": 4,
        "root_bc": "dirichlet",
        "edges": [
            {"from": 0, "to": 1, "speed": 1.0},
            {"from": 1, "to": 2, "speed": 1.0},
            {"from": 1, "to": 3, "speed": 1.0},
        ],
        "alphas": {1: 1.0},
    },
    "initial_data": [{"edge": 1, "displacement": {"kind": "gaussian", "center": 0.5, "width": 0.06}}],
    "simulation": {"dt": 0.001, "horizon": 6.0, "stride": 10, "snapshot_times": [1.0]},
}

# --- Fixtures ---


@pytest.fixture
def write_config(tmp_path):
    """Grava um dicionário como YAML em tmp_path e devolve o caminho."""
    def _write(data, name="config.yml"):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(data), encoding="utf-8")
        return str(path)
    return _write


@pytest.fixture
def star_config(write_config):
    return write_config(STAR)


def variant(**changes):
    """Cópia de STAR com seções de rede substituídas."""
    data = yaml.safe_load(yaml.safe_dump(STAR))
    data["network"].update(changes)
    return data


def run_cli(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    return exc.value.code


# --- Configuração ---


def test_load_config(star_config):
    cfg = services.load_config(star_config)
    assert cfg.network.nodes == 4
    assert cfg.network.alphas == {1: 1.0}
    assert cfg.simulation.dt == 0.001
    assert cfg.output.dir == "results"


def test_config_round_trip(star_config):
    cfg = services.load_config(star_config)
    again = RunConfig.model_validate(yaml.safe_load(services.dump_config(cfg)))
    assert again == cfg


def test_invalid_field_is_located(write_config):
    path = write_config(variant(root_bc="robin"))
    with pytest.raises(ConfigError) as exc:
        services.load_config(path)
    assert exc.value.field == "network.root_bc"


def test_unknown_key_is_rejected(write_config):
    data = variant()
    data["simulation"]["timestep"] = 0.1
    with pytest.raises(ConfigError) as exc:
        services.load_config(write_config(data))
    assert exc.value.field == "simulation.timestep"


def test_bundled_configs_load():
    """Todas as configurações de exemplo são válidas."""
    names = sorted(f for f in os.listdir(CONFIG_DIR) if f.endswith(".yml"))
    assert len(names) == 6
    for name in names:
        cfg = services.load_config(os.path.join(CONFIG_DIR, name))
        tree, _ = services.build_tree(cfg)
        assert tree.edge_count == len(cfg.network.edges)


def test_length_is_rescaled(write_config):
    data = variant()
    data["network"]["edges"][2]["length"] = 2.0
    tree, notes = services.build_tree(services.load_config(write_config(data)))
    assert tree.speeds == (1.0, 1.0, 0.5)
    assert len(notes) == 1 and "edge 3" in notes[0]


def test_node_count_mismatch(write_config):
    with pytest.raises(CycleDetected):
        services.build_tree(services.load_config(write_config(variant(nodes=3))))
    with pytest.raises(DisconnectedGraph):
        services.build_tree(services.load_config(write_config(variant(nodes=5))))


def test_detect_geometry():
    from stringnet.network import bone_tree, fourteen_node_tree, star_tree

    assert services.detect_geometry(star_tree((1.0, 1.0, 1.0))) == "star"
    assert services.detect_geometry(bone_tree(3, 4)) == "bone"
    assert services.detect_geometry(fourteen_node_tree()) == "other"


def test_parse_sweep():
    names, grid = services.parse_sweep("alpha_1=-1:2.5:0.5")
    assert names == ["alpha_1"]
    assert [g[0] for g in grid] == pytest.approx([-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5])
    names, grid = services.parse_sweep("alpha_1=0:1:0.5,alpha_2=0:1:1")
    assert names == ["alpha_1", "alpha_2"]
    assert len(grid) == 6
    assert grid[0] == (0.0, 0.0)


@pytest.mark.parametrize("spec", ["beta=0:1:0.5", "alpha_1=0:1", "alpha_1=1:0:0.5", "alpha_2=0:1:0.5"])
def test_parse_sweep_rejects(spec):
    with pytest.raises(ConfigError):
        services.parse_sweep(spec)


def test_thread_cap(monkeypatch):
    monkeypatch.delenv("STRINGNET_THREADS", raising=False)
    assert services.get_thread_cap() is None
    monkeypatch.setenv("STRINGNET_THREADS", "3")
    assert services.get_thread_cap() == 3
    monkeypatch.setenv("STRINGNET_THREADS", "0")
    assert services.get_thread_cap() is None


def test_thread_cap_rejects_non_integer(monkeypatch):
    monkeypatch.setenv("STRINGNET_THREADS", "many")
    with pytest.raises(ConfigError) as exc:
        services.get_thread_cap()
    assert exc.value.file == "STRINGNET_THREADS"
    assert "'many'" in str(exc.value)


def test_topology_error_names_file_and_field(write_config):
    data = variant()
    data["network"]["edges"][1] = {"from": 0, "to": 2, "speed": 1.0}
    path = write_config(data)
    with pytest.raises(TopologyError) as exc:
        services.build_tree(services.load_config(path), path)
    assert exc.value.file == path
    assert str(exc.value).startswith(f"{path}:network.edges")


def test_negative_length_names_the_field(write_config):
    data = variant()
    data["network"]["edges"][2]["length"] = -1.0
    path = write_config(data)
    with pytest.raises(TopologyError) as exc:
        services.build_tree(services.load_config(path), path)
    assert exc.value.field == "network.edges.2.length"


# --- Comandos ---


def test_cli_validate(star_config, capsys):
    assert run_cli(["validate", "--config", star_config]) == 0
    assert "valid tree: 3 edges" in capsys.readouterr().out


def test_cli_timing(tmp_path, capsys):
    out = tmp_path / "timing"
    code = run_cli(["timing", "--config", os.path.join(CONFIG_DIR, "fourteen_node.yml"), "--out", str(out)])
    assert code == 0
    assert "T(R)=5.000 T(T)=7.000 predicted extinction 7.000" in capsys.readouterr().out
    assert (out / "timing_edges.csv").read_text().splitlines()[0] == "edge,t"
    assert len((out / "timing_leaves.csv").read_text().splitlines()) == 8


def test_cli_simulate(star_config, tmp_path, capsys):
    out = tmp_path / "run"
    assert run_cli(["simulate", "--config", star_config, "--out", str(out)]) == 0
    assert "extinct at t ≤ 4.000" in capsys.readouterr().out
    assert (out / "energy.csv").read_text().splitlines()[0] == "t,E,sup_s,sup_d"
    assert (out / "nodes.csv").read_text().splitlines()[0] == "t,v_1"
    snapshot = (out / "snapshot_t1.000000.csv").read_text().splitlines()
    assert snapshot[0] == "edge,x,u,s,d"
    assert len(snapshot) == 1 + 3 * 1001


def test_simulate_is_reproducible(star_config, tmp_path):
    """Mesma configuração, arquivos idênticos byte a byte."""
    for name in ("a", "b"):
        result = services.run_command("simulate", config=star_config, out=str(tmp_path / name), horizon=2.0)
        assert result.exit_code == 0
    for name in ("energy.csv", "nodes.csv", "snapshot_t1.000000.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_without_extinction(write_config, tmp_path):
    data = variant(alphas={1: 0.0})
    result = services.run_command("simulate", config=write_config(data), out=str(tmp_path), horizon=4.0)
    assert result.exit_code == 0
    assert result.message == "no extinction within horizon"
    assert result.data["predicted_extinction"] is None


def test_cli_spectrum(tmp_path, capsys):
    out = tmp_path / "spectrum"
    code = run_cli(["spectrum", "--config", os.path.join(CONFIG_DIR, "star_spectrum.yml"), "--out", str(out),
                    "--sweep", "alpha_1=-1:2.5:0.5"])
    assert code == 0
    assert "Re λ_0 = -0.549306" in capsys.readouterr().out
    lines = (out / "lambda.csv").read_text().splitlines()
    assert lines[0] == "k,re,im,residual"
    assert len(lines) == 6
    sweep = (out / "sweep.csv").read_text().splitlines()
    assert sweep[0] == "alpha_1,re_lambda_0,exists"
    assert len(sweep) == 9


def test_spectrum_without_point_spectrum(write_config, tmp_path):
    result = services.run_command("spectrum", config=write_config(STAR), out=str(tmp_path))
    assert result.exit_code == 0
    assert result.message == "no point spectrum; finite-time stable"
    assert result.data["stability"] == "finite-time"


# --- Códigos de saída ---


def test_exit_ill_posed(write_config, capsys):
    assert run_cli(["validate", "--config", write_config(variant(alphas={1: 3.0}))]) == 2
    assert "node 1" in capsys.readouterr().out


def test_exit_ill_posed_names_file_and_field(write_config, capsys):
    path = write_config(variant(alphas={1: 3.0}))
    assert run_cli(["validate", "--config", path]) == 2
    out = capsys.readouterr().out
    assert path in out
    assert "network.alphas.1" in out


def test_exit_bad_thread_cap(monkeypatch, tmp_path):
    """STRINGNET_THREADS inválido é erro de configuração."""
    monkeypatch.setenv("STRINGNET_THREADS", "many")
    code = run_cli(["spectrum", "--config", os.path.join(CONFIG_DIR, "star_spectrum.yml"), "--out", str(tmp_path),
                    "--sweep", "alpha_1=0:1:0.5"])
    assert code == 5


def test_exit_topology(write_config):
    data = variant()
    data["network"]["edges"][1] = {"from": 0, "to": 2, "speed": 1.0}
    assert run_cli(["validate", "--config", write_config(data)]) == 3


def test_exit_timestep(star_config, tmp_path):
    assert run_cli(["simulate", "--config", star_config, "--out", str(tmp_path), "--dt", "0.3"]) == 4


def test_exit_config(tmp_path, write_config):
    assert run_cli(["validate", "--config", str(tmp_path / "missing.yml")]) == 5
    assert run_cli(["validate", "--config", write_config(variant(root_bc="robin"))]) == 5


# --- Varredura com limite de threads ---


def test_spectrum_sweep_uses_thread_cap(monkeypatch, tmp_path):
    """get_thread_cap é simulado; o valor chega a sweep_alpha."""
    monkeypatch.setattr(services, "get_thread_cap", MagicMock(return_value=2))
    sweep = MagicMock(wraps=services.spectrum.sweep_alpha)
    monkeypatch.setattr(services.spectrum, "sweep_alpha", sweep)

    result = services.run_command("spectrum", config=os.path.join(CONFIG_DIR, "star_spectrum.yml"),
                                  out=str(tmp_path), sweep="alpha_1=0:1:0.5")

    assert result.exit_code == 0
    sweep.assert_called_once()
    assert sweep.call_args.kwargs["threads"] == 2
    assert len(result.data["sweep"]) == 3
