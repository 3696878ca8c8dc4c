"""
Camada de serviços: lógica de negócio dos comandos.

Cada ``command_*`` lê a configuração, monta a árvore e os dados iniciais,
chama o núcleo ``stringnet`` e grava as tabelas via ``storage.engine``.
``run_command`` converte as exceções do domínio em códigos de saída.
"""
import itertools
import logging
import os
import traceback
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import yaml
from pydantic import ValidationError

from app.schema import (
    CommandResult,
    GaussianProfile,
    PolynomialProfile,
    RunConfig,
    SineProfile,
)
from storage import engine
from stringnet import charsim, fdref, network, spectrum
from stringnet.errors import (
    ConfigError,
    CourantViolation,
    CycleDetected,
    DisconnectedGraph,
    IllPosedAlpha,
    IncommensurableTimestep,
    SingularJunction,
    StringNetError,
    TopologyError,
)
from stringnet.initial_data import (
    EdgeData,
    GaussianBump,
    InitialDataSpec,
    Polynomial,
    Profile,
    SineMode,
    Zero,
)
from stringnet.network import BoundaryKind, NetworkTree

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ILL_POSED = 2
EXIT_TOPOLOGY = 3
EXIT_TIMESTEP = 4
EXIT_IO = 5


def get_thread_cap() -> Optional[int]:
    """
    Lê STRINGNET_THREADS (limite de threads das varreduras).
    Isolar essa lógica em uma função facilita o patching durante os testes.

    :raises ConfigError: valor não inteiro.
    """
    value = os.getenv("STRINGNET_THREADS")
    if value is None or value.strip() == "":
        return None
    try:
        threads = int(value)
    except ValueError:
        raise ConfigError("STRINGNET_THREADS", None, f"expected an integer thread count, got {value!r}")
    return threads if threads > 0 else None


# --- Configuração ---

def load_config(path: Union[str, Path]) -> RunConfig:
    """
    Lê e valida um arquivo de configuração YAML (ou JSON).

    :raises ConfigError: arquivo ilegível ou campo inválido (com a localização do campo).
    """
    path = str(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(path, None, f"not valid YAML/JSON: {e}")
    if not isinstance(raw, dict):
        raise ConfigError(path, None, "top level must be a mapping")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise ConfigError(path, field, first["msg"])


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json", by_alias=True, exclude_none=True), sort_keys=False)


def _config_field(error: StringNetError) -> str:
    """Campo da configuração a que um erro de topologia ou de alpha se refere."""
    if isinstance(error, IllPosedAlpha):
        return f"network.alphas.{error.node}"
    edge = getattr(error, "edge", None)
    if edge is not None:
        return f"network.edges.{edge - 1}"
    return "network.edges"


def build_tree(cfg: RunConfig, source: str = "<config>") -> Tuple[NetworkTree, List[str]]:
    """
    Monta e valida a árvore; arestas com ``length`` têm a velocidade reescalada
    para comprimento unitário (``c / L``). Devolve a árvore e as notas de reescala.

    Os erros saem com o arquivo ``source`` e o campo correspondente na mensagem.
    """
    spec = cfg.network
    expected = len(spec.edges) + 1
    if spec.nodes < expected:
        raise CycleDetected(f"{len(spec.edges)} edges over {spec.nodes} nodes must contain a cycle").located(
            source, "network.nodes")
    if spec.nodes > expected:
        raise DisconnectedGraph(f"{len(spec.edges)} edges cannot connect {spec.nodes} nodes").located(
            source, "network.nodes")
    notes, speeds = [], []
    for i, edge in enumerate(spec.edges, start=1):
        for node in (edge.from_node, edge.to_node):
            if not 0 <= node < spec.nodes:
                raise TopologyError(f"edge {i}: node {node} outside 0..{spec.nodes - 1}").located(
                    source, f"network.edges.{i - 1}")
        speed = edge.speed
        if edge.length is not None:
            if edge.length <= 0:
                raise TopologyError(f"edge {i}: length must be positive, got {edge.length}").located(
                    source, f"network.edges.{i - 1}.length")
            speed = edge.speed / edge.length
            notes.append(f"edge {i}: length {edge.length} rescaled to 1, speed {edge.speed} -> {speed}")
        speeds.append(speed)
    try:
        tree = NetworkTree(
            edges=tuple((e.from_node, e.to_node) for e in spec.edges),
            speeds=tuple(speeds),
            alphas=dict(spec.alphas),
            root_bc=spec.root_bc,
        )
        network.validate_tree(tree)
    except StringNetError as e:
        e.located(source, _config_field(e))
        raise
    return tree, notes


def _profile(spec) -> Profile:
    if isinstance(spec, GaussianProfile):
        return GaussianBump(center=spec.center, width=spec.width, amplitude=spec.amplitude)
    if isinstance(spec, SineProfile):
        return SineMode(mode=spec.mode, amplitude=spec.amplitude)
    if isinstance(spec, PolynomialProfile):
        return Polynomial(coefficients=tuple(spec.coefficients))
    return Zero()


def detect_geometry(tree: NetworkTree) -> str:
    """``star``, ``bone`` ou ``other``."""
    if tree.internal_nodes == (1,):
        return "star"
    if tree.internal_nodes == (1, 2):
        k1, k2 = tree.k(1), tree.k(2)
        if tree.edges == network.bone_tree(k1, k2).edges:
            return "bone"
    return "other"


def eigen_family(tree: NetworkTree, geometry: str = "auto", k_range=(0,)) -> spectrum.EigenFamily:
    geometry = detect_geometry(tree) if geometry == "auto" else geometry
    if geometry == "star":
        if tree.internal_nodes != (1,):
            raise TopologyError("star geometry requested for a tree that is not a star")
        if tree.root_bc is not BoundaryKind.DIRICHLET:
            raise StringNetError("the star ladder assumes a Dirichlet root")
        return spectrum.star_eigenvalues(tree.edge_count, tree.alpha(1), tree.wave_speed(1), k_range)
    if geometry == "bone":
        if detect_geometry(tree) != "bone":
            raise TopologyError("bone geometry requested for a tree not in bone numbering")
        if tree.root_bc is not BoundaryKind.TRANSPARENT:
            raise StringNetError("the bone ladder assumes a transparent root")
        return spectrum.bone_eigenvalues(tree.k(1), tree.k(2), tree.alpha(1), tree.alpha(2),
                                         tree.wave_speed(2), k_range)
    raise TopologyError("closed-form spectra exist only for star and bone trees")


def eigenfunction(tree: NetworkTree, family: spectrum.EigenFamily, k: int, samples: int):
    if isinstance(family.geometry, spectrum.StarGeometry):
        return spectrum.star_eigenfunction(family, k, samples, speeds=tree.speeds)
    return spectrum.bone_eigenfunction(family, tree.speeds, k, samples)


def build_initial_data(cfg: RunConfig, tree: NetworkTree, source: str = "<config>") -> InitialDataSpec:
    if cfg.eigen_seed is not None:
        family = eigen_family(tree, cfg.spectrum.geometry, (cfg.eigen_seed.k,))
        fn = eigenfunction(tree, family, cfg.eigen_seed.k, spectrum.MIN_GRID_POINTS)
        return InitialDataSpec.from_eigenfunction(fn, amplitude=cfg.eigen_seed.amplitude)
    edges = [EdgeData() for _ in range(tree.edge_count)]
    for index, entry in enumerate(cfg.initial_data):
        if not 1 <= entry.edge <= tree.edge_count:
            raise ConfigError(source, f"initial_data.{index}.edge", f"no edge {entry.edge} in the tree")
        edges[entry.edge - 1] = EdgeData(displacement=_profile(entry.displacement), velocity=_profile(entry.velocity))
    return InitialDataSpec(edges=tuple(edges))


def _output_dir(cfg: RunConfig, out: Optional[str]) -> Path:
    return engine.get_output_dir(out if out is not None else cfg.output.dir)


# --- Comandos ---

def command_validate(config: str, **_) -> CommandResult:
    cfg = load_config(config)
    tree, notes = build_tree(cfg, config)
    return CommandResult(command="validate", message=f"valid tree: {tree.edge_count} edges, "
                         f"internal nodes {list(tree.internal_nodes)}", notes=notes)


def command_timing(config: str, out: Optional[str] = None, **_) -> CommandResult:
    cfg = load_config(config)
    tree, notes = build_tree(cfg, config)
    report = network.timing_report(tree)
    out_dir = _output_dir(cfg, out)
    files = [
        engine.write_rows(({"edge": i, "t": t} for i, t in report.t.items()), out_dir / "timing_edges.csv"),
        engine.write_rows(({"leaf": n, "T_root": t} for n, t in report.leaf_times.items()), out_dir / "timing_leaves.csv"),
    ]
    predicted = "n/a (alpha_n != k_n - 2)" if report.predicted_extinction is None else f"{report.predicted_extinction:.3f}"
    message = f"T(R)={report.T_root:.3f} T(T)={report.T_tree:.3f} predicted extinction {predicted}"
    return CommandResult(
        command="timing", message=message, files=[str(f) for f in files], notes=notes,
        data={
            "edge_times": dict(report.t),
            "leaf_times": dict(report.leaf_times),
            "T_root": report.T_root,
            "T_tree": report.T_tree,
            "predicted_extinction": report.predicted_extinction,
        },
    )


def command_simulate(config: str, out: Optional[str] = None, dt: Optional[float] = None,
                     horizon: Optional[float] = None, epsilon: Optional[float] = None,
                     stride: Optional[int] = None, **_) -> CommandResult:
    cfg = load_config(config)
    tree, notes = build_tree(cfg, config)
    sim = cfg.simulation
    init = build_initial_data(cfg, tree, config)
    report = charsim.run(
        tree, init,
        dt=sim.dt if dt is None else float(dt),
        horizon=sim.horizon if horizon is None else float(horizon),
        epsilon=sim.epsilon if epsilon is None else float(epsilon),
        stride=sim.stride if stride is None else int(stride),
        snapshot_times=sim.snapshot_times,
    )
    files = engine.write_simulation(report, _output_dir(cfg, out))

    measured, predicted = report.extinction_time, report.predicted_extinction
    if measured is None:
        message = "no extinction within horizon"
    elif predicted is not None and measured <= predicted + report.dt * (1.0 + 1e-9):
        message = f"extinct at t ≤ {predicted:.3f} (measured t* = {measured:.3f})"
    else:
        message = f"extinct at t* = {measured:.3f}"
    return CommandResult(
        command="simulate", message=message, files=[str(f) for f in files], notes=notes,
        data={
            "extinction_time": measured,
            "predicted_extinction": predicted,
            "final_constant": report.final_constant,
            "records": int(report.times.size),
        },
    )


def parse_sweep(spec: str) -> Tuple[List[str], List[Tuple[float, ...]]]:
    """
    ``alpha_1=-1:2.5:0.5[,alpha_2=0:1:0.5]`` -> nomes e grade (produto cartesiano, extremos inclusos).
    """
    names, axes = [], []
    for part in spec.split(","):
        name, _, rng = part.partition("=")
        name = name.strip()
        if name not in ("alpha_1", "alpha_2") or rng.count(":") != 2:
            raise ConfigError("--sweep", part, "expected alpha_1=start:stop:step")
        start, stop, step = (float(v) for v in rng.split(":"))
        if step <= 0 or stop < start:
            raise ConfigError("--sweep", part, "step must be positive and stop >= start")
        count = int(round((stop - start) / step)) + 1
        names.append(name)
        axes.append([start + step * j for j in range(count)])
    if names[0] != "alpha_1":
        raise ConfigError("--sweep", spec, "the first axis must be alpha_1")
    return names, list(itertools.product(*axes))


def command_spectrum(config: str, out: Optional[str] = None, sweep: Optional[str] = None, **_) -> CommandResult:
    cfg = load_config(config)
    tree, notes = build_tree(cfg, config)
    opts = cfg.spectrum
    family = eigen_family(tree, opts.geometry, range(opts.k_min, opts.k_max + 1))
    out_dir = _output_dir(cfg, out)

    rows = []
    for k, lam in family.ladder:
        fn = eigenfunction(tree, family, k, opts.samples_per_edge)
        rows.append({"k": k, "re": lam.real, "im": lam.imag, "residual": spectrum.eigen_residual(tree, lam, fn)})
    files = [engine.write_rows(rows, out_dir / "lambda.csv")] if rows else []

    data = {"exists": family.exists, "stability": spectrum.stability_class(family)}
    if family.exists:
        data["re_lambda_0"] = family.base.real
        message = f"Re λ_0 = {family.base.real:.6f}, Im spacing {family.spacing.imag:.6f} ({data['stability']})"
    else:
        message = "no point spectrum; finite-time stable"

    if sweep:
        _, grid = parse_sweep(sweep)
        sweep_rows = spectrum.sweep_alpha(family.geometry, grid, threads=get_thread_cap())
        files.append(engine.write_rows(sweep_rows, out_dir / "sweep.csv"))
        data["sweep"] = sweep_rows
    return CommandResult(command="spectrum", message=message, files=[str(f) for f in files], notes=notes, data=data)


def command_crosscheck(config: str, out: Optional[str] = None, dt: Optional[float] = None, **_) -> CommandResult:
    cfg = load_config(config)
    tree, notes = build_tree(cfg, config)
    init = build_initial_data(cfg, tree, config)
    opts = cfg.crosscheck
    times = tuple(opts.compare_times)
    horizon = max(times)
    reference = charsim.run(tree, init, dt=cfg.simulation.dt if dt is None else float(dt), horizon=horizon,
                            snapshot_times=times, detect=False)

    rows = []
    for P in (opts.points_per_edge, 2 * opts.points_per_edge):
        fd = fdref.fd_run(tree, init, fdref.FdConfig(points_per_edge=P, horizon=horizon, courant=opts.courant,
                                                     stride=max(1, int(round(horizon / 100.0 / (opts.courant / P)))),
                                                     snapshot_times=times))
        for row in fdref.compare_displacements(reference, fd, times):
            rows.append({"points_per_edge": P, **row})
    files = [engine.write_rows(rows, _output_dir(cfg, out) / "crosscheck.csv")]

    last = times[-1]
    coarse = next(r for r in rows if r["points_per_edge"] == opts.points_per_edge and r["t"] == last)
    fine = next(r for r in rows if r["points_per_edge"] == 2 * opts.points_per_edge and r["t"] == last)
    if coarse["l2"] == 0.0 and fine["l2"] == 0.0:
        ratio = float("nan")
        message = "both engines identically zero"
    else:
        ratio = coarse["l2"] / fine["l2"] if fine["l2"] > 0.0 else float("inf")
        message = (f"relative L2 at t={last:g}: {coarse['relative_l2']:.3e} (P={opts.points_per_edge}), "
                   f"{fine['relative_l2']:.3e} (P={2 * opts.points_per_edge}); ratio {ratio:.2f}")
    return CommandResult(command="crosscheck", message=message, files=[str(f) for f in files], notes=notes,
                         data={"rows": rows, "ratio": ratio})


COMMANDS: Dict[str, Callable[..., CommandResult]] = {
    "validate": command_validate,
    "timing": command_timing,
    "simulate": command_simulate,
    "spectrum": command_spectrum,
    "crosscheck": command_crosscheck,
}


def exit_code_for(error: Exception) -> int:
    if isinstance(error, (IllPosedAlpha, SingularJunction)):
        return EXIT_ILL_POSED
    if isinstance(error, TopologyError):
        return EXIT_TOPOLOGY
    if isinstance(error, (IncommensurableTimestep, CourantViolation)):
        return EXIT_TIMESTEP
    if isinstance(error, (ConfigError, OSError)):
        return EXIT_IO
    return EXIT_ERROR


def run_command(name: str, **kwargs) -> CommandResult:
    """Executa um comando e converte exceções conhecidas em códigos de saída."""
    try:
        return COMMANDS[name](**kwargs)
    except (StringNetError, OSError) as e:
        logger.debug(traceback.format_exc())
        logger.error(f"{name} failed: {e}")
        return CommandResult(command=name, exit_code=exit_code_for(e), message=f"error: {e}")
