"""
Modelos Pydantic que definem o contrato dos dados que entram (arquivo de
configuração) e saem (relatórios dos comandos) do stringnet.

O arquivo de configuração é YAML (JSON também é aceito, por ser YAML válido):

.. code-block:: yaml

    network:
      nodes: 4
      root_bc: dirichlet
      edges:
        - {from: 0, to: 1, speed: 1.0}
        - {from: 1, to: 2, speed: 1.0}
        - {from: 1, to: 3, speed: 1.0, length: 2.0}
      alphas: {1: 1.0}
    initial_data:
      - edge: 1
        displacement: {kind: gaussian, center: 0.5, width: 0.05}
    simulation: {dt: 0.001, horizon: 8.0}
"""
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from stringnet.network import BoundaryKind


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


# --- Rede ---

class EdgeSpec(_Strict):
    from_node: int = Field(alias="from")
    to_node: int = Field(alias="to")
    speed: float
    length: Optional[float] = None
    """Comprimento físico; o carregador reescala a velocidade para comprimento unitário."""


class NetworkSpec(_Strict):
    nodes: int
    edges: List[EdgeSpec]
    alphas: Dict[int, float] = Field(default_factory=dict)
    root_bc: BoundaryKind = BoundaryKind.TRANSPARENT


# --- Dados iniciais ---

class ZeroProfile(_Strict):
    kind: Literal["zero"] = "zero"


class GaussianProfile(_Strict):
    kind: Literal["gaussian"]
    center: float
    width: float
    amplitude: float = 1.0


class SineProfile(_Strict):
    kind: Literal["sine"]
    mode: int
    amplitude: float = 1.0


class PolynomialProfile(_Strict):
    kind: Literal["polynomial"]
    coefficients: List[float]


ProfileSpec = Annotated[
    Union[ZeroProfile, GaussianProfile, SineProfile, PolynomialProfile],
    Field(discriminator="kind"),
]


class EdgeInitSpec(_Strict):
    edge: int
    displacement: ProfileSpec = Field(default_factory=ZeroProfile)
    velocity: ProfileSpec = Field(default_factory=ZeroProfile)


class EigenSeedSpec(_Strict):
    """Semeia a simulação com a parte real da autofunção de índice ``k`` (estrela ou osso)."""
    k: int = 0
    amplitude: float = 1.0


# --- Opções dos comandos ---

class SimulationSpec(_Strict):
    dt: float = 1e-3
    horizon: float = 1.0
    epsilon: Optional[float] = None
    stride: int = 1
    snapshot_times: List[float] = Field(default_factory=list)


class SpectrumSpec(_Strict):
    geometry: Literal["auto", "star", "bone"] = "auto"
    k_min: int = -2
    k_max: int = 2
    samples_per_edge: int = 101


class CrosscheckSpec(_Strict):
    points_per_edge: int = 400
    courant: float = 0.5
    compare_times: List[float] = Field(default_factory=lambda: [1.0])


class OutputSpec(_Strict):
    dir: str = "results"


class RunConfig(_Strict):
    network: NetworkSpec
    initial_data: List[EdgeInitSpec] = Field(default_factory=list)
    eigen_seed: Optional[EigenSeedSpec] = None
    simulation: SimulationSpec = Field(default_factory=SimulationSpec)
    spectrum: SpectrumSpec = Field(default_factory=SpectrumSpec)
    crosscheck: CrosscheckSpec = Field(default_factory=CrosscheckSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)


# --- Relatórios ---

class CommandResult(BaseModel):
    """Resultado de um comando: código de saída, linha de resumo e arquivos escritos."""
    command: str
    exit_code: int = 0
    message: str
    files: List[str] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)
    data: Dict[str, Any] = Field(default_factory=dict)
