"""
Ponto de entrada de linha de comando do stringnet (camada "controller").

::

    python -m app.cli validate   --config stringnet/configs/star_fts.yml
    python -m app.cli timing     --config stringnet/configs/fourteen_node.yml --out results/
    python -m app.cli simulate   --config stringnet/configs/star_fts.yml --dt 0.001 --horizon 8 --stride 10
    python -m app.cli spectrum   --config stringnet/configs/star_spectrum.yml --sweep "alpha_1=-1:2.5:0.5"
    python -m app.cli crosscheck --config stringnet/configs/star_crosscheck.yml

Códigos de saída: 0 ok, 1 outro erro de domínio, 2 problema mal posto,
3 topologia, 4 passo de tempo, 5 E/S ou configuração.
"""
import logging
import os
import sys
from typing import List, Optional

import fire
from dotenv import load_dotenv

from app import services

logger = logging.getLogger(__name__)


def get_log_level() -> str:
    return os.getenv("STRINGNET_LOG_LEVEL", "INFO").upper()


def _finish(name: str, **kwargs):
    result = services.run_command(name, **kwargs)
    print(result.message)
    for note in result.notes:
        print(f"note: {note}")
    for path in result.files:
        logger.info(f"Arquivo gerado: {path}")
    sys.exit(result.exit_code)


def validate(config: str):
    """Valida a topologia e a condição de boa colocação (alpha_n != k_n)."""
    _finish("validate", config=config)


def timing(config: str, out: Optional[str] = None):
    """Tempos t_i, T(R) por folha, T(T) e extinção prevista."""
    _finish("timing", config=config, out=out)


def simulate(config: str, out: Optional[str] = None, dt: Optional[float] = None, horizon: Optional[float] = None,
             epsilon: Optional[float] = None, stride: Optional[int] = None):
    """Roda o simulador de características e grava energy.csv, nodes.csv e snapshots."""
    _finish("simulate", config=config, out=out, dt=dt, horizon=horizon, epsilon=epsilon, stride=stride)


def spectrum(config: str, out: Optional[str] = None, sweep: Optional[str] = None):
    """Escada de autovalores, resíduos das autofunções e varredura em alpha."""
    _finish("spectrum", config=config, out=out, sweep=sweep)


def crosscheck(config: str, out: Optional[str] = None, dt: Optional[float] = None):
    """Compara o simulador de características com o solver de diferenças finitas."""
    _finish("crosscheck", config=config, out=out, dt=dt)


def main(argv: Optional[List[str]] = None):
    load_dotenv()
    logging.basicConfig(level=get_log_level(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    fire.Fire(
        {
            "validate": validate,
            "timing": timing,
            "simulate": simulate,
            "spectrum": spectrum,
            "crosscheck": crosscheck,
        },
        command=argv,
        name="stringnet",
    )


if __name__ == "__main__":
    main()
