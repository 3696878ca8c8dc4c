"""
Camada de persistência: toda tabela CSV emitida pelos comandos passa por aqui.

Os números saem em notação fixa com 17 dígitos significativos, de modo que
configurações idênticas produzem arquivos idênticos byte a byte.
"""
import logging
from pathlib import Path
from typing import Iterable, List, Union

import numpy as np
import pandas as pd

from stringnet.charsim import SimReport, Snapshot

logger = logging.getLogger(__name__)


def format_number(value: float) -> str:
    """Fixed notation, 17 significant digits."""
    return np.format_float_positional(value, precision=17, unique=False, fractional=False, trim="k")


# --- Diretórios e escrita ---

def get_output_dir(path: Union[str, Path]) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_table(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Escreve um DataFrame com cabeçalho e formato numérico estável."""
    path = Path(path)
    get_output_dir(path.parent)
    frame.to_csv(path, index=False, float_format=format_number, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


# --- Tabelas a partir dos relatórios ---

def energy_frame(report: SimReport) -> pd.DataFrame:
    return pd.DataFrame({"t": report.times, "E": report.energy, "sup_s": report.sup_s, "sup_d": report.sup_d})


def nodes_frame(report: SimReport) -> pd.DataFrame:
    columns = {"t": report.times}
    columns.update({f"v_{n}": v for n, v in report.node_velocity.items()})
    return pd.DataFrame(columns)


def snapshot_frame(snapshot: Snapshot) -> pd.DataFrame:
    parts = []
    for i, (x, u, s, d) in enumerate(zip(snapshot.x, snapshot.u, snapshot.s, snapshot.d), start=1):
        parts.append(pd.DataFrame({"edge": np.full(len(x), i), "x": x, "u": u, "s": s, "d": d}))
    return pd.concat(parts, ignore_index=True)


def snapshot_name(t: float) -> str:
    return f"snapshot_t{t:.6f}.csv"


def write_simulation(report: SimReport, out_dir: Union[str, Path]) -> List[Path]:
    """energy.csv, nodes.csv e um arquivo por snapshot."""
    out = get_output_dir(out_dir)
    written = [
        write_table(energy_frame(report), out / "energy.csv"),
        write_table(nodes_frame(report), out / "nodes.csv"),
    ]
    for snap in report.snapshots:
        written.append(write_table(snapshot_frame(snap), out / snapshot_name(snap.t)))
    return written


def write_rows(rows: Iterable[dict], path: Union[str, Path]) -> Path:
    return write_table(pd.DataFrame(list(rows)), path)
