"""
Artifact Plots
Static SVG line plots of the CSV artifacts written by the experiment commands:
norms and strip width against time for a single run, and the rescaled-gap
ratio against sigma for a sweep.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from matplotlib.figure import Figure

from errors import PlotError

logger = logging.getLogger(__name__)

HEADER_PREFIX = "# muskat-lab"

NORM_COLUMNS = ("t", "gamma", "E", "hk_h", "hk_theta", "diss_k")
SWEEP_PLOT_COLUMNS = ("sigma", "theta_ratio_sup", "reached_horizon")


@dataclass
class Table:
    """Parsed artifact CSV: its kind from the header comment, and raw cells by column."""
    kind: str
    config_hash: str
    header: List[str] = field(default_factory=list)
    rows: List[Tuple[int, List[str]]] = field(default_factory=list)
    path: str = ""

    def require(self, names) -> None:
        missing = [name for name in names if name not in self.header]
        if missing:
            raise PlotError(f"{self.path}: missing columns {', '.join(missing)}")

    def has(self, name: str) -> bool:
        return name in self.header

    def column(self, name: str) -> np.ndarray:
        """Float values of one column; booleans read as 0/1."""
        self.require([name])
        index = self.header.index(name)
        values = []
        for lineno, cells in self.rows:
            try:
                values.append(_to_float(cells[index]))
            except ValueError:
                raise PlotError(f"{self.path}: row {lineno} column {name} is not numeric "
                                f"({cells[index]!r})") from None
        return np.array(values, dtype=float)

    def __len__(self) -> int:
        return len(self.rows)


def _to_float(value: str) -> float:
    lowered = value.strip().lower()
    if lowered in ("true", "false"):
        return 1.0 if lowered == "true" else 0.0
    return float(value)


def read_table(path: Union[str, Path]) -> Table:
    """
    Parse an artifact CSV.

    Comment lines start with '#'; the first of them names the artifact kind
    ("# muskat-lab norms v1 config=<hash>").

    Raises:
        PlotError: unreadable file, no header, or ragged rows
            (the message carries the 1-based line number)
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise PlotError(f"cannot read {path}: {e}") from e

    table = Table(kind="unknown", config_hash="", path=str(path))
    header = None
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if not row:
            continue
        if row[0].startswith("#"):
            words = ",".join(row).split()
            if row[0].startswith(HEADER_PREFIX) and len(words) >= 3:
                table.kind = words[2]
                table.config_hash = next(
                    (w.split("=", 1)[1] for w in words if w.startswith("config=")), "")
            continue
        if header is None:
            header = [name.strip() for name in row]
            continue
        if len(row) != len(header):
            raise PlotError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
        table.rows.append((lineno, row))

    if header is None:
        raise PlotError(f"{path}: no column header found")
    table.header = header
    return table


def _log_scale_ok(*series) -> bool:
    return all(np.all(np.asarray(s)[np.isfinite(s)] > 0.0) and np.any(np.isfinite(s)) for s in series)


def _new_axes():
    # pyplot-free: render runs on web request threads
    fig = Figure(figsize=(7, 4.5))
    return fig, fig.subplots()


def plot_norms(table: Table, out_dir: Union[str, Path]) -> List[Path]:
    """norms.svg (energy, H^k norms, dissipation vs t) and gamma.svg (strip width vs t)."""
    table.require(NORM_COLUMNS)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t = table.column("t")
    series = {name: table.column(name) for name in ("E", "hk_h", "hk_theta", "diss_k")}

    fig, ax = _new_axes()
    for name, values in series.items():
        ax.plot(t, values, label=name, linewidth=1.4)
    if _log_scale_ok(*series.values()):
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.set_title(f"strip norms (config {table.config_hash or '?'})")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    norms_path = out_dir / "norms.svg"
    fig.savefig(norms_path, format="svg", bbox_inches="tight")

    fig, ax = _new_axes()
    ax.plot(t, table.column("gamma"), color="tab:purple", linewidth=1.4)
    ax.set_xlabel("t")
    ax.set_ylabel("gamma")
    ax.set_title("strip width")
    ax.grid(True, alpha=0.3)
    gamma_path = out_dir / "gamma.svg"
    fig.savefig(gamma_path, format="svg", bbox_inches="tight")
    return [norms_path, gamma_path]


def plot_sweep(table: Table, out_dir: Union[str, Path]) -> List[Path]:
    """theta_ratio.svg: sup_t ||theta||/sigma against sigma, hollow markers for early stops."""
    table.require(SWEEP_PLOT_COLUMNS)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sigma = table.column("sigma")
    ratio = table.column("theta_ratio_sup")
    reached = table.column("reached_horizon") > 0.5

    fig, ax = _new_axes()
    ax.scatter(sigma[reached], ratio[reached], color="tab:blue", label="reached horizon", zorder=3)
    if np.any(~reached):
        ax.scatter(sigma[~reached], ratio[~reached], facecolors="none", edgecolors="tab:red",
                   label="stopped early", zorder=3)
    if table.has("theta_ratio_initial"):
        ax.plot(sigma, table.column("theta_ratio_initial"), linestyle="--", color="gray",
                label="initial")
    if _log_scale_ok(sigma):
        ax.set_xscale("log")
    ax.set_xlabel("sigma")
    ax.set_ylabel("sup_t ||theta|| / sigma")
    ax.set_title(f"rescaled gap across sigma (config {table.config_hash or '?'})")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    path = out_dir / "theta_ratio.svg"
    fig.savefig(path, format="svg", bbox_inches="tight")
    return [path]


PLOTTERS = {"norms": plot_norms, "sweep": plot_sweep}


def render(path: Union[str, Path], out_dir: Union[str, Path, None] = None) -> List[Path]:
    """Plot one artifact CSV next to itself (or into ``out_dir``)."""
    table = read_table(path)
    if len(table) == 0:
        logger.warning("⚠ %s has no data rows", path)
    plotter = PLOTTERS.get(table.kind)
    if plotter is None and table.kind != "unknown":
        raise PlotError(f"{path}: no plot defined for {table.kind} artifacts")
    if plotter is None:
        # untagged files are recognised by their columns
        plotter = plot_sweep if table.has("sigma") else plot_norms
    written = plotter(table, out_dir if out_dir is not None else Path(path).parent)
    for item in written:
        logger.info("✓ wrote %s", item)
    return written
