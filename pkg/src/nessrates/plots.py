"""Plot-script emission. Scripts read the CSVs at run time; nothing is rendered here."""
from __future__ import annotations

import csv
from pathlib import Path

from .errors import ConfigError

_PRELUDE = '''\
"""Generated plot script; reads {csv_name} from this directory."""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
with open(HERE / "{csv_name}", newline="") as fh:
    rows = list(csv.DictReader(fh))


def col(name):
    return [float(r[name]) if r[name] != "" else float("nan") for r in rows]

'''

_LINES = '''\
x = col({x!r})
fig, ax = plt.subplots(figsize=(5, 4))
for name in {ys!r}:
    ax.loglog(x, [abs(v) for v in col(name)], marker="o", label=name)
ax.set_xlabel({x!r})
ax.set_ylabel("rate (a.u.)")
ax.legend()
fig.tight_layout()
fig.savefig(HERE / "{stem}.png", dpi=150)
'''

_HEATMAP = '''\
import numpy as np

xs, ys, zs = col({x!r}), col({y!r}), col({z!r})
ux, uy = sorted(set(xs)), sorted(set(ys))
grid = np.full((len(uy), len(ux)), np.nan)
for a, b, c in zip(xs, ys, zs):
    grid[uy.index(b), ux.index(a)] = c
fig, ax = plt.subplots(figsize=(5, 4))
mesh = ax.pcolormesh(ux, uy, np.log10(np.abs(grid)), shading="nearest")
fig.colorbar(mesh, ax=ax, label="log10 {z}")
ax.set_xscale("log")
ax.set_yscale("log")
ax.set_xlabel({x!r})
ax.set_ylabel({y!r})
fig.tight_layout()
fig.savefig(HERE / "{stem}.png", dpi=150)
'''

_TWO_PANEL = '''\
t = col("t")
fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(6, 6))
for name in {pops!r}:
    top.plot(t, col(name), label=name)
top.set_ylabel("population")
top.legend()
for name in {terms!r}:
    bottom.plot(t, col(name), label=name)
bottom.set_xlabel("t (a.u.)")
bottom.set_ylabel("dp/dt terms")
bottom.legend(fontsize="small", ncol=2)
fig.tight_layout()
fig.savefig(HERE / "{stem}.png", dpi=150)
'''


def _header(path: Path) -> list[str]:
    with open(path, newline="") as fh:
        try:
            return next(csv.reader(fh))
        except StopIteration:
            raise ConfigError(f"{path.name} is empty") from None


def _require(path: Path, header: list[str], needed) -> None:
    missing = [c for c in needed if c not in header]
    if missing:
        raise ConfigError(f"{path.name}: missing columns {missing}")


def sweep_script(path: Path, axes: list[str] | None = None) -> str:
    """Log-log rate curves for a 1-D sweep, or a heatmap of ``beta`` for a 2-D one."""
    header = _header(path)
    axes = axes or [h for h in header if "." in h]
    _require(path, header, axes)
    if not axes:
        raise ConfigError(f"{path.name}: missing columns ['<swept parameter>']")
    body = _PRELUDE.format(csv_name=path.name)
    if len(axes) == 2:
        z = "beta" if "beta" in header else next((h for h in header if h.startswith("k_")), None)
        if z is None:
            raise ConfigError(f"{path.name}: missing columns ['beta']")
        return body + _HEATMAP.format(x=axes[0], y=axes[1], z=z, stem=path.stem)
    ys = [h for h in header if h in ("forward_rate", "backward_rate", "k_1g", "k_21") or
          (h.startswith("k_") and h.split("_")[1] != h.split("_")[-1])]
    if not ys:
        raise ConfigError(f"{path.name}: missing columns ['forward_rate' or 'k_*']")
    return body + _LINES.format(x=axes[0], ys=ys, stem=path.stem)


def dynamics_script(path: Path) -> str:
    """Populations on top, Markovian and memory terms below."""
    header = _header(path)
    _require(path, header, ["t"])
    pops = [h for h in header if h.startswith("p_")]
    terms = [h for h in header if h.startswith(("m1_", "m2_"))]
    if not pops or not terms:
        raise ConfigError(f"{path.name}: missing columns ['p_*', 'm1_*', 'm2_*']")
    return _PRELUDE.format(csv_name=path.name) + _TWO_PANEL.format(pops=pops, terms=terms, stem=path.stem)


def emit_plots(output_dir: str | Path) -> list[Path]:
    """Write ``plot_<csv>.py`` next to each recognized CSV and return their paths."""
    out = Path(output_dir)
    written = []
    for name, make in (("sweep.csv", sweep_script), ("dynamics.csv", dynamics_script)):
        path = out / name
        if path.exists():
            script = out / f"plot_{path.stem}.py"
            script.write_text(make(path))
            written.append(script)
    return written
