"""Bundle files and plot-data rendering.

Plot data is derived only from the payload files in a bundle, so ``report``
can regenerate it later from what is on disk.
"""

from __future__ import annotations

import csv
import io
import json
from collections import OrderedDict
from pathlib import Path

import yaml

from .chaos import windowed_variance
from .dynamics import Trajectory


def write_text(path: Path, text: str) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)


def write_json(path: Path, obj) -> None:
    write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _g(x) -> str:
    return f"{float(x):.17g}"


def variance_plot(on: Trajectory, deprived: Trajectory, window: float) -> str:
    v_on = windowed_variance(on, "R", window)
    v_off = windowed_variance(deprived, "R", window)
    buf = io.StringIO()
    buf.write("t_center,var_R_input,var_R_deprived\n")
    for (t, a), (_, b) in zip(v_on, v_off):
        buf.write(f"{_g(t)},{_g(a)},{_g(b)}\n")
    return buf.getvalue()


def _slot_aggregates(battery_text: str) -> "OrderedDict[str, tuple[str, str]]":
    out = OrderedDict()
    for row in csv.DictReader(io.StringIO(battery_text)):
        out.setdefault(row["slot"], (row["t_admin"], row["aggregate"]))
    return out


def recuperation_plot(battery_text: str, twin_text: str) -> str:
    subject = _slot_aggregates(battery_text)
    twin = _slot_aggregates(twin_text)
    buf = io.StringIO()
    buf.write("slot,t_admin,subject_aggregate,twin_aggregate\n")
    for slot, (t, agg) in subject.items():
        buf.write(f"{slot},{t},{agg},{twin.get(slot, ('', ''))[1]}\n")
    return buf.getvalue()


def sweep_plot(sweep_text: str) -> str:
    """Per-value summary of a sweep CSV: section spread, or degradation for k_days."""
    reader = csv.reader(io.StringIO(sweep_text))
    header = next(reader)
    param = header[0]
    buf = io.StringIO()
    if param == "k_days":
        idx = header.index("degradation")
        buf.write("k_days,degradation\n")
        for row in reader:
            buf.write(f"{row[0]},{row[idx]}\n")
        return buf.getvalue()
    groups: "OrderedDict[str, list[float]]" = OrderedDict()
    for value, _, abs_d in reader:
        groups.setdefault(value, []).append(float(abs_d))
    buf.write(f"{param},spread\n")
    for value, xs in groups.items():
        spread = max(xs) - min(xs)
        buf.write(f"{value},{_g(spread)}\n")
    return buf.getvalue()


def render_bundle(bundle: Path) -> list[str]:
    """Regenerate every plot-data file the bundle's payloads support."""
    bundle = Path(bundle)
    written = []
    if (bundle / "battery.csv").exists():
        twin = bundle / "twin_battery.csv"
        text = recuperation_plot((bundle / "battery.csv").read_text(),
                                 twin.read_text() if twin.exists() else "slot,t_admin,task_kind,score,aggregate\n")
        write_text(bundle / "plot_recuperation.csv", text)
        written.append("plot_recuperation.csv")
    if (bundle / "trajectory_input.csv").exists():
        window, h = 10.0, None
        cfg_path = bundle / "effective_config.yaml"
        if cfg_path.exists():
            sim = yaml.safe_load(cfg_path.read_text())["simulate"]
            window, h = sim["window"], sim["h"]
        on = Trajectory.from_csv((bundle / "trajectory_input.csv").read_text(), h)
        off = Trajectory.from_csv((bundle / "trajectory_deprived.csv").read_text(), h)
        write_text(bundle / "plot_variance.csv", variance_plot(on, off, window))
        written.append("plot_variance.csv")
    if (bundle / "sweep.csv").exists():
        write_text(bundle / "plot_sweep.csv", sweep_plot((bundle / "sweep.csv").read_text()))
        written.append("plot_sweep.csv")
    return written
