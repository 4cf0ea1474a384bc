"""Gnuplot scripts for the written data files.

Scripts refer to their data by file name only, so an output directory can be
moved as a whole and rendered with ``gnuplot <stem>.gp`` from inside it.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from .emitter import EmitterParams, feature_catalog

_HEADER = """set datafile separator ','
set terminal pngcairo size 900,760 enhanced font ',12'
set output '{png}'
"""


def _guides(omega: float, half_range: float) -> list[str]:
    """Dashed lines at nu = 0, +-Omega on both axes plus three antidiagonals."""
    lines = []
    for x in (-omega, 0.0, omega):
        if abs(x) < half_range:
            lines.append(f"set arrow from {x:.6g},{-half_range:.6g} to {x:.6g},{half_range:.6g} nohead front dt 2 lc rgb 'grey40'")
            lines.append(f"set arrow from {-half_range:.6g},{x:.6g} to {half_range:.6g},{x:.6g} nohead front dt 2 lc rgb 'grey40'")
    for c in (-omega, 0.0, omega):
        lo, hi = max(-half_range, c - half_range), min(half_range, c + half_range)
        if hi > lo:
            lines.append(f"set arrow from {lo:.6g},{c - lo:.6g} to {hi:.6g},{c - hi:.6g} nohead front dt 3 lc rgb 'black'")
    return lines


def _markers(params: EmitterParams, half_range: float) -> list[str]:
    if params.detuning_ghz != 0 or params.rabi_ghz == 0:
        return []
    out = []
    for feat in feature_catalog(params):
        if abs(feat.nu1_ghz) <= half_range and abs(feat.nu2_ghz) <= half_range:
            out.append(
                f"set label '{feat.label}' at {feat.nu1_ghz:.6g},{feat.nu2_ghz:.6g} "
                "point pt 6 ps 1.2 lc rgb 'white' offset 0.6,0.6 front tc rgb 'white' font ',9'"
            )
    return out


def map_script(data_name: str, kind: str, params: EmitterParams, half_range: float, png: str) -> str:
    omega = params.generalized_rabi_ghz
    body = [_HEADER.format(png=png).rstrip()]
    body.append("set size ratio -1")
    body.append(f"set xrange [{-half_range:.6g}:{half_range:.6g}]")
    body.append(f"set yrange [{-half_range:.6g}:{half_range:.6g}]")
    body.append("set xlabel '{/Symbol n}_1 - {/Symbol n}_L (GHz)'")
    body.append("set ylabel '{/Symbol n}_2 - {/Symbol n}_L (GHz)'")
    body.extend(_guides(omega, half_range))
    body.extend(_markers(params, half_range))
    if kind == "tps":
        body.append("set palette defined (0 '#2c7bb6', 1 '#ffffbf', 2 '#d7191c')")
        body.append("set logscale cb")
        body.append("set cblabel 'g^{(2)}({/Symbol n}_1,{/Symbol n}_2,0)'")
    else:
        # diverging around R = 1; green marks Cauchy-Schwarz violation
        body.append("set logscale cb")
        body.append("set cbrange [1e-2:1e2]")
        body.append("set palette defined (0 '#762a83', 0.5 '#f7f7f7', 1 '#1b7837')")
        body.append("set cblabel 'R ( > 1 : nonclassical)'")
    body.append(f"plot '{data_name}' skip 1 using 1:2:3 with image notitle")
    return "\n".join(body) + "\n"


def trace_script(data_names: Sequence[str], labels: Sequence[str], png: str, offset: float = 1.0) -> str:
    """Delay traces; several traces are stacked with a vertical offset."""
    body = [_HEADER.format(png=png).rstrip()]
    body.append("set xlabel '{/Symbol t} (ns)'")
    body.append("set ylabel 'g^{(2)}({/Symbol t})" + (" + offset'" if len(data_names) > 1 else "'"))
    plots = []
    for k, (name, label) in enumerate(zip(data_names, labels)):
        shift = k * offset if len(data_names) > 1 else 0.0
        plots.append(f"'{name}' skip 1 using 1:($2+{shift:.6g}) with lines lw 2 title '{label}'")
    body.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(body) + "\n"


def spectrum_script(data_name: str, png: str) -> str:
    body = [_HEADER.format(png=png).rstrip()]
    body.append("set xlabel '{/Symbol n} - {/Symbol n}_L (GHz)'")
    body.append("set ylabel 'filtered intensity (peak = 1)'")
    body.append(f"plot '{data_name}' skip 1 using 1:2 with lines lw 2 notitle")
    return "\n".join(body) + "\n"


def write_script(path: Path, text: str) -> Path:
    path.write_text(text)
    return path
