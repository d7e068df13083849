"""
Regenerate the standard figures for the reference energy.

Figures:
- output/figures/cavity_family.svg: v(s) for a family of cavity speeds, cut at the shock
- output/figures/bifurcation.svg: dynamic Lambda(phi0) against equilibrium lambda(phi0)
- output/figures/rescaling.txt: sup distance of the rescaled profiles to the inner solution

Usage:
  python tools/reproduce_figures.py            # full grids
  python tools/reproduce_figures.py --quick    # coarse grids, a minute or so
  python tools/reproduce_figures.py --plane    # g(x) = 1/(x + 1) in two dimensions
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

from utils.bifurcation import figure_one_family, sweep, verify_limits, verify_rescaling  # noqa: E402
from utils.cavity_solver import StressFree  # noqa: E402
from utils.export import write_csv, write_text  # noqa: E402
from utils.graph_generator import Figure, Marker, Series, generate_svg_graph  # noqa: E402
from utils.stored_energy import ScalarModel, StoredEnergy, reference_energy  # noqa: E402

OUTPUT_DIR = ROOT / "output" / "figures"

FAMILY_SPEEDS = [0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 2.7]
RESCALING_GRID = [0.2, 0.1, 0.05, 0.025]


def energy_from_argv():
    if "--plane" in sys.argv:
        return StoredEnergy(ScalarModel.inverse_power_sum([(1.0, 1.0, 1.0)]), ScalarModel.log_entropy(1.0), 2)
    return reference_energy(3)


def family_figure(E, speeds):
    family = figure_one_family(E, StressFree(), speeds)
    fig = Figure(
        title="v(s) for a family of cavity speeds",
        x_label="s",
        y_label="v",
        series=[Series(f"phi0={c.phi0:g}", c.s, c.v) for c in family],
        markers=[Marker(c.sigma, c.v[-1], f"sigma={c.sigma:.6g}") for c in family],
    )
    print(f"[OK] Wrote {generate_svg_graph(fig, OUTPUT_DIR / 'cavity_family.svg')}")
    for c in family:
        print(f"  phi0={c.phi0:<6g} sigma={c.sigma:.10g}  v(0.05)-v(0+)={c.step_measure:.6g}")


def bifurcation_figure(E, grid):
    curve = sweep(E, StressFree(), grid, keep_trajectories=True, progress=True)
    good = curve.good()
    print(f"[OK] Wrote {write_csv(OUTPUT_DIR / 'bifurcation_dynamic.csv', curve.columns())}")
    fig = Figure(
        title="Bifurcation curves for statics and dynamics",
        x_label="phi0",
        y_label="stretch",
        series=[
            Series("dynamic Lambda", [p.phi0 for p in good], [p.Lambda for p in good]),
            Series("equilibrium lambda", curve.equilibrium.phi0, curve.equilibrium.lam, dashed=True),
        ],
        hlines=[(curve.Lambda0, f"Lambda0 = {curve.Lambda0:.6g}")],
    )
    print(f"[OK] Wrote {generate_svg_graph(fig, OUTPUT_DIR / 'bifurcation.svg')}")
    report = verify_limits(curve)
    print(report.to_text().rstrip())


def rescaling_report(E, grid):
    report = verify_rescaling(E, StressFree(), 2.0, grid)
    print(f"[OK] Wrote {write_text(OUTPUT_DIR / 'rescaling.txt', report.to_text())}")
    print(f"  fitted order {report.order:.4g}")


def main():
    quick = "--quick" in sys.argv
    E = energy_from_argv()
    print(f"Energy: {E.describe()}  H={E.H:.12g} nu={E.nu:.6g}\n")

    speeds = FAMILY_SPEEDS[::2] if quick else FAMILY_SPEEDS
    grid = sorted(set(RESCALING_GRID) | set(np.round(np.linspace(0.3, 2.7, 5 if quick else 20), 6)))
    family_figure(E, speeds)
    bifurcation_figure(E, grid)
    rescaling_report(E, RESCALING_GRID[:3] if quick else RESCALING_GRID)
    print(f"\n[OK] Figures in {OUTPUT_DIR}")


if __name__ == "__main__":
    main()
