"""
Print a cavitating trajectory next to its shock connection and the p identity.

Usage:
  python tools/inspect_trajectory.py                 # reference energy, phi0 = 1
  python tools/inspect_trajectory.py 0.25            # another cavity speed
  python tools/inspect_trajectory.py 0.25 --every 5  # thin the printed rows

Outputs:
- output/inspect_trajectory_<phi0>.txt: the printed table
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT))

from utils.cavity_solver import CavityConfig, dp_identity, find_connection, solve_cavity  # noqa: E402
from utils.export import write_text  # noqa: E402
from utils.stored_energy import reference_energy  # noqa: E402

OUTPUT_DIR = ROOT / "output"


def parse_args(argv):
    phi0, every = 1.0, 20
    rest = list(argv)
    if "--every" in rest:
        i = rest.index("--every")
        every = int(rest[i + 1])
        del rest[i : i + 2]
    if rest:
        phi0 = float(rest[0])
    return phi0, every


def main():
    phi0, every = parse_args(sys.argv[1:])
    E = reference_energy(3)
    traj = solve_cavity(CavityConfig(E=E, phi0=phi0))
    conn = find_connection(traj)

    lines = [
        f"phi0={phi0:g} v0={traj.cfg.v0:.12g} s0={traj.start.s0:.3g} c0={traj.start.c0:.12g}",
        f"stop={traj.stop_reason} T={traj.T:.15g} samples={len(traj.s)}",
        f"{conn.kind}: sigma={conn.sigma:.15g} Lambda={conn.Lambda:.15g} jump={conn.jump:.6g} "
        f"lax={conn.lax_ok} dp/ds={conn.dp_ds:.6g}",
        "",
        f"{'s':>14} {'a':>14} {'b':>14} {'v':>14} {'Q':>14} {'p':>14}",
    ]
    for i in range(0, len(traj.s), every):
        lines.append(
            f"{traj.s[i]:14.8g} {traj.a[i]:14.8g} {traj.b[i]:14.8g} {traj.v[i]:14.8g} {traj.Q[i]:14.6g} {traj.p[i]:14.6g}"
        )

    ident = dp_identity(traj, stride=every)
    if len(ident.s):
        gap = np.abs(ident.lhs - ident.rhs) / np.maximum(1.0, np.abs(ident.rhs))
        lines += ["", f"p identity: {len(ident.s)} samples, max relative gap {gap.max():.3g}, rhs < 0: {bool(np.all(ident.rhs < 0))}"]

    text = "\n".join(lines) + "\n"
    print(text, end="")
    path = write_text(OUTPUT_DIR / f"inspect_trajectory_{phi0:g}.txt", text)
    print(f"[OK] Wrote {path}")


if __name__ == "__main__":
    main()
