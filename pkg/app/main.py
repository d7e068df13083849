"""Command line entry point.

    python -m app.main check        --config configs/reference.ini
    python -m app.main cavity       --config configs/reference.ini --phi0 1
    python -m app.main bifurcation  --config configs/reference.ini --threads 4
    python -m app.main inner        --config configs/reference.ini
    python -m app.main equilibrium  --config configs/reference.ini

Exit codes: 0 ok, 1 solver failure, 2 configuration error.
"""

from __future__ import annotations

import functools
import logging
import sys
import warnings
from pathlib import Path
from typing import Optional

import click
from dotenv import load_dotenv

from app.config import RunConfig, env_log_level, env_output_dir, env_threads, load_config
from utils.bifurcation import LIMIT_WINDOW, figure_one_family, sweep, verify_limits, verify_rescaling
from utils.cavity_solver import CavityConfig, find_connection, solve_cavity
from utils.errors import CavitationError, ConfigError, SlowConvergenceWarning
from utils.export import format_value, summary_text, write_csv, write_text
from utils.graph_generator import Figure, Marker, Series, generate_svg_graph
from utils.inner_limit import lower_bounds, solve_equilibrium_curve, solve_inner
from utils.stored_energy import check_hypotheses

logger = logging.getLogger("app")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2
MIN_OK_FRACTION = 0.9


class Context:
    def __init__(self, cfg: RunConfig, out: Path, svg: bool, threads: int, quiet: bool):
        self.cfg = cfg
        self.out = out
        self.svg = svg
        self.threads = threads
        self.quiet = quiet
        self.E = cfg.energy.build()
        self.boundary = cfg.boundary.build()
        self.tol = cfg.solver.tolerances()

    def echo(self, message: str) -> None:
        if not self.quiet:
            click.echo(message)

    def wrote(self, path: Path) -> None:
        self.echo(f"[OK] Wrote {path}")


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="[%(levelname)s %(name)s] %(message)s",
        stream=sys.stderr,
        force=True,
    )


def common_options(fn):
    @click.option("--config", "config_path", type=click.Path(path_type=Path), help="INI run configuration.")
    @click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None, help="Output directory.")
    @click.option("--svg/--no-svg", default=None, help="Write SVG figures (default from [output]).")
    @click.option("--threads", type=int, default=None, help="Worker processes for sweeps.")
    @click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR.")
    @click.option("--quiet", is_flag=True, help="Suppress status lines and progress bars.")
    @functools.wraps(fn)
    def wrapper(config_path, out_dir, svg, threads, log_level, quiet, **kwargs):
        load_dotenv()
        configure_logging(log_level or env_log_level("WARNING" if quiet else "INFO"))
        try:
            cfg = load_config(config_path)
            out = Path(out_dir or env_output_dir(cfg.output.directory))
            ctx = Context(
                cfg=cfg,
                out=out,
                svg=cfg.output.svg if svg is None else svg,
                threads=threads if threads is not None else env_threads(1),
                quiet=quiet,
            )
        except ConfigError as exc:
            click.echo(f"[ERROR] {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        logger.debug("config %s: %s, output to %s", config_path, ctx.E.describe(), ctx.out)
        try:
            code = fn(ctx, **kwargs)
        except ConfigError as exc:
            click.echo(f"[ERROR] {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except CavitationError as exc:
            click.echo(f"[ERROR] {exc.code}: {exc}", err=True)
            sys.exit(EXIT_SOLVER)
        sys.exit(code or EXIT_OK)

    return wrapper


@click.group()
def cli():
    """Self-similar cavitation in radial elastodynamics."""


@cli.command()
@common_options
def check(ctx: Context) -> int:
    """Report hypotheses H0-H8 for the configured energy."""
    report = check_hypotheses(ctx.E)
    text = report.to_text()
    ctx.echo(text.rstrip())
    ctx.wrote(write_text(ctx.out / "check_report.txt", text))
    if not report.solvable:
        failed = [n for n in ("H0", "H1", "H2", "H3", "H4") if not report.verdicts[n].ok]
        click.echo(f"[WARN] not solvable: {', '.join(failed)} fail", err=True)
        return EXIT_SOLVER
    return EXIT_OK


def _phi0_tag(phi0: float) -> str:
    return f"{phi0:.6g}".replace(".", "p")


@cli.command()
@common_options
@click.option("--phi0", type=float, default=1.0, show_default=True, help="Cavity speed.")
@click.option("--v0", type=float, default=None, help="Override the volume ratio at the cavity.")
@click.option("--family", is_flag=True, help="Solve the whole sweep grid and plot the v(s) family.")
def cavity(ctx: Context, phi0: float, v0: Optional[float], family: bool) -> int:
    """Cavitating trajectory and its shock connection for one cavity speed."""
    if family:
        return _cavity_family(ctx)
    cfg = CavityConfig(E=ctx.E, phi0=phi0, boundary=ctx.boundary, tol=ctx.tol, v0=v0)
    traj = solve_cavity(cfg)
    conn = find_connection(traj)
    tag = _phi0_tag(phi0)
    ctx.wrote(write_csv(ctx.out / f"cavity_phi0_{tag}.csv", traj.columns()))
    summary = {
        "phi0": phi0,
        "v0": cfg.v0,
        "s0": cfg.s0,
        "c0": traj.start.c0,
        "T": traj.T,
        "stop": traj.stop_reason,
        "sigma": conn.sigma,
        "Lambda": conn.Lambda,
        "a_minus": conn.a_minus,
        "jump": conn.jump,
        "log_jump": conn.log_jump,
        "kind": conn.kind,
        "lax_ok": conn.lax_ok,
        "lax_margin_lower": conn.lax_margins[0],
        "lax_margin_upper": conn.lax_margins[1],
        "first_family_lax_ok": conn.first_family_ok,
        "dp_ds": conn.dp_ds,
        "residual": conn.residual,
        "p_terminal": conn.p_terminal,
    }
    text = summary_text(summary)
    ctx.echo(text.rstrip())
    ctx.wrote(write_text(ctx.out / f"cavity_phi0_{tag}_summary.txt", text))
    if ctx.svg:
        keep = traj.s <= conn.sigma
        fig = Figure(
            title=f"v(s), phi0 = {phi0:g}",
            x_label="s",
            y_label="v",
            series=[Series(f"phi0={phi0:g}", traj.s[keep], traj.v[keep])],
            markers=[Marker(conn.sigma, conn.Lambda**ctx.E.d, f"sigma={conn.sigma:.6g}")],
        )
        ctx.wrote(generate_svg_graph(fig, ctx.out / f"cavity_phi0_{tag}.svg"))
    return EXIT_OK


def _cavity_family(ctx: Context) -> int:
    grid = ctx.cfg.sweep.grid()
    family = figure_one_family(ctx.E, ctx.boundary, grid, ctx.tol)
    columns = {
        "phi0": [c.phi0 for c in family],
        "sigma": [c.sigma for c in family],
        "step_measure": [c.step_measure for c in family],
    }
    ctx.wrote(write_csv(ctx.out / "cavity_family.csv", columns))
    if ctx.svg:
        fig = Figure(
            title="v(s) for a family of cavity speeds",
            x_label="s",
            y_label="v",
            series=[Series(f"phi0={c.phi0:.3g}", c.s, c.v) for c in family],
            markers=[Marker(c.sigma, c.v[-1], f"sigma={c.sigma:.6g}") for c in family],
        )
        ctx.wrote(generate_svg_graph(fig, ctx.out / "cavity_family.svg"))
    return EXIT_OK


@cli.command()
@common_options
@click.option("--rescaling", is_flag=True, help="Also check the rescaled convergence order.")
def bifurcation(ctx: Context, rescaling: bool) -> int:
    """Dynamic and equilibrium bifurcation curves over the sweep grid."""
    grid = ctx.cfg.sweep.grid()
    curve = sweep(
        ctx.E,
        ctx.boundary,
        grid,
        ctx.tol,
        threads=ctx.threads,
        keep_trajectories=True,
        progress=not ctx.quiet and sys.stderr.isatty(),
    )
    ctx.wrote(write_csv(ctx.out / "bifurcation_dynamic.csv", curve.columns()))
    ctx.wrote(write_csv(ctx.out / "bifurcation_equilibrium.csv", curve.equilibrium.columns()))

    lo, hi = curve.inner.bracket
    lines = [
        summary_text(
            {
                "points": len(curve.points),
                "ok_fraction": curve.ok_fraction,
                "Lambda0": curve.Lambda0,
                "Lambda0_bracket_lo": lo,
                "Lambda0_bracket_hi": hi,
                "sigma0": curve.sigma0,
            }
        )
    ]
    small = [p for p in curve.good() if p.phi0 <= LIMIT_WINDOW]
    if len(small) >= 4:
        lines.append(verify_limits(curve).to_text())
    if rescaling:
        sw = ctx.cfg.sweep
        lines.append(verify_rescaling(ctx.E, ctx.boundary, sw.rescaling_tau, sw.rescaling_grid, ctx.tol).to_text())
    report = "".join(lines)
    ctx.echo(report.rstrip())
    ctx.wrote(write_text(ctx.out / "bifurcation_report.txt", report))

    if ctx.svg:
        good = curve.good()
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
        ctx.wrote(generate_svg_graph(fig, ctx.out / "bifurcation.svg"))

    if curve.ok_fraction < MIN_OK_FRACTION:
        click.echo(f"[WARN] only {curve.ok_fraction:.0%} of sweep points converged", err=True)
        return EXIT_SOLVER
    return EXIT_OK


@cli.command()
@common_options
@click.option("--v0", type=float, default=None, help="Volume ratio at the cavity (default V(0)).")
def inner(ctx: Context, v0: Optional[float]) -> int:
    """Inner solution, critical stretch bracket and its representations."""
    v0 = ctx.boundary.v0(ctx.E, 0.0) if v0 is None else v0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SlowConvergenceWarning)
        sol = solve_inner(ctx.E, v0, tol=ctx.tol)
    for w in caught:
        click.echo(f"[WARN] {w.message}", err=True)
    ctx.wrote(write_csv(ctx.out / f"inner_v0_{_phi0_tag(v0)}.csv", sol.columns()))
    lo, hi = sol.bracket
    items = {
        "v0": v0,
        "xi_end": sol.xi_max,
        "bracket_lo": lo,
        "bracket_hi": hi,
        "Lambda0": sol.Lambda0,
        "half_width": sol.half_width,
        "Lambda0_repr1": sol.Lambda0_repr1,
        "repr1_uncertainty": sol.repr1_uncertainty,
        "Lambda0_repr2": sol.Lambda0_repr2 if sol.Lambda0_repr2 is not None else "n/a",
        "repr2_uncertainty": sol.repr2_uncertainty,
    }
    for bound in lower_bounds(sol):
        verdict = "n/a" if not bound.applicable else ("holds" if bound.holds else "fails")
        items[f"lower_bound {bound.name}"] = f"{format_value(bound.value)} ({verdict})"
    text = summary_text(items)
    ctx.echo(text.rstrip())
    ctx.wrote(write_text(ctx.out / f"inner_v0_{_phi0_tag(v0)}_summary.txt", text))
    return EXIT_OK


@cli.command()
@common_options
def equilibrium(ctx: Context) -> int:
    """Equilibrium stretch lambda(phi0) over the sweep grid."""
    curve = solve_equilibrium_curve(ctx.E, ctx.boundary, ctx.cfg.sweep.grid(), ctx.tol)
    ctx.wrote(write_csv(ctx.out / "equilibrium.csv", curve.columns()))
    if ctx.svg:
        fig = Figure(
            title="Equilibrium bifurcation curve",
            x_label="phi0",
            y_label="lambda",
            series=[Series("equilibrium lambda", curve.phi0, curve.lam)],
        )
        ctx.wrote(generate_svg_graph(fig, ctx.out / "equilibrium.svg"))
    failed = [p for p in curve.points if p.status != "ok"]
    if failed:
        click.echo(f"[WARN] {len(failed)} equilibrium points failed", err=True)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    cli()
