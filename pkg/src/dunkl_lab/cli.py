"""Command-line interface.

Every subcommand reads the same flat INI config (``--config``, falling
back to built-in defaults), so a shell session and a driver script always
agree on the geometry, grid, kernel and operator parameters.  ``--seed``
overrides the config seed; experiment outputs (CSV, summary, figure) land
in ``--out``.
"""

from __future__ import annotations

import csv
import os
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import config as config_mod
from .config import ConfigError, config_to_text, default_config, load_config
from .grids import build_grid, grid_to_table, integrate, lp_norm, SampledFunction
from .heat import (HeatKernelModel, kernel_mass,
                   kernel_time_derivative, fit_gaussian_bound)
from .reflection import build_root_system, generate_group, scalar_invariants
from .experiments import (LabContext, apply_named_operator, bmo_battery,
                          build_context, effective_order, run as run_experiment)
from .spaces import (CZError, SpaceError, bmo_norm, bmo_rho_norm, blo_norm,
                     cz_decompose, cz_check, lattice_ball_family,
                     make_atom_laplacian, make_atom_size)


def _load(config_path) -> "config_mod.ExperimentConfig":
    try:
        return load_config(config_path) if config_path else default_config()
    except ConfigError as exc:
        raise click.ClickException(str(exc))


def _fmt(x) -> str:
    return format(float(x), ".12g")


def _out_file(out, default_name: str) -> Path:
    """Resolve --out to a writable file path: a directory (existing, or
    spelled with a trailing separator) receives the default file name."""
    p = Path(out)
    if p.is_dir() or str(out).endswith(os.sep):
        p = p / default_name
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _parse_point(text: str, d: int) -> np.ndarray:
    parts = [float(p) for p in text.replace(",", " ").split()]
    if len(parts) != d:
        raise click.ClickException(f"expected {d} coordinates, got {len(parts)}")
    return np.asarray(parts)


def _battery_function(ctx: LabContext, name: str, seed: int):
    for case, f in bmo_battery(ctx.grid, ctx.group, seed):
        if case == name:
            return f
    known = [c for c, _ in bmo_battery(ctx.grid, ctx.group, seed)]
    raise click.ClickException(f"unknown function {name!r}; choose from {known}")


def _input_function(ctx: LabContext, fn: str, center: str, scale: float,
                    seed: int):
    if fn == "bump":
        from .experiments import _concentration

        c = (_parse_point(center, ctx.grid.dimension) if center
             else np.zeros(ctx.grid.dimension))
        return _concentration(ctx.grid, c, scale)
    return _battery_function(ctx, fn, seed)


_FN_CHOICES = ["bump", "log_origin", "log_shift", "osc_log", "osc_trunc",
               "dyadic_signs", "const"]


@click.group()
def main():
    """Numerical laboratory for heat-semigroup analysis in the rational
    Dunkl setting: reflection groups, weighted grids, kernels, maximal /
    square / variation / oscillation operators, function spaces, and
    reproducible experiments."""


@main.command()
def defaults():
    """Print the built-in default config."""
    click.echo(config_to_text(default_config()), nl=False)


# ---------------------------------------------------------------------- root systems


@main.group()
def rootsys():
    """Root-system inspection."""


@rootsys.command("describe")
@click.option("--config", "config_path", type=click.Path(exists=True))
def rootsys_describe(config_path):
    """Print roots, positive roots, gamma, homogeneous dimension, group order."""
    cfg = _load(config_path)
    system = build_root_system(cfg.rootsys_spec())
    group = generate_group(system)
    inv = scalar_invariants(system, group)
    click.echo(f"family: {cfg.family}  dimension: {system.dimension}")
    click.echo(f"roots: {len(system.roots)}  positive: {len(system.positive_idx)}")
    for alpha, k in zip(system.positive_roots, system.positive_multiplicities):
        coords = " ".join(_fmt(a) for a in alpha)
        click.echo(f"  +root [{coords}]  multiplicity {_fmt(k)}")
    click.echo(f"gamma: {_fmt(inv.gamma)}")
    click.echo(f"homogeneous dimension: {_fmt(inv.homogeneous_dimension)}")
    click.echo(f"group order: {inv.group_order}")


# ---------------------------------------------------------------------- grids


@main.group()
def grid():
    """Weighted quadrature grids."""


@grid.command("build")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def grid_build(config_path, out):
    """Build the config grid and write the node/weight table."""
    cfg = _load(config_path)
    system = build_root_system(cfg.rootsys_spec())
    g = build_grid(system, cfg.box_halfwidth, cfg.resolution, cfg.grading)
    path = _out_file(out, "grid.csv")
    grid_to_table(g, path)
    click.echo(f"wrote {g.n_nodes} nodes to {path}")


@grid.command("check")
@click.option("--config", "config_path", type=click.Path(exists=True))
def grid_check(config_path):
    """Rebuild the config grid and run its internal consistency checks."""
    cfg = _load(config_path)
    system = build_root_system(cfg.rootsys_spec())
    g = build_grid(system, cfg.box_halfwidth, cfg.resolution, cfg.grading)
    group = generate_group(system)
    if cfg.family == "dihedral":
        # staggered axes keep nodes off the diagonal mirrors, so the node
        # set is only mirror-symmetric per axis, not invariant under the
        # full group; orbit geometry never relies on node-set invariance
        for axis in range(g.dimension):
            perm = g.sign_flip_index(axis)
            flipped = g.nodes.copy()
            flipped[:, axis] = -flipped[:, axis]
            assert np.array_equal(g.nodes[perm], flipped)
        invariance = "mirror-symmetric per axis"
    else:
        g.group_index_maps(group)      # raises if nodes are not G-invariant
        invariance = "group-invariant"
    assert np.all(g.quad_weights >= 0)
    mass = float(np.sum(g.quad_weights))
    click.echo(f"nodes: {g.n_nodes}  total mass: {_fmt(mass)}")
    click.echo(f"weights nonnegative: yes; node set {invariance}: yes")
    click.echo("PASS")


# ---------------------------------------------------------------------- kernel


@main.group()
def kernel():
    """Heat-kernel evaluation and bounds."""


@kernel.command("eval")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--t", "ts", required=True, help="comma-separated times")
@click.option("--x", "xs", required=True, help="point, comma-separated")
@click.option("--y", "ys", required=True, help="point, comma-separated")
@click.option("-m", "order", type=int, default=None, help="derivative order")
@click.option("--out", type=click.Path(), default=None)
def kernel_eval(config_path, ts, xs, ys, order, out):
    """Evaluate t^m d_t^m T_t(x, y) at the given times."""
    cfg = _load(config_path)
    system = build_root_system(cfg.rootsys_spec())
    model = HeatKernelModel(system, fd_relative_step=cfg.fd_relative_step,
                            richardson_levels=cfg.richardson_levels)
    m = cfg.derivative_order if order is None else order
    x = _parse_point(xs, system.dimension)
    y = _parse_point(ys, system.dimension)
    rows = []
    for t in (float(p) for p in ts.replace(",", " ").split()):
        val = kernel_time_derivative(model, m, t, x, y)
        rows.append((t, val))
        click.echo(f"t={_fmt(t)}  value={_fmt(val)}")
    if out:
        path = _out_file(out, "kernel.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "value", "derivative_order"])
            for t, val in rows:
                w.writerow([_fmt(t), " ".join(map(_fmt, x)),
                            " ".join(map(_fmt, y)), _fmt(val), m])
        click.echo(f"wrote {path}")


@kernel.command("check-normalization")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--tol", type=float, default=1e-5, show_default=True)
def kernel_check_normalization(config_path, tol):
    """Check integral T_t(x, .) d omega = 1 over a probe lattice."""
    cfg = _load(config_path)
    system = build_root_system(cfg.rootsys_spec())
    model = HeatKernelModel(system, fd_relative_step=cfg.fd_relative_step,
                            richardson_levels=cfg.richardson_levels)
    d = system.dimension
    worst = 0.0
    for t in (0.1, 1.0, 10.0):
        for r in (0.0, 0.7, 2.0):
            x = np.full(d, r / np.sqrt(d)) if r else np.zeros(d)
            err = abs(kernel_mass(model, t, x) - 1.0)
            worst = max(worst, err)
            click.echo(f"t={t:g} |x|={r:g}: mass deviation {err:.3e}")
    verdict = "PASS" if worst <= tol else "FAIL"
    click.echo(f"worst deviation {worst:.3e} (tol {tol:g}): {verdict}")
    if verdict == "FAIL":
        sys.exit(1)


@kernel.command("fit-bound")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("-m", "order", type=int, default=0, show_default=True)
@click.option("--decay-rate", type=float, default=0.125, show_default=True)
def kernel_fit_bound(config_path, order, decay_rate):
    """Fit the constant in the Gaussian-type kernel bound."""
    cfg = _load(config_path)
    from .experiments import _bound_samples

    system = build_root_system(cfg.rootsys_spec())
    group = generate_group(system)
    model = HeatKernelModel(system, fd_relative_step=cfg.fd_relative_step,
                            richardson_levels=cfg.richardson_levels)
    fit = fit_gaussian_bound(model, group, _bound_samples(cfg, 0.05, 5.0),
                             order, decay_rate=decay_rate)
    click.echo(f"constant: {_fmt(fit.constant)}")
    click.echo(f"decay rate: {_fmt(fit.decay_rate)}  m: {fit.m}")
    click.echo(f"argmax: t={_fmt(fit.argmax[0])} x={fit.argmax[1]} y={fit.argmax[2]}")
    click.echo(f"samples: {fit.n_samples}  boundary maximizer: "
               f"{'yes' if fit.argmax_on_boundary else 'no'}")


# ---------------------------------------------------------------------- operators


@main.group()
def op():
    """Operator evaluation on the config grid."""


def _op_command(operator):
    @click.option("--config", "config_path", type=click.Path(exists=True))
    @click.option("--fn", type=click.Choice(_FN_CHOICES), default="bump",
                  show_default=True)
    @click.option("--center", default="", help="bump center, comma-separated")
    @click.option("--scale", type=float, default=0.2, show_default=True)
    @click.option("-m", "order", type=int, default=None)
    @click.option("--out", required=True, type=click.Path())
    def command(config_path, fn, center, scale, order, out):
        cfg = _load(config_path)
        if order is not None:
            cfg = replace(cfg, derivative_order=order)
        cfg = replace(cfg, operator=operator)
        ctx = build_context(cfg)
        f = _input_function(ctx, fn, center, scale, cfg.seed)
        result = apply_named_operator(ctx, f, operator, cfg.derivative_order)
        d = ctx.grid.dimension
        path = _out_file(out, f"{operator}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{j}" for j in range(d)] + ["value"])
            for node, val in zip(ctx.grid.nodes, result.values):
                w.writerow([_fmt(c) for c in node] + [_fmt(val)])
        click.echo(f"{operator}: sup {_fmt(np.max(result.values))}, "
                   f"L1(omega) {_fmt(lp_norm(ctx.grid, result, 1.0))}")
        click.echo(f"wrote {path}")

    command.__name__ = f"op_{operator}"
    command.__doc__ = f"Apply the {operator} operator and write nodewise values."
    return command


for _name in ("maximal", "gfunc", "variation", "oscillation"):
    op.command(_name)(_op_command(_name))


# ---------------------------------------------------------------------- spaces


@main.group()
def space():
    """Function-space norms, atoms and decompositions."""


def _space_norm_command(which):
    @click.option("--config", "config_path", type=click.Path(exists=True))
    @click.option("--fn", type=click.Choice(_FN_CHOICES[1:]),
                  default="log_origin", show_default=True)
    def command(config_path, fn):
        cfg = _load(config_path)
        ctx = build_context(cfg)
        f = _battery_function(ctx, fn, cfg.seed)
        family = lattice_ball_family(ctx.grid)
        if which == "bmo":
            val = bmo_norm(ctx.grid, f, family)
        elif which == "bmorho":
            val = bmo_rho_norm(ctx.grid, ctx.group, f, family)
        else:
            val = blo_norm(ctx.grid, f, family)
        click.echo(f"{which}({fn}) = {_fmt(val)}")

    command.__name__ = f"space_{which}"
    command.__doc__ = f"Compute the {which} norm of a battery function."
    return command


for _name in ("bmo", "bmorho", "blo"):
    space.command(_name)(_space_norm_command(_name))


@space.command("atoms")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--count", type=int, default=5, show_default=True)
@click.option("--kind", type=click.Choice(["size", "laplacian"]),
              default="laplacian", show_default=True)
@click.option("--out", required=True, type=click.Path())
def space_atoms(config_path, count, kind, out):
    """Generate atoms and write a manifest recording seeds and norms."""
    cfg = _load(config_path)
    ctx = build_context(cfg)
    rng = np.random.default_rng(cfg.seed)
    L = cfg.box_halfwidth
    d = ctx.grid.dimension
    rows = []
    made = 0
    for i in range(count):
        radius = float(np.exp(rng.uniform(np.log(0.8), np.log(2.4))))
        center = rng.uniform(-0.45 * L, 0.45 * L, size=d)
        center = np.clip(center, -(0.9 * L - radius), 0.9 * L - radius)
        seed = int(rng.integers(0, 2 ** 31))
        try:
            if kind == "size":
                atom = make_atom_size(ctx.grid, center, radius, 2.0, seed)
            else:
                atom = make_atom_laplacian(ctx.grid, center, radius, seed)
        except SpaceError as exc:
            rows.append([f"atom{i:03d}", kind, " ".join(map(_fmt, center)),
                         _fmt(radius), seed, "", "", f"skipped: {exc}"])
            continue
        made += 1
        rows.append([f"atom{i:03d}", kind, " ".join(map(_fmt, center)),
                     _fmt(radius), seed,
                     _fmt(lp_norm(ctx.grid, atom.values, atom.q)),
                     _fmt(atom.ball_measure), "ok"])
    path = _out_file(out, "atoms.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["atom_id", "kind", "center", "radius", "seed",
                    "lq_norm", "ball_measure", "status"])
        w.writerows(rows)
    click.echo(f"made {made}/{count} atoms; manifest at {path}")


@space.command("czd")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--fn", type=click.Choice(_FN_CHOICES), default="bump",
              show_default=True)
@click.option("--center", default="", help="bump center, comma-separated")
@click.option("--scale", type=float, default=0.5, show_default=True)
@click.option("--level-multiple", type=float, default=3.0, show_default=True,
              help="decomposition level as a multiple of the global average")
@click.option("--out", required=True, type=click.Path())
def space_czd(config_path, fn, center, scale, level_multiple, out):
    """Run the stopping-time decomposition and report its contract values."""
    cfg = _load(config_path)
    ctx = build_context(cfg)
    f = _input_function(ctx, fn, center, scale, cfg.seed)
    avg = (integrate(ctx.grid, np.abs(f.values))
           / float(np.sum(ctx.grid.quad_weights)))
    try:
        dec = cz_decompose(ctx.grid, f, level_multiple * avg)
    except CZError as exc:
        raise click.ClickException(str(exc))
    checks = cz_check(ctx.grid, f, dec)
    path = _out_file(out, "cubes.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cube_id", "center", "radius", "corner", "side"])
        for i, ((c, r), (corner, side)) in enumerate(zip(dec.balls, dec.cubes)):
            w.writerow([f"cube{i:03d}", " ".join(map(_fmt, c)), _fmt(r),
                        " ".join(map(_fmt, corner)), _fmt(side)])
    for key in sorted(checks):
        click.echo(f"{key}: {checks[key]}")
    click.echo(f"wrote {len(dec.balls)} cubes to {path}")


# ---------------------------------------------------------------------- run


@main.command("run")
@click.argument("experiment")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--out", type=click.Path(), default=None,
              help="output directory (default: the config's out)")
def run_cmd(experiment, config_path, seed, out):
    """Run an experiment driver; write CSV, summary and figure."""
    cfg = _load(config_path)
    try:
        cfg = replace(cfg, experiment=experiment)
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        config_mod.validate(cfg)
        report = run_experiment(cfg, out_dir=out or cfg.out)
    except ConfigError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"experiment: {report.name}  cases: {len(report.rows)}")
    for key in sorted(report.summary):
        click.echo(f"{key}: {report.summary[key]}")
    click.echo(f"maximizing case: {report.maximizing_case}")
    click.echo(f"wall clock: {report.wall_clock:.2f}s")
    if report.failures:
        for failure in report.failures:
            click.echo(f"FAIL: {failure}", err=True)
        sys.exit(1)
    click.echo("PASS")


if __name__ == "__main__":
    main()
