"""Command-line interface.

Subcommands: analyze (per-spring CSV), sweep (ratio sweep CSV plus a
rendered figure), colormap (SVG of smallest eigenvalues), solve
(displacement CSV plus residual summary), verify (invariant suites) and
generate (write a mesh file).

Exit codes: 0 success, 1 usage error, 2 input error, 3 numerical
failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .analysis import analyze_mesh
from .elasticity import (
    IsotropicMaterial,
    material_from_poisson,
    plane_stress_material,
    read_tensor,
)
from .errors import (
    AssemblyError,
    MaterialError,
    MeshError,
    MeshFormatError,
    SolverError,
    SpringFemError,
    UsageError,
)
from .mesh import generate_mesh, jitter, mesh_text, parse_mesh
from .reporting import (
    DEFAULT_NU_GRID,
    colormap_svg,
    poisson_grid,
    springs_csv,
    sweep_csv,
    sweep_figure,
    sweep_mesh,
)
from .system import (
    build_system,
    displacement_csv,
    fem_residual,
    solvability_check,
    solve,
    spring_residual,
)
from .verify import GROUPS, verify_all, verify_csv

#: cmd solve exits 0 only when both residual maxima stay below this.
SOLVE_RESIDUAL_LIMIT = 1e-8

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_mesh_flags(p, repeatable: bool = False):
    kwargs = {"action": "append", "default": []} if repeatable else {}
    p.add_argument("--mesh", metavar="PATH", help="springmesh file", **kwargs)
    p.add_argument(
        "--gen",
        metavar="SPEC",
        help="mesh generator spec, e.g. equilateral:8 or patch_square",
        **kwargs,
    )
    p.add_argument(
        "--jitter",
        type=float,
        default=0.0,
        metavar="AMP",
        help="perturb interior nodes by offsets in [-AMP, AMP]^d",
    )
    p.add_argument("--seed", type=int, default=0, help="seed for --jitter (default 0)")


def _add_material_flags(p):
    p.add_argument("--nu", type=float, help="Poisson ratio in (-1, 0.5)")
    p.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        help="first Lame parameter (mutually exclusive with --nu)",
    )
    p.add_argument("--mu", type=float, default=1.0, help="shear modulus (default 1)")
    p.add_argument(
        "--plane-stress",
        action="store_true",
        help="treat the material as 3D under plane stress (2D meshes only)",
    )


def _add_out_flag(p, default: str, what: str):
    p.add_argument("--out", default=default, help=f"{what} (default {default!r})")


def build_parser() -> _Parser:
    parser = _Parser(prog="springfem", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="write the per-spring analysis CSV")
    _add_mesh_flags(p)
    _add_material_flags(p)
    _add_out_flag(p, "-", "output CSV path, - for stdout")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="percent of pd springs across a ratio grid")
    _add_mesh_flags(p, repeatable=True)
    p.add_argument("--nu-min", type=float, help="grid start (default -0.95)")
    p.add_argument("--nu-max", type=float, help="grid end (default 0.49)")
    p.add_argument("--nu-step", type=float, help="grid step (default 0.01)")
    p.add_argument(
        "--count-all",
        action="store_true",
        help="count all springs, not only pairs with an interior endpoint",
    )
    p.add_argument(
        "--plane-stress",
        action="store_true",
        help="classify under plane stress; inadmissible grid ratios are skipped",
    )
    _add_out_flag(p, "sweep.csv", "output CSV path, - for stdout")
    p.add_argument("--fig", metavar="PATH", help="figure path (default: CSV path with .png)")
    p.add_argument("--no-fig", action="store_true", help="skip rendering the figure")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("colormap", help="SVG of springs colored by smallest eigenvalue")
    _add_mesh_flags(p)
    _add_material_flags(p)
    _add_out_flag(p, "-", "output SVG path, - for stdout")
    p.set_defaults(func=cmd_colormap)

    p = sub.add_parser("solve", help="solve the pinned force-balance problem")
    _add_mesh_flags(p)
    _add_material_flags(p)
    p.add_argument(
        "--tensor",
        metavar="PATH",
        help="full elasticity tensor file (instead of --nu/--lambda)",
    )
    p.add_argument("--f", type=float, nargs="+", metavar="V", help="constant body force")
    p.add_argument(
        "--f-linear",
        type=float,
        nargs="+",
        metavar="V",
        help="linear body force: d*d entries of B row-major, then d entries of c",
    )
    p.add_argument("--g", type=float, nargs="+", metavar="V", help="constant boundary displacement")
    p.add_argument(
        "--g-linear",
        type=float,
        nargs="+",
        metavar="V",
        help="linear boundary displacement: B row-major, then c",
    )
    _add_out_flag(p, "-", "displacement CSV path, - for stdout")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="run the self-verification suites")
    p.add_argument(
        "--group",
        action="append",
        choices=sorted(GROUPS),
        help="run only this group (repeatable; default all)",
    )
    _add_out_flag(p, "-", "report CSV path, - for stdout")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("generate", help="write a generated mesh as a springmesh file")
    p.add_argument("--gen", metavar="SPEC", required=True, help="mesh generator spec")
    p.add_argument("--jitter", type=float, default=0.0, metavar="AMP")
    p.add_argument("--seed", type=int, default=0)
    _add_out_flag(p, "-", "output mesh path, - for stdout")
    p.set_defaults(func=cmd_generate)
    return parser


def _write(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _load_one_mesh(args):
    if args.mesh and args.gen:
        raise UsageError("--mesh and --gen are mutually exclusive")
    if args.mesh:
        mesh = parse_mesh(args.mesh)
    elif args.gen:
        mesh = generate_mesh(args.gen)
    else:
        raise UsageError("a mesh is required: pass --mesh or --gen")
    if args.jitter:
        mesh = jitter(mesh, args.jitter, args.seed)
    return mesh


def _load_meshes(args):
    specs = [(label, True) for label in args.gen] + [(path, False) for path in args.mesh]
    if not specs:
        raise UsageError("at least one mesh is required: pass --mesh or --gen")
    out = []
    for token, is_gen in specs:
        mesh = generate_mesh(token) if is_gen else parse_mesh(token)
        label = token if is_gen else Path(token).name
        if args.jitter:
            mesh = jitter(mesh, args.jitter, args.seed)
            label += "+jitter"
        out.append((label, mesh))
    return out


def _material(args) -> IsotropicMaterial:
    if args.nu is not None and args.lam is not None:
        raise UsageError("--nu and --lambda are mutually exclusive")
    if args.nu is None and args.lam is None:
        raise UsageError("a material is required: pass --nu or --lambda")
    if args.nu is not None:
        return material_from_poisson(args.nu, args.mu)
    return IsotropicMaterial(args.lam, args.mu)


def _field(const, linear, dim: int, what: str):
    if const is not None and linear is not None:
        raise UsageError(f"--{what} and --{what}-linear are mutually exclusive")
    if const is not None:
        if len(const) != dim:
            raise UsageError(f"--{what} needs {dim} values, got {len(const)}")
        return np.asarray(const, dtype=float)
    if linear is not None:
        need = dim * dim + dim
        if len(linear) != need:
            raise UsageError(
                f"--{what}-linear needs {need} values (B row-major, then c), got {len(linear)}"
            )
        b = np.asarray(linear[: dim * dim], dtype=float).reshape(dim, dim)
        c = np.asarray(linear[dim * dim :], dtype=float)
        return lambda x: x @ b.T + c
    return None


def cmd_analyze(args) -> int:
    mesh = _load_one_mesh(args)
    analysis = analyze_mesh(mesh, _material(args), plane_stress=args.plane_stress)
    _write(springs_csv(analysis), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    meshes = _load_meshes(args)
    if args.nu_min is None and args.nu_max is None and args.nu_step is None:
        grid = DEFAULT_NU_GRID
    else:
        lo = -0.95 if args.nu_min is None else args.nu_min
        hi = 0.49 if args.nu_max is None else args.nu_max
        step = 0.01 if args.nu_step is None else args.nu_step
        try:
            grid = poisson_grid(lo, hi, step)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if grid.size == 0:
        raise UsageError("ratio grid is empty")
    if grid.min() <= -1.0 or grid.max() >= 0.5:
        raise UsageError("ratio grid must lie inside (-1, 0.5)")

    results = [
        sweep_mesh(
            mesh,
            label,
            nu_values=grid,
            count_all=args.count_all,
            plane_stress=args.plane_stress,
        )
        for label, mesh in meshes
    ]
    _write(sweep_csv(results), args.out)
    if not args.no_fig:
        fig_path = args.fig
        if fig_path is None:
            fig_path = "sweep.png" if args.out == "-" else str(Path(args.out).with_suffix(".png"))
        sweep_figure(results, fig_path)
    return EXIT_OK


def cmd_colormap(args) -> int:
    mesh = _load_one_mesh(args)
    svg = colormap_svg(mesh, _material(args), plane_stress=args.plane_stress)
    _write(svg, args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    mesh = _load_one_mesh(args)
    if args.tensor is not None:
        if args.nu is not None or args.lam is not None:
            raise UsageError("--tensor replaces --nu/--lambda")
        if args.plane_stress:
            raise UsageError("--plane-stress needs an isotropic material")
        material = read_tensor(args.tensor)
        material.validate(tol=1e-12)
        if material.dim != mesh.dim:
            raise MaterialError(
                f"tensor dimension {material.dim} does not match mesh dimension {mesh.dim}"
            )
    else:
        material = _material(args)
        if args.plane_stress:
            if mesh.dim != 2:
                raise MaterialError("plane stress applies to 2D meshes only")
            material = plane_stress_material(material)

    f = _field(args.f, args.f_linear, mesh.dim, "f")
    g = _field(args.g, args.g_linear, mesh.dim, "g")
    system = build_system(mesh, material, f=f, g=g)

    chain = solvability_check(system)
    if not chain.certified:
        print(
            f"warning: solvability not certified ({chain.uncertified_nodes.size} interior "
            "node(s) unreachable through positive-definite springs); solving anyway",
            file=sys.stderr,
        )

    u = solve(system)
    _write(displacement_csv(mesh, u), args.out)

    r_spring = float(np.abs(spring_residual(system, u)).max())
    r_fem = float(np.abs(fem_residual(mesh, system.tensor, u, f)).max())
    print(f"max spring-form residual: {r_spring:.3e}", file=sys.stderr)
    print(f"max fem-form residual:    {r_fem:.3e}", file=sys.stderr)
    ok = r_spring <= SOLVE_RESIDUAL_LIMIT and r_fem <= SOLVE_RESIDUAL_LIMIT
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_verify(args) -> int:
    groups = verify_all(args.group)
    _write(verify_csv(groups), args.out)
    failed = sum(g.failures for g in groups)
    return EXIT_VERIFICATION if failed else EXIT_OK


def cmd_generate(args) -> int:
    mesh = generate_mesh(args.gen)
    if args.jitter:
        mesh = jitter(mesh, args.jitter, args.seed)
    _write(mesh_text(mesh), args.out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MeshFormatError, MeshError, MaterialError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (AssemblyError, SolverError, SpringFemError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
