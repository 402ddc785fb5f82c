"""Command-line interface.

Subcommands: ``mesh`` (cut-mesh generation), ``solve-elliptic``,
``solve-parabolic`` and ``convergence``.  Every option can also be supplied
through ``--config FILE`` holding ``key = value`` lines; explicit flags win
over the file.  Each run writes the effective settings to ``config.echo``
in its output location, and re-running with that file reproduces the
outputs bit for bit.

Exit codes: 0 success, 2 invalid parameters or presets, 1 I/O or solver
failure.  Messages go to standard error.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys

import numpy as np

from .analysis import (
    AnalysisError,
    ErrorRecorder,
    linf_error,
    nodal_l2_error_bulk,
    nodal_l2_error_surface,
    run_convergence_study,
)
from .geometry import AnalyticField, GeometryError, experiment_fields, unit_disc
from .linalg import SingularSystemError
from .mesh import (
    MeshFormatError,
    MeshGenerationError,
    generate_cartesian_cut,
    load_mesh,
    save_mesh,
    validate_mesh,
)
from .solvers import (
    EllipticProblem,
    SolverError,
    SnapshotWriter,
    TrajectoryRecorder,
    linear_coupling_problem,
    solve_elliptic,
    solve_parabolic,
    wave_pinning_problem,
    _write_nodal_csv,
)
from .vem import VemConfig, assemble


class CliValidationError(Exception):
    """Pre-dispatch parameter problem; maps to exit code 2."""


_VALIDATION_ERRORS = (
    CliValidationError,
    AnalysisError,
    SolverError,
    GeometryError,
    MeshGenerationError,
    ValueError,
)


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise CliValidationError("cannot parse boolean from %r" % text)


# Option tables: (name, type, default).  argparse always parses with
# default None; the config file fills gaps, then these defaults apply.
_COMMON = [("out", str, None), ("deterministic", bool, False)]
_OPTIONS = {
    "mesh": _COMMON
    + [("domain", str, "disc"), ("h", float, 0.1), ("eps", float, 0.1)],
    "solve-elliptic": _COMMON
    + [
        ("mesh", str, None),
        ("alpha", float, 1.0),
        ("beta", float, 2.0),
        ("preset", str, "elliptic-xy"),
        ("stab_scaling", str, "classic"),
        ("pinabla_zero_mode", str, "edge"),
    ],
    "solve-parabolic": _COMMON
    + [
        ("mesh", str, None),
        ("preset", str, "parabolic-xy"),
        ("tau", float, None),
        ("t_end", float, None),
        ("snap_every", int, 0),
        ("kinetics_variant", str, "plain-kinetics"),
        ("eps2", float, 0.001),
        ("k0", float, 0.05),
        ("gamma", float, 0.79),
        ("stab_scaling", str, "classic"),
        ("pinabla_zero_mode", str, "edge"),
    ],
    "convergence": _COMMON
    + [
        ("experiment", str, "elliptic-xy"),
        ("levels", int, 5),
        ("family", str, "cartesian-cut"),
        ("alpha", float, 1.0),
        ("beta", float, 2.0),
        ("eps", float, 0.1),
        ("tau0", float, 1e-2),
        ("t_end", float, 1.0),
        ("with_condition", bool, False),
        ("stab_scaling", str, "classic"),
        ("pinabla_zero_mode", str, "edge"),
    ],
}


def build_parser():
    parser = argparse.ArgumentParser(prog="bsvem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for command, opts in _OPTIONS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", default=None, help="key = value defaults file")
        for name, typ, _default in opts:
            flag = "--" + name.replace("_", "-")
            if typ is bool:
                p.add_argument(flag, dest=name, action="store_const", const=True, default=None)
            else:
                p.add_argument(flag, dest=name, type=typ, default=None)
    return parser


def _read_config(path):
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise CliValidationError(
                        "%s:%d: expected 'key = value'" % (path, lineno)
                    )
                key, _, val = line.partition("=")
                values[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise CliValidationError("cannot read config file: %s" % exc)
    return values


def _merge(args):
    """Overlay CLI flags > config file > table defaults; coerce types."""
    opts = _OPTIONS[args.command]
    known = {name: (typ, default) for name, typ, default in opts}
    fromfile = _read_config(args.config) if args.config else {}
    for key in fromfile:
        if key not in known:
            raise CliValidationError("unknown config key %r" % key)
    merged = {}
    for name, typ, default in opts:
        val = getattr(args, name)
        if val is None and name in fromfile:
            raw = fromfile[name]
            try:
                val = _bool(raw) if typ is bool else typ(raw)
            except ValueError:
                raise CliValidationError("config key %r: cannot parse %r" % (name, raw))
        if val is None:
            val = default
        merged[name] = val
    return merged


def _echo_config(cfg, command, path):
    lines = ["# effective settings, reusable via --config", "# command = " + command]
    for key in sorted(cfg):
        val = cfg[key]
        if val is None:
            continue
        if isinstance(val, bool):
            text = "true" if val else "false"
        elif isinstance(val, float):
            text = "%.17g" % val
        else:
            text = str(val)
        lines.append("%s = %s" % (key, text))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _apply_thread_limits(cfg):
    limit = "1" if cfg.get("deterministic") else os.environ.get("BSVEM_THREADS")
    if not limit:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ[var] = limit


def _require(cfg, key, what):
    if not cfg.get(key):
        raise CliValidationError("missing required option --%s (%s)" % (key.replace("_", "-"), what))


def _vem_config(cfg):
    return VemConfig(
        stab_scaling=cfg["stab_scaling"], pinabla_zero_mode=cfg["pinabla_zero_mode"]
    )


def _load_mesh_checked(path):
    if not os.path.exists(path):
        raise OSError("mesh file not found: %s" % path)
    return load_mesh(path)


def _outdir(cfg):
    _require(cfg, "out", "output directory")
    os.makedirs(cfg["out"], exist_ok=True)
    return cfg["out"]


# -- commands ---------------------------------------------------------------


def cmd_mesh(cfg):
    _require(cfg, "out", "output mesh file")
    if cfg["domain"] != "disc":
        raise CliValidationError("unknown domain %r (available: disc)" % cfg["domain"])
    if not 0.0 < cfg["eps"] < 0.5:
        raise CliValidationError("--eps must lie in (0, 0.5)")
    if cfg["h"] <= 0.0:
        raise CliValidationError("--h must be positive")
    domain = unit_disc()
    mesh = generate_cartesian_cut(domain, cfg["h"], eps=cfg["eps"])
    report = validate_mesh(mesh, domain)
    if not report.passed:
        print("generated mesh failed validation:", file=sys.stderr)
        for v in report.violations:
            print("  " + v, file=sys.stderr)
        return 1
    save_mesh(mesh, cfg["out"])
    _echo_config(cfg, "mesh", os.path.join(os.path.dirname(cfg["out"]) or ".", "config.echo"))
    print(
        "nodes=%d boundary_nodes=%d elements=%d boundary_elements=%d" % (
            mesh.num_nodes, mesh.num_boundary, mesh.num_elements, mesh.num_boundary
        )
    )
    print(
        "meshsize=%.6g min_star_ratio=%.6g min_distance_ratio=%.6g" % (
            mesh.meshsize, min(report.star_ratios), min(report.min_distance_ratios)
        )
    )
    return 0


def _write_errors(path, entries):
    with open(path, "w", newline="\n") as fh:
        fh.write("# nodal mass-matrix L2 norms and nodal max norms\n")
        for key, val in entries:
            fh.write("%s = %.17g\n" % (key, val))


def cmd_solve_elliptic(cfg):
    _require(cfg, "mesh", "input mesh file")
    if cfg["alpha"] <= 0 or cfg["beta"] <= 0:
        raise CliValidationError("--alpha and --beta must be positive")
    if cfg["preset"] not in ("elliptic-xy", "constant"):
        raise CliValidationError("unknown preset %r" % cfg["preset"])
    outdir = _outdir(cfg)
    mesh = _load_mesh_checked(cfg["mesh"])
    ops = assemble(mesh, _vem_config(cfg))
    alpha, beta = cfg["alpha"], cfg["beta"]
    if cfg["preset"] == "elliptic-xy":
        fields = experiment_fields("elliptic-xy", alpha=alpha, beta=beta)
    else:
        c1 = 2.0
        fields = {
            "u": AnalyticField.stationary(lambda x, y: np.full_like(np.asarray(x, float), c1), name="u"),
            "v": AnalyticField.stationary(
                lambda x, y: np.full_like(np.asarray(x, float), alpha * c1 / beta), name="v"
            ),
            "f": AnalyticField.stationary(lambda x, y: np.full_like(np.asarray(x, float), c1), name="f"),
            "g": AnalyticField.stationary(
                lambda x, y: np.full_like(np.asarray(x, float), alpha * c1 / beta), name="g"
            ),
        }
    problem = EllipticProblem(alpha=alpha, beta=beta, f=fields["f"], g=fields["g"])
    sol = solve_elliptic(ops, problem)
    _write_nodal_csv(os.path.join(outdir, "bulk.csv"), mesh.nodes, sol.xi)
    _write_nodal_csv(os.path.join(outdir, "surface.csv"), mesh.nodes[: mesh.num_boundary], sol.eta)
    l2b = nodal_l2_error_bulk(ops, sol.xi, fields["u"])
    l2s = nodal_l2_error_surface(ops, sol.eta, fields["v"])
    lib = linf_error(sol.xi, mesh, fields["u"], where="bulk")
    lis = linf_error(sol.eta, mesh, fields["v"], where="surface")
    _write_errors(
        os.path.join(outdir, "errors.txt"),
        [
            ("l2_bulk", l2b),
            ("l2_surface", l2s),
            ("l2_combined", math.sqrt(l2b * l2b + l2s * l2s)),
            ("linf_bulk", lib),
            ("linf_surface", lis),
            ("linf_combined", lib + lis),
        ],
    )
    _echo_config(cfg, "solve-elliptic", os.path.join(outdir, "config.echo"))
    print("l2_combined=%.6e linf_combined=%.6e" % (math.sqrt(l2b**2 + l2s**2), lib + lis))
    return 0


def cmd_solve_parabolic(cfg):
    _require(cfg, "mesh", "input mesh file")
    if cfg["preset"] not in ("parabolic-xy", "wavepin"):
        raise CliValidationError("unknown preset %r" % cfg["preset"])
    tau = cfg["tau"] if cfg["tau"] is not None else (2e-3 if cfg["preset"] == "wavepin" else 1e-3)
    t_end = cfg["t_end"] if cfg["t_end"] is not None else (4.5 if cfg["preset"] == "wavepin" else 1.0)
    if tau <= 0.0:
        raise CliValidationError("--tau must be positive")
    if t_end <= 0.0:
        raise CliValidationError("--t-end must be positive")
    if cfg["snap_every"] < 0:
        raise CliValidationError("--snap-every must be >= 0 (0 disables snapshots)")
    outdir = _outdir(cfg)
    mesh = _load_mesh_checked(cfg["mesh"])
    ops = assemble(mesh, _vem_config(cfg))
    if cfg["preset"] == "wavepin":
        problem = wave_pinning_problem(eps2=cfg["eps2"], k0=cfg["k0"], gamma=cfg["gamma"])
        exact = None
    else:
        problem = linear_coupling_problem()
        exact = experiment_fields("parabolic-xy")
    problem = dataclasses.replace(problem, kinetics_variant=cfg["kinetics_variant"])
    trajectory = TrajectoryRecorder(ops)
    observers = [trajectory]
    num_steps = int(math.ceil(t_end / tau - 1e-12))
    if cfg["snap_every"]:
        observers.append(
            SnapshotWriter(mesh, os.path.join(outdir, "snapshots"), every=cfg["snap_every"], final_step=num_steps)
        )
    recorder = None
    if exact is not None:
        recorder = ErrorRecorder(ops, exact["u"], exact["v"])
        observers.append(recorder)
    result = solve_parabolic(ops, problem, tau=tau, t_end=t_end, observers=observers)
    trajectory.write_csv(os.path.join(outdir, "trajectory.csv"))
    _write_nodal_csv(os.path.join(outdir, "bulk.csv"), mesh.nodes, result.xi)
    _write_nodal_csv(os.path.join(outdir, "surface.csv"), mesh.nodes[: mesh.num_boundary], result.eta)
    if recorder is not None:
        _write_errors(
            os.path.join(outdir, "errors.txt"),
            [("l2_sup", recorder.max_l2), ("linf_sup", recorder.max_linf)],
        )
    _echo_config(cfg, "solve-parabolic", os.path.join(outdir, "config.echo"))
    if not (np.isfinite(result.xi).all() and np.isfinite(result.eta).all()):
        print("solution contains non-finite values", file=sys.stderr)
        return 1
    print(
        "steps=%d t_final=%.6g mass_drift=%.3e bulk=[%.6g, %.6g] surf=[%.6g, %.6g]" % (
            result.num_steps,
            result.t_final,
            trajectory.mass_drift(),
            result.xi.min(),
            result.xi.max(),
            result.eta.min(),
            result.eta.max(),
        )
    )
    return 0


def cmd_convergence(cfg):
    if cfg["levels"] < 2:
        raise CliValidationError("--levels must be at least 2")
    outdir = _outdir(cfg)
    table = run_convergence_study(
        cfg["experiment"],
        levels=cfg["levels"],
        family=cfg["family"],
        alpha=cfg["alpha"],
        beta=cfg["beta"],
        eps=cfg["eps"],
        tau0=cfg["tau0"],
        t_end=cfg["t_end"],
        with_condition=cfg["with_condition"],
        config=_vem_config(cfg),
    )
    table.write_csv(os.path.join(outdir, "convergence.csv"))
    text = table.summary()
    with open(os.path.join(outdir, "table.txt"), "w", newline="\n") as fh:
        fh.write(text + "\n")
    _echo_config(cfg, "convergence", os.path.join(outdir, "config.echo"))
    print(text)
    if table.failures and not table.records:
        print("all levels failed", file=sys.stderr)
        return 1
    return 0


_DISPATCH = {
    "mesh": cmd_mesh,
    "solve-elliptic": cmd_solve_elliptic,
    "solve-parabolic": cmd_solve_parabolic,
    "convergence": cmd_convergence,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge(args)
        _apply_thread_limits(cfg)
        return _DISPATCH[args.command](cfg)
    except (OSError, MeshFormatError, SingularSystemError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except _VALIDATION_ERRORS as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except Exception as exc:
        print("internal error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
