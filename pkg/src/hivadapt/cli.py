"""Command-line front end.

    hivadapt reconstruct --patient 1 --out runs/p1
    hivadapt twin --etrue step:30:1:3 --gamma0 0.01 --refinements 3 --out runs/twin
    hivadapt forward --patient 1 --tau 0.5 --out runs/fwd

Exit codes: 0 success, 2 solver failure, 64 usage or input error.
"""
from __future__ import annotations

import argparse
import json
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import report
from .adaptive import AcgaConfig, acga_run
from .data import builtin_patient, load_csv
from .errors import HivAdaptError, InvalidArgument, OptimizerError, ParseError, SchemaError, SolverError
from .forward import DEFAULT_N_SUB, NewtonConfig, solve_forward
from .mesh import uniform_mesh, weighted_l2
from .model import PATIENT_CTL, ModelParams
from .optimizer import CgaConfig
from .problems import PatientSetup, TwinSetup, ctl_profiles, identifiable_mask, parse_e_profile, window_error

EXIT_OK, EXIT_SOLVER, EXIT_USAGE = 0, 2, 64
TOOL = "hivadapt"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _source_flags(p, allow_all=False):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--patient", type=int, choices=[1, 2, 3, 4], help="built-in patient record")
    g.add_argument("--data", type=str, help="CSV with time_days,log10_viral_load,total_t_cells_per_ml")
    if allow_all:
        g.add_argument("--patients", choices=["all"], help="run all four built-in patients concurrently")
    p.add_argument("--ctl-patient", type=int, choices=[1, 2, 3, 4],
                   help="CTL parameter set to use with --data (default 1)")


def _recon_flags(p):
    p.add_argument("--refinements", type=int, default=4)
    p.add_argument("--beta", type=float, default=0.875, help="refinement fraction in (0,1)")
    p.add_argument("--gamma0", type=float, default=0.1)
    p.add_argument("--p", type=float, default=0.5, help="decay exponent of the gamma schedule")
    p.add_argument("--theta", type=float, default=1e-3)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--taper", type=float, default=0.0, help="smoothing-weight taper [days]")
    p.add_argument("--project-box", action=argparse.BooleanOptionalAction, default=True,
                   help="clamp iterates into [1, 10]")
    p.add_argument("--restart", choices=["initial", "previous"], default="previous")
    p.add_argument("--gamma-mode", choices=["reset", "continue"], default="continue")
    p.add_argument("--growth-factor", type=float, default=None,
                   help="stop CGA when ||G|| exceeds this multiple of its running minimum")
    p.add_argument("--level-stop", action="store_true",
                   help="stop refining once the final gradient norm stops decreasing")
    p.add_argument("--n-sub", type=int, default=DEFAULT_N_SUB, help="implicit sub-steps per interval")
    p.add_argument("--no-figures", action="store_true")


def _out_flags(p):
    p.add_argument("--out", type=str, help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.add_argument("--from-manifest", type=str, help="rerun the configuration stored in a manifest")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog=TOOL, description="Adaptive reconstruction of the immune response function E(t).")
    ap.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    r = sub.add_parser("reconstruct", help="ACGA reconstruction from clinical data")
    _source_flags(r, allow_all=True)
    _recon_flags(r)
    _out_flags(r)

    t = sub.add_parser("twin", help="twin experiment with synthetic data from a known E")
    _source_flags(t)
    t.add_argument("--noise", type=float, default=0.0, help="relative uniform noise level")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--etrue", type=str, default="step:30:1:3",
                   help="patient1-profile | constant:<v> | step:<t>:<a>:<b>")
    t.add_argument("--prior", type=str, default="constant:1", help="prior / initial guess, same syntax")
    _recon_flags(t)
    _out_flags(t)

    f = sub.add_parser("forward", help="forward trajectory for a given E")
    _source_flags(f)
    f.add_argument("--e", type=str, default="profile", help="profile | constant:<v> | step:<t>:<a>:<b>")
    f.add_argument("--tau", type=float, default=1.0)
    f.add_argument("--t-end", type=float, default=363.0)
    f.add_argument("--x0", type=str, default=None, help="initial state u1,u2,u3")
    f.add_argument("--n-sub", type=int, default=DEFAULT_N_SUB)
    f.add_argument("--no-figures", action="store_true")
    _out_flags(f)
    return ap


# ---------------------------------------------------------------- helpers

def _series_and_ctl(a):
    if a.data:
        series = load_csv(a.data)
        ctl = PATIENT_CTL[a.ctl_patient or 1]
    else:
        n = a.patient or 1
        series = builtin_patient(n)
        ctl = PATIENT_CTL[a.ctl_patient or n]
    return series, ctl


def _acga_config(a) -> AcgaConfig:
    inner = CgaConfig(gamma0=a.gamma0, p=a.p, theta=a.theta, max_iters=a.max_iters,
                      project=a.project_box, growth_factor=a.growth_factor)
    return AcgaConfig(beta_refine=a.beta, max_refinements=a.refinements,
                      restart_from="initial_guess" if a.restart == "initial" else "previous_result",
                      inner=inner, gamma_mode=a.gamma_mode, level_stop=a.level_stop)


def _prepare_out(a, default: str) -> Path:
    out = Path(a.out or default)
    if out.exists() and any(out.iterdir()):
        if not a.force:
            raise UsageError(f"{out} is not empty; pass --force to overwrite")
        old = out / "manifest.json"
        if old.exists():
            for item in json.loads(old.read_text()).get("outputs", []):
                (out / item["path"]).unlink(missing_ok=True)
            old.unlink()
        fig = out / "figures"
        if fig.is_dir():
            shutil.rmtree(fig)
    out.mkdir(parents=True, exist_ok=True)
    return out


_NOT_RECORDED = {"out", "force", "from_manifest", "patients"}


def _arguments(a) -> dict:
    return {k: v for k, v in sorted(vars(a).items()) if k not in _NOT_RECORDED}


def _write_manifest(out: Path, a, config: dict, files, levels=None, extra=None):
    inventory = [{"path": str(Path(f).relative_to(out)), "sha256": report.sha256(f)} for f in files]
    man = {
        "tool": TOOL,
        "version": __version__,
        "command": a.command,
        "arguments": _arguments(a),
        "config": config,
        "levels": levels or [],
        "outputs": inventory,
    }
    if extra:
        man.update(extra)
    (out / "manifest.json").write_text(json.dumps(man, indent=2, allow_nan=True) + "\n", encoding="utf-8")
    return man


def _base_config(a, series, ctl, x0):
    return {
        "model": ModelParams().to_dict(),
        "ctl": ctl.to_dict(),
        "newton": NewtonConfig().to_dict(),
        "data_source": a.data or f"builtin:patient{a.patient or 1}",
        "data": {"times": series.times.tolist(), "log10_v": series.log10_v.tolist(),
                 "sigma": series.sigma.tolist()},
        "initial_state": list(x0),
        "n_sub": getattr(a, "n_sub", DEFAULT_N_SUB),
    }


# ---------------------------------------------------------------- commands

def cmd_reconstruct(a) -> int:
    if a.patients == "all":
        return _fan_out(a)
    series, ctl = _series_and_ctl(a)
    cfg = _acga_config(a)
    out = _prepare_out(a, f"runs/{series.patient_id}")
    setup = PatientSetup(series, ctl, n_sub=a.n_sub, taper_days=a.taper)
    res = acga_run(setup, cfg, t_end=series.t_end)
    return _emit(a, out, res, series, ctl, cfg)


def _emit(a, out, res, series, ctl, cfg, twin=None):
    files, e_true_list, extra_cols = [], None, None
    if twin is not None:
        e_true_list = [twin.e_true_on(r.mesh) for r in res]
        errs, abs_errs = [], []
        for r, et in zip(res, e_true_list):
            mask = identifiable_mask(r.result.evaluation.traj)
            errs.append(window_error(r.e, et, mask))
            abs_errs.append(weighted_l2(r.e.values - et.values, r.mesh))
        extra_cols = {"rel_err_window": errs, "abs_err_l2": abs_errs}
    for i, r in enumerate(res):
        files += report.write_level(out, r, e_true_list[i] if e_true_list else None)
    files.append(report.write_summary(out, res.records, extra_cols))
    if not a.no_figures:
        report.plot_reconstruction(out, res.records, e_true_list)
    config = _base_config(a, series, ctl, series.initial_state())
    config["acga"] = cfg.to_dict()
    if twin is not None:
        config["twin"] = {"e_true": twin.e_true, "noise": twin.noise, "seed": twin.seed, "prior": twin.prior}
    levels = [r.summary() for r in res]
    if extra_cols:
        for k, v in extra_cols.items():
            for lv, x in zip(levels, v):
                lv[k] = x
    _write_manifest(out, a, config, files, levels, {"stop_reason": res.stop_reason})
    _print_summary(res, extra_cols)
    return EXIT_OK


def _print_summary(res, extra_cols=None):
    cols = ["k", "nno", "||R1||", "||R2||", "iters", "termination"]
    if extra_cols:
        cols.append("rel_err")
    print("  ".join(f"{c:>12}" for c in cols))
    for i, r in enumerate(res):
        row = [r.level, r.nno, f"{r.norm_r1:.4f}", f"{r.norm_r2:.4f}", r.result.iterations, r.result.reason]
        if extra_cols:
            row.append(f"{extra_cols['rel_err_window'][i]:.4f}")
        print("  ".join(f"{str(v):>12}" for v in row))


def _run_one(argv):
    return main(argv)


def _fan_out(a) -> int:
    base = Path(a.out or "runs")
    argvs = []
    for n in (1, 2, 3, 4):
        argv = ["reconstruct", "--patient", str(n), "--out", str(base / f"patient{n}")]
        for k, v in _arguments(a).items():
            if k in ("command", "patient", "data", "ctl_patient") or v is None or v is False:
                continue
            flag = "--" + k.replace("_", "-")
            if k == "project_box":
                argv.append(flag if v else "--no-project-box")
            elif v is True:
                argv.append(flag)
            else:
                argv += [flag, str(v)]
        if a.force:
            argv.append("--force")
        argvs.append(argv)
    with ProcessPoolExecutor(max_workers=4) as ex:
        codes = list(ex.map(_run_one, argvs))
    return max(codes)


def cmd_twin(a) -> int:
    series, ctl = _series_and_ctl(a)
    if a.noise < 0:
        raise InvalidArgument("--noise must be non-negative")
    cfg = _acga_config(a)
    out = _prepare_out(a, "runs/twin")
    twin = TwinSetup(series, ctl, a.etrue, a.noise, a.seed, a.prior, n_sub=a.n_sub, taper_days=a.taper)
    mesh0 = uniform_mesh(series.t_end, 1.0)
    twin.e_true_on(mesh0)   # validate the profile strings early
    parse_e_profile(a.prior, mesh0, series, ctl)
    res = acga_run(twin, cfg, mesh0=mesh0)
    return _emit(a, out, res, series, ctl, cfg, twin=twin)


def _parse_x0(text):
    try:
        x = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise InvalidArgument(f"bad --x0 {text!r}") from None
    if len(x) != 3:
        raise InvalidArgument("--x0 needs three comma-separated values")
    return x


def cmd_forward(a) -> int:
    series, ctl = _series_and_ctl(a)
    mesh = uniform_mesh(a.t_end, a.tau)
    if a.t_end > series.t_end:
        raise InvalidArgument("--t-end exceeds the data span")
    d_fn, _ = ctl_profiles(series, ctl, mesh)
    e = parse_e_profile(a.e, mesh, series, ctl)
    x0 = _parse_x0(a.x0) if a.x0 else series.initial_state()
    traj = solve_forward(e, d_fn, x0, mesh, ModelParams(), NewtonConfig(), a.n_sub)
    out = _prepare_out(a, "runs/forward")
    files = [report.write_trajectory(out / "trajectory.csv", traj)]
    if not a.no_figures:
        report.plot_trajectory(out / "figures" / "trajectory.png", traj)
    config = _base_config(a, series, ctl, x0)
    config["e"] = a.e
    config["tau"] = a.tau
    _write_manifest(out, a, config, files)
    X = traj.states
    k = int(np.argmax(X[:, 2]))
    print(f"peak u3 = {X[k, 2]:.4g} virions/ml at t = {mesh.nodes[k]:g} days; wrote {files[0]}")
    return EXIT_OK


COMMANDS = {"reconstruct": cmd_reconstruct, "twin": cmd_twin, "forward": cmd_forward}


def _load_manifest_args(parser, a):
    path = Path(a.from_manifest)
    try:
        man = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from None
    if man.get("command") != a.command:
        raise UsageError(f"manifest is for '{man.get('command')}', not '{a.command}'")
    stored = dict(man["arguments"])
    stored.update(out=a.out, force=a.force, from_manifest=None, patients=None)
    return argparse.Namespace(**stored)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if a.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        if a.from_manifest:
            a = _load_manifest_args(parser, a)
        return COMMANDS[a.command](a)
    except (UsageError, InvalidArgument, SchemaError, ParseError, FileNotFoundError) as exc:
        print(f"{TOOL}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, OptimizerError) as exc:
        print(f"{TOOL}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except HivAdaptError as exc:
        print(f"{TOOL}: error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
