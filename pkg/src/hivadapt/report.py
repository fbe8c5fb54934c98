"""CSV tables and optional matplotlib figures for ACGA runs."""
from __future__ import annotations

import csv
import hashlib
import math
from pathlib import Path

import numpy as np

FLOAT_FMT = ".12g"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else format(v, FLOAT_FMT)
    return str(v)


def write_table(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_table(path):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [row for row in r]
    return header, rows


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


SUMMARY_HEADER = ["level", "nno", "norm_r1", "norm_r2", "est_gradient_jump", "est_lipschitz_jump", "est_residual",
                  "cga_iterations", "termination", "final_grad_norm", "final_gamma", "refined_intervals"]


def write_level(out: Path, rec, e_true=None) -> list:
    """Per-level tables; returns the written paths."""
    lv = out / f"level{rec.level}"
    mesh = rec.mesh
    prob = rec.problem
    ev = rec.result.evaluation
    traj = ev.traj
    files = []

    cols = ["t_left_days", "t_right_days", "E", "E_prior", "d_per_day", "gradient", "indicator"]
    arrs = [mesh.nodes[:-1], mesh.nodes[1:], rec.e.values, prob.prior.values, prob.d_fn.values,
            rec.result.gradient.values, rec.indicator.values]
    if e_true is not None:
        cols.append("E_true")
        arrs.append(e_true.values)
    files.append(write_table(lv / "E.csv", cols, zip(*arrs)))

    X = traj.states
    lS = np.log10(np.maximum(X[:, 0] + X[:, 1], prob.floor))
    lV = np.log10(np.maximum(X[:, 2], prob.floor))
    files.append(write_table(
        lv / "states.csv",
        ["t_days", "u1_cells_per_ml", "u2_cells_per_ml", "u3_virions_per_ml", "log10_u3",
         "log10_sigma_model", "log10_v_data", "log10_sigma_data"],
        zip(mesh.nodes, X[:, 0], X[:, 1], X[:, 2], lV, lS,
            prob.data.log10_g2_nodes, prob.data.log10_g1_nodes)))

    dr = prob.residuals(traj)
    files.append(write_table(lv / "residuals.csv", ["t_days", "R1", "R2"],
                             zip(mesh.nodes, dr.r1, dr.r2)))
    files.append(write_table(lv / "trace.csv",
                             ["iteration", "J", "grad_norm", "rel_change", "gamma", "step", "beta_fr"],
                             rec.trace.rows()))
    files.append(write_table(lv / "mesh.csv", ["node", "t_days"],
                             zip(range(mesh.n_nodes), mesh.nodes)))
    return files


def write_summary(out: Path, records, extra_cols=None) -> Path:
    header = list(SUMMARY_HEADER)
    extra_cols = extra_cols or {}
    header += list(extra_cols)
    rows = []
    for i, rec in enumerate(records):
        s = rec.summary()
        rows.append([s[k] for k in SUMMARY_HEADER] + [extra_cols[k][i] for k in extra_cols])
    return write_table(out / "summary.csv", header, rows)


def write_trajectory(path: Path, traj) -> Path:
    X = traj.states
    with np.errstate(divide="ignore"):
        lV = np.log10(np.where(X[:, 2] > 0, X[:, 2], 0.0))
    return write_table(path, ["t_days", "u1_cells_per_ml", "u2_cells_per_ml", "u3_virions_per_ml", "log10_u3"],
                       zip(traj.mesh.nodes, X[:, 0], X[:, 1], X[:, 2], lV))


# ---------------------------------------------------------------- figures

def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    return path


def plot_reconstruction(out: Path, records, e_true_list=None) -> list:
    plt = _plt()
    paths = []
    fig, ax = plt.subplots(figsize=(7, 4))
    last = records[-1]
    ax.step(last.mesh.nodes[:-1], last.problem.prior.values, where="post", color="0.6", lw=1, label="prior E0")
    for rec in records:
        ax.step(rec.mesh.nodes[:-1], rec.e.values, where="post", lw=1, label=f"level {rec.level}")
    if e_true_list:
        et = e_true_list[-1]
        ax.step(et.mesh.nodes[:-1], et.values, where="post", color="k", ls="--", lw=1, label="E true")
    ax.set_xlabel("t [days]")
    ax.set_ylabel("E(t)")
    ax.legend(fontsize=7)
    paths.append(_save(fig, out / "figures" / "E_levels.png"))
    plt.close(fig)

    traj = last.result.evaluation.traj
    X = traj.states
    t = last.mesh.nodes
    fig, axs = plt.subplots(1, 2, figsize=(10, 4))
    axs[0].plot(t, np.log10(np.maximum(X[:, 2], 1e-2)), label="model")
    axs[0].plot(t, last.problem.data.log10_g2_nodes, "--", label="data")
    axs[0].set_ylabel("log10 V")
    axs[1].plot(t, X[:, 0] + X[:, 1], label="model")
    axs[1].plot(t, 10 ** last.problem.data.log10_g1_nodes, "--", label="data")
    axs[1].set_ylabel("T + I [cells/ml]")
    for a in axs:
        a.set_xlabel("t [days]")
        a.legend(fontsize=7)
    paths.append(_save(fig, out / "figures" / "fit_final.png"))
    plt.close(fig)

    dr = last.problem.residuals(traj)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(t, dr.r1, label="R1 (virus)")
    ax.plot(t, dr.r2, label="R2 (T cells)")
    ax.set_xlabel("t [days]")
    ax.legend(fontsize=7)
    paths.append(_save(fig, out / "figures" / "residuals_final.png"))
    plt.close(fig)

    fig, axs = plt.subplots(1, 2, figsize=(10, 4))
    for rec in records:
        axs[0].semilogy(rec.trace.grad_norm, lw=1, label=f"level {rec.level}")
        axs[1].semilogy(rec.trace.j, lw=1, label=f"level {rec.level}")
    axs[0].set_ylabel("||G||")
    axs[1].set_ylabel("J")
    for a in axs:
        a.set_xlabel("CGA iteration")
        a.legend(fontsize=7)
    paths.append(_save(fig, out / "figures" / "cga_trace.png"))
    plt.close(fig)
    return paths


def plot_trajectory(path: Path, traj) -> Path:
    plt = _plt()
    fig, axs = plt.subplots(1, 3, figsize=(11, 3.5))
    X = traj.states
    for a, col, lab in zip(axs, range(3), ("u1 [cells/ml]", "u2 [cells/ml]", "u3 [virions/ml]")):
        a.plot(traj.mesh.nodes, X[:, col])
        a.set_yscale("symlog", linthresh=1.0)
        a.set_xlabel("t [days]")
        a.set_ylabel(lab)
    p = _save(fig, path)
    plt.close(fig)
    return p
