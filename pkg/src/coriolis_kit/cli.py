"""Command-line entry point: ``coriolis-kit <command> [options]``.

Exit status is 0 on success, 1 when a model or a validation check fails and
2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import adaptive, christoffel, dynamics, oracles, simkit
from .model import ConfigState, ModelError, check_config, load_model

EXAMPLES = {
    "coriolis": "coriolis-kit coriolis --model point_mass --state zero",
    "christoffel": "coriolis-kit christoffel --model planar_2r --random --seed 1",
    "regressors": "coriolis-kit regressors --model arm6 --random --seed 3 --out reg.csv",
    "identify": "coriolis-kit identify --model pendulum --trajectory traj.csv --lambda 10",
    "simulate": "coriolis-kit simulate --model point_mass --factorization beta=-5 --tfinal 20 --out run.csv",
    "bench": "coriolis-kit bench --family binary --sizes 32,64,128,256",
    "validate": "coriolis-kit validate --model arm6",
}


class UsageError(Exception):
    pass


# -- helpers ---------------------------------------------------------------------


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_rows(path, header, rows, comments=()):
    fh, close = _open_out(path)
    try:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    finally:
        if close:
            fh.close()


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _matrix_rows(name, M):
    for i in range(M.shape[0]):
        for j in range(M.shape[1]):
            yield name, i + 1, j + 1, M[i, j]


def _state(model, args):
    if getattr(args, "random", False):
        st = oracles.random_state(model, args.seed)
        return st.q, st.v, {}
    desc = args.state or "zero"
    if desc == "zero":
        st = ConfigState.zero(model)
        return st.q, st.v, {}
    p = Path(desc)
    if not p.exists():
        raise UsageError(f"state file {desc} not found")
    data = json.loads(p.read_text())
    q = check_config(model, np.asarray(data["q"], dtype=float))
    v = np.asarray(data.get("v", np.zeros(model.nv)), dtype=float)
    if v.shape != (model.nv,):
        raise ModelError(f"state speeds must have {model.nv} entries")
    return q, v, data


def _load(args):
    try:
        return load_model(args.model)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc


# -- commands --------------------------------------------------------------------


def cmd_coriolis(args):
    model = _load(args)
    q, v, _ = _state(model, args)
    res = dynamics.coriolis_star(model, q, v)
    rows = list(_matrix_rows("H", res.H)) + list(_matrix_rows("C", res.C))
    _write_rows(args.out, ["matrix", "row_i", "col_j", "value[SI]"], rows,
                [f"model={model.name} indices are 1-based generalized speeds; C is the Christoffel-consistent factorization"])
    return 0


def cmd_christoffel(args):
    model = _load(args)
    q, _, _ = _state(model, args)
    G = christoffel.christoffel_fast(model, q) if args.method == "fast" else christoffel.christoffel_sweep(model, q)
    m = model.nv
    rows = ((i + 1, j + 1, k + 1, G[i, j, k]) for k in range(m) for i in range(m) for j in range(m))
    _write_rows(args.out, ["i", "j", "k", "Gamma_ijk"], rows,
                [f"model={model.name} method={args.method}", "C[i,k] = sum_j Gamma[i,j,k] v[j]; rows i, columns j, pages k (1-based)"])
    return 0


def cmd_regressors(args):
    model = _load(args)
    q, v, data = _state(model, args)
    v_r = np.asarray(data.get("v_r", v), dtype=float)
    vdot_r = np.asarray(data.get("vdot_r", np.zeros(model.nv)), dtype=float)
    B = adaptive.regressor_bundle(model, q, v, v_r, vdot_r)
    rows = []
    for name, M in B.items():
        rows.extend(_matrix_rows(name, M))
    _write_rows(args.out, ["regressor", "row", "param_col", "value"], rows,
                [f"model={model.name} parameter columns are 10 per body: m,hx,hy,hz,Ixx,Iyy,Izz,Ixy,Ixz,Iyz"])
    return 0


def _read_trajectory(path, model):
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    nq, nv = model.nq, model.nv
    if data.shape[1] < 1 + nq + 2 * nv:
        raise ModelError(f"trajectory needs columns t, q({nq}), v({nv}), tau({nv})")
    t = data[:, 0]
    return t, data[:, 1 : 1 + nq], data[:, 1 + nq : 1 + nq + nv], data[:, 1 + nq + nv : 1 + nq + 2 * nv]


def cmd_identify(args):
    model = _load(args)
    if not Path(args.trajectory).exists():
        raise UsageError(f"trajectory {args.trajectory} not found")
    t, Q, V, T = _read_trajectory(args.trajectory, model)
    theta = model.theta() * args.theta_scale
    em = adaptive.filtered_momentum_residual(model, t, Q, V, T, theta, args.lam)
    ee = adaptive.filtered_energy_residual(model, t, Q, V, T, theta, args.lam)
    rows = [(t[n], *em[n], ee[n]) for n in range(len(t))]
    head = ["t[s]"] + [f"e_momentum{i + 1}" for i in range(model.nv)] + ["e_energy"]
    _write_rows(args.out, head, rows, [f"model={model.name} lambda={args.lam} residual = W theta - filtered input"])
    print(f"max|e_momentum|={np.abs(em).max():.3e} max|e_energy|={np.abs(ee).max():.3e}", file=sys.stderr)
    return 0


def cmd_simulate(args):
    model = _load(args)
    q0, v0, _ = _state(model, args)
    th = model.theta() * args.theta_hat_scale
    if args.controller == "none":
        log = simkit.simulate(model, None, args.tfinal, args.dt, q0, v0)
    else:
        if not model.is_coordinate():
            raise UsageError("tracking controllers need a model whose speeds are coordinate rates")
        if model.name == "point_mass":
            ref = simkit.point_mass_reference(args.lam)
            if args.state is None and not args.random:
                v0 = np.array([0.0, 1.0, 0.0])
        else:
            base = q0.copy()
            ref = simkit.TrackingReference(
                lambda t: base + 0.3 * np.sin(t), lambda t: 0.3 * np.cos(t) * np.ones_like(base),
                lambda t: -0.3 * np.sin(t) * np.ones_like(base), args.lam)
        try:
            choice = simkit.FactorizationChoice.parse(args.factorization)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        adapt = args.controller == "adaptive"
        if model.name == "point_mass" and simkit._is_point_mass(model) and not args.zoh and choice.kind != "custom":
            # closed-form path; only the mass estimate enters the control for a translating body
            log = simkit.simulate_point_mass(model, th[0], args.tfinal, args.dt, q0, v0, args.kd, args.lam,
                                             choice.beta if choice.kind == "beta" else 0.0, adapt)
        else:
            cfg = simkit.ControllerConfig(ref, th, args.kd * np.eye(model.nv), choice, adapt=adapt)
            log = simkit.simulate(model, cfg, args.tfinal, args.dt, q0, v0, per_stage=not args.zoh)
    head, rows = log.columns()
    _write_rows(args.out, head, rows, [json.dumps({k: v for k, v in log.meta.items() if k != "wall_time"})])
    return 0


def loglog_fit(x, y):
    """Least-squares line through ``(log x, log y)``: returns ``(slope, intercept, r2)``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum((ly - pred) ** 2) / ss if ss > 0 else 1.0
    return float(coef[0]), float(coef[1]), float(r2)


def _best_time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def tree_depth(model):
    return max(len(model.ancestors(k)) for k in range(len(model.nodes)))


def bench_row(family, N, repeats=3, sweep=True, seed=0):
    """Timings ``(N, depth, alg1, fast, sweep)`` in seconds for one generated tree."""
    model = oracles.balanced_binary_tree(N, seed) if family == "binary" else oracles.random_open_chain(N, seed, ("revolute",))
    st = oracles.random_state(model, seed)
    t1 = _best_time(lambda: dynamics.coriolis_star(model, st.q, st.v), repeats)
    tf = _best_time(lambda: christoffel.christoffel_fast(model, st.q), max(1, repeats // 2))
    ts = _best_time(lambda: christoffel.christoffel_sweep(model, st.q), 1) if sweep else float("nan")
    return N, tree_depth(model), t1, tf, ts


def run_bench(family, sizes, repeats=3, sweep=True, threads=1):
    if threads > 1:
        with ProcessPoolExecutor(threads) as ex:
            rows = list(ex.map(bench_row, [family] * len(sizes), sizes, [repeats] * len(sizes), [sweep] * len(sizes)))
    else:
        rows = [bench_row(family, N, repeats, sweep) for N in sizes]
    rows = np.array(rows, dtype=float)
    fit = loglog_fit(rows[:, 0] * rows[:, 1], rows[:, 2])
    return rows, fit


def cmd_bench(args):
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s]
    except ValueError as exc:
        raise UsageError(f"--sizes must be comma-separated integers ({exc})") from exc
    if not sizes or min(sizes) < 1:
        raise UsageError("--sizes must list positive integers")
    threads = max(1, int(os.environ.get("CORIOLIS_KIT_THREADS", "1")))
    rows, (slope, _, r2) = run_bench(args.family, sizes, args.repeats, not args.no_sweep, threads)
    out = [(int(r[0]), int(r[1]), r[2], r[3], r[4], r[4] / r[3]) for r in rows]
    _write_rows(args.out, ["N", "depth", "alg1[s]", "christoffel_fast[s]", "christoffel_sweep[s]", "sweep/fast"], out,
                [f"family={args.family} loglog fit of alg1 time against N*depth: slope={slope:.3f} r2={r2:.4f}"])
    print(f"alg1 ~ (N d)^{slope:.3f}, r2={r2:.4f}", file=sys.stderr)
    return 0


def validation_report(model, samples=20, seed=0):
    """Rows ``(check, residual, tolerance)`` from the oracle suite on random states."""
    rng = np.random.default_rng(seed)
    worst = {}

    def note(name, res, tol):
        worst[name] = (max(worst.get(name, (0.0, tol))[0], float(res)), tol)

    for _ in range(samples):
        q, v = model.random_config(rng), rng.normal(size=model.nv)
        r = dynamics.coriolis_star(model, q, v)
        res, scale = oracles.passivity_residual(model, q, v, r.C)
        note("skew Hdot=C+C^T (rel)", res / (1 + scale), 1e-4)
        bias = dynamics.rnea(model, q, v, np.zeros(model.nv), False)
        note("C v = bias (rel)", np.abs(r.C @ v - bias).max() / (1 + np.abs(bias).max()), 1e-10)
        note("CRBA = A^T H A", np.abs(dynamics.mass_matrix_dense(model, q) - r.H).max(), 1e-11)
        note("projection = alg1", np.abs(dynamics.coriolis_projected(model, q, v).C - r.C).max(), 1e-11)
        note("C^T v recursion", np.abs(dynamics.coriolis_transpose_times_v(model, q, v) - r.C.T @ v).max(), 1e-11)
        G = christoffel.christoffel_fast(model, q)
        note("christoffel fast = sweep", np.abs(G - christoffel.christoffel_sweep(model, q)).max(), 1e-11)
        if model.is_coordinate():
            note("christoffel = coordinate fd", np.abs(G - oracles.fd_christoffel_coordinates(model, q)).max(), 1e-5)
        B = adaptive.regressor_bundle(model, q, v, v, np.zeros(model.nv))
        th = model.theta()
        note("Y_p theta = H v (rel)", np.abs(B.Y_p @ th - r.H @ v).max() / (1 + np.abs(r.H @ v).max()), 1e-10)
        note("Y_c theta = C^T v (rel)", np.abs(B.Y_c @ th - r.C.T @ v).max() / (1 + np.abs(r.C.T @ v).max()), 1e-10)
    return [(k, res, tol) for k, (res, tol) in worst.items()]


def cmd_validate(args):
    model = _load(args)
    rows = validation_report(model, args.samples, args.seed)
    out = [(name, res, tol, "ok" if res <= tol else "FAIL") for name, res, tol in rows]
    _write_rows(args.out, ["check", "max_residual", "tolerance", "status"], out, [f"model={model.name} samples={args.samples}"])
    return 0 if all(r[3] == "ok" for r in out) else 1


# -- parser ----------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="coriolis-kit", description="Coriolis factorizations, Christoffel symbols and regressors for rigid-body trees.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_text, fn, state=True):
        sp = sub.add_parser(name, help=help_text, description=help_text, epilog=f"example: {EXAMPLES[name]}",
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--model", required=True, help="model JSON path or bundled model name")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None, help="output CSV path (default stdout)")
        sp.add_argument("--format", choices=["csv"], default="csv")
        if state:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--state", default=None, help="'zero' or a JSON file {q: [...], v: [...]}")
            g.add_argument("--random", action="store_true", help="random state from --seed")
        sp.set_defaults(func=fn)
        return sp

    add("coriolis", "emit H and the Christoffel-consistent C at one state", cmd_coriolis)
    sp = add("christoffel", "emit the generalized Christoffel symbols at one configuration", cmd_christoffel)
    sp.add_argument("--method", choices=["fast", "sweep"], default="fast")
    add("regressors", "emit the six regressor matrices (state file may add v_r and vdot_r)", cmd_regressors)
    sp = add("identify", "filtered momentum and energy residuals over a trajectory CSV (t, q, v, tau)", cmd_identify, state=False)
    sp.add_argument("--trajectory", required=True)
    sp.add_argument("--lambda", dest="lam", type=float, default=10.0, help="filter pole [rad/s]")
    sp.add_argument("--theta-scale", type=float, default=1.0, help="scale applied to the model parameters")
    sp = add("simulate", "closed-loop RK4 run with the passivity-based tracking controller", cmd_simulate)
    sp.add_argument("--controller", choices=["passivity", "adaptive", "none"], default="passivity")
    sp.add_argument("--factorization", default="star", help="'star' or 'beta=<value>' (point mass)")
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0, help="sliding-variable gain Lambda")
    sp.add_argument("--kd", type=float, default=1.0)
    sp.add_argument("--theta-hat-scale", type=float, default=0.9)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--tfinal", type=float, default=20.0)
    sp.add_argument("--zoh", action="store_true", help="hold the control over each step")
    sp = sub.add_parser("bench", help="time the Coriolis and Christoffel algorithms on generated trees",
                        description="time the Coriolis and Christoffel algorithms on generated trees", epilog=f"example: {EXAMPLES['bench']}",
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    sp.add_argument("--family", choices=["chain", "binary"], default="binary")
    sp.add_argument("--sizes", default="32,64,128,256")
    sp.add_argument("--repeats", type=int, default=3)
    sp.add_argument("--no-sweep", action="store_true")
    sp.add_argument("--out", default=None)
    sp.add_argument("--format", choices=["csv"], default="csv")
    sp.set_defaults(func=cmd_bench)
    sp = add("validate", "run the oracle suite on a model and print residuals", cmd_validate, state=False)
    sp.add_argument("--samples", type=int, default=20)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"coriolis-kit: error: {exc}", file=sys.stderr)
        return 2
    except (ModelError, simkit.SimulationError, ValueError, KeyError) as exc:
        print(f"coriolis-kit: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
