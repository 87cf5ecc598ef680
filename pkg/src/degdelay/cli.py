"""Command-line front end.

Exit codes: 0 success, 1 invariant failure, 2 configuration error, 3 solver error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import io
from .errors import (ConfigError, DegDelayError, DegenerateDenominator, OffGridTime, OutOfWindow, SolverError,
                     ZeroDenominator)

COMMANDS = ("validate", "simulate", "adjoint", "control", "boundary", "carleman", "lem42", "energy", "hardy",
            "decay-check", "certificate", "verify")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="degdelay", description="Null control of a degenerate delay heat equation.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", nargs="?", default=None, help="TOML config (default: the shipped default.toml)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for independent checks")
    ap.add_argument("--epsilon-sweep", action="store_true", help="control: run the configured epsilon list")
    return ap


def _load(args) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.load(args.config or cfgmod.DEFAULT_CONFIG)
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        cfg = replace(cfg, seed=args.seed)
    return cfg


def cmd_validate(cfg, out, args):
    a = cfg.coefficient()
    p = cfg.build_problem()
    g = cfg.build_grid(p)
    info = {"kind": a.kind.value, "K": a.K, "theta_deg": a.theta_deg, "bc": p.bc_kind.value,
            "N": g.N, "M": g.M, "m_delay": g.m_delay, "dt": g.dt, "b_sup": p.b_sup, "c_sup": p.c_sup}
    io.write_json(out / "validate.json", info)
    theta = "" if a.theta_deg is None else f" theta_deg={a.theta_deg!r}"
    print(f"kind={a.kind.value} K={a.K!r}{theta} bc={p.bc_kind.value} N={g.N} M={g.M} m_delay={g.m_delay}")
    return 0


def cmd_simulate(cfg, out, args):
    from .solver import Discretization
    p = cfg.build_problem()
    g = cfg.build_grid(p)
    y0, th = cfg.initial_data(g)
    traj = Discretization(p, g).forward(y0, th)
    io.write_trajectory_csv(out / "trajectory.csv", traj.values, g)
    io.write_binary(out / "trajectory.bin", traj.values, g)
    norms = traj.norms()
    io.write_rows(out / "norms.csv", ["k", "t", "norm"], [[k, k * g.dt, v] for k, v in enumerate(norms)])
    print(f"simulated {g.M} steps; |y(T)|={float(norms[-1])!r}")
    return 0


def cmd_adjoint(cfg, out, args):
    from .solver import Discretization
    p = cfg.build_problem()
    g = cfg.build_grid(p)
    w0, _ = cfg.initial_data(g)
    adj = Discretization(p, g).adjoint(w0)
    io.write_trajectory_csv(out / "adjoint.csv", adj.values, g, first_index=0)
    io.write_trajectory_csv(out / "adjoint_history.csv", adj.history, g)
    norms = adj.norms()
    io.write_rows(out / "adjoint_norms.csv", ["k", "t", "norm"], [[k, k * g.dt, v] for k, v in enumerate(norms)])
    print(f"adjoint solved; |W(0)|={float(norms[0])!r}")
    return 0


def cmd_control(cfg, out, args):
    from .hum import epsilon_sweep, synthesize_null_control
    p = cfg.build_problem()
    g = cfg.build_grid(p)
    y0, th = cfg.initial_data(g)
    c = cfg.control
    if args.epsilon_sweep:
        results = epsilon_sweep(p, g, y0, th, c.epsilons, c.cg_tol, c.max_iter, seed=cfg.seed)
        keys = ["epsilon", "terminal_norm", "control_norm", "data_norm", "ratio", "cg_iterations", "cg_residual"]
        io.write_rows(out / "sweep.csv", keys, [[r.summary()[k] for k in keys] for r in results])
        for r in results:
            print(f"epsilon={r.epsilon!r} terminal={r.terminal_norm!r} ratio={r.ratio!r} its={r.cg_iterations}")
        res = results[-1]
    else:
        res = synthesize_null_control(p, g, y0, th, c.epsilon, c.cg_tol, c.max_iter, seed=cfg.seed)
        print(f"epsilon={res.epsilon!r} terminal={res.terminal_norm!r} ratio={res.ratio!r} its={res.cg_iterations}")
    io.write_control(out, res, g)
    return 0


def cmd_boundary(cfg, out, args):
    from .boundary import boundary_null_control
    p = cfg.build_problem()
    g = cfg.build_grid(p)
    y0, th = cfg.initial_data(g)
    c = cfg.control
    res = boundary_null_control(p, g, cfg.boundary.omega_ext, y0, th, c.epsilon, c.cg_tol, c.max_iter, seed=cfg.seed)
    io.write_rows(out / "h_trace.csv", ["t", "h"], zip(res.times, res.h_trace))
    io.write_json(out / "roundtrip.json", res.roundtrip.summary())
    io.write_json(out / "control.json", res.control.summary())
    rt = res.roundtrip
    print(f"terminal={rt.terminal_norm!r} discrepancy={rt.discrepancy!r} bound={rt.bound!r}")
    return 0


def cmd_carleman(cfg, out, args):
    from .carleman import CarlemanParams, BumpProfile, carleman_audit
    p = cfg.build_problem()
    g = cfg.build_grid(p)
    cc = cfg.carleman
    cp = CarlemanParams(p.a, BumpProfile(p.omega), cc.rho, cc.lam, cc.d, varsigma=0.0, l=p.T)
    rep = carleman_audit(p, g, cp, cc.n_samples, seed=cfg.seed)
    io.write_report(out, "carleman", rep)
    print(f"max_ratio={rep.max_ratio!r} skipped={rep.skipped}")
    return 0


def cmd_lem42(cfg, out, args):
    from .carleman import CarlemanParams, BumpProfile, lem42_weighted_observability
    p = cfg.build_problem()
    g = cfg.build_grid(p)
    cc = cfg.carleman
    cp = CarlemanParams(p.a, BumpProfile(p.omega), cc.rho, cc.lam, cc.d)
    rep = lem42_weighted_observability(p, g, cp, cc.n_samples, seed=cfg.seed)
    io.write_report(out, "lem42", rep)
    print(f"max_ratio={rep.max_ratio!r} skipped={rep.skipped}")
    return 0


def cmd_energy(cfg, out, args):
    from .carleman import energy_functional, energy_K, energy_violation
    from .solver import Discretization
    p = cfg.build_problem()
    g = cfg.build_grid(p)
    w0, _ = cfg.initial_data(g)
    E = energy_functional(p, g, Discretization(p, g).adjoint(w0))
    io.write_rows(out / "energy.csv", ["k", "t", "E"], [[k, k * g.dt, v] for k, v in enumerate(E)])
    viol = energy_violation(E)
    io.write_json(out / "energy.json", {"K": energy_K(p), "violation": viol, "dt": g.dt})
    print(f"K={energy_K(p)!r} violation={viol!r}")
    return 0


def cmd_hardy(cfg, out, args):
    from .carleman import hardy_bound, hardy_eigen_bound, hardy_poincare_ratio, random_hardy_state
    from .model import PowerLaw, classify_degeneracy
    cc = cfg.carleman
    rng = np.random.default_rng([cfg.seed, 4])
    rows = []
    for alpha in cc.hardy_alphas:
        a = classify_degeneracy(PowerLaw(alpha))
        x = np.linspace(0.0, 1.0, cc.hardy_nodes)
        top, _ = hardy_eigen_bound(a, x)
        worst = 0.0
        for _ in range(cc.hardy_samples):
            worst = max(worst, hardy_poincare_ratio(a, random_hardy_state(rng, x), x))
        rows.append([alpha, top, worst, hardy_bound(alpha)])
        print(f"alpha={alpha!r} eigen={top!r} random={worst!r} bound={hardy_bound(alpha)!r}")
    io.write_rows(out / "hardy.csv", ["alpha", "eigen_max", "random_max", "bound"], rows)
    return 0


def cmd_decay(cfg, out, args):
    from .carleman import decay_condition_check
    p = cfg.build_problem()
    v = decay_condition_check(p.c, p.T, p.omega, cfg.carleman.n_probe)
    io.write_rows(out / "decay.csv", ["t", "log_sup", "g"], [[r["t"], r["log_sup"], r["g"]] for r in v.probes])
    io.write_json(out / "decay.json", v.summary())
    print(f"verdict={v.verdict}")
    return 0


def cmd_certificate(cfg, out, args):
    from .carleman import theoretical_log_factor
    from .hum import observability_certificate
    p = cfg.build_problem()
    g = cfg.build_grid(p)
    c = cfg.control
    cert = observability_certificate(p, g, c.certificate_samples, c.power_iters, seed=cfg.seed)
    log_theory = theoretical_log_factor(p)
    io.write_json(out / "certificate.json", {**cert.summary(), "rayleigh": cert.rayleigh,
                                             "log_theory_factor": log_theory})
    io.write_rows(out / "worst_W0.csv", ["x", "W0"], zip(g.x, cert.worst_W0))
    print(f"C_lower={cert.C_lower!r} skipped={cert.skipped} log_theory_factor={log_theory!r}")
    return 0


def cmd_verify(cfg, out, args):
    from .verify import run_all
    checks = run_all(cfg, args.threads)
    io.write_rows(out / "verify.csv", ["check", "status", "value", "bound", "note"], [c.row() for c in checks])
    io.write_json(out / "verify.json", {"seed": cfg.seed, "passed": all(c.passed for c in checks),
                                        "checks": [dict(zip(["check", "status", "value", "bound", "note"], c.row()))
                                                   for c in checks]})
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} value={c.value!r} bound={c.bound!r} {c.note}".rstrip())
    return 0 if all(c.passed for c in checks) else 1


HANDLERS = {"validate": cmd_validate, "simulate": cmd_simulate, "adjoint": cmd_adjoint, "control": cmd_control,
            "boundary": cmd_boundary, "carleman": cmd_carleman, "lem42": cmd_lem42, "energy": cmd_energy,
            "hardy": cmd_hardy, "decay-check": cmd_decay, "certificate": cmd_certificate, "verify": cmd_verify}


def run_command(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = _load(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](cfg, out, args)
    except (ConfigError, OutOfWindow, ZeroDenominator, OffGridTime) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, DegenerateDenominator) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except DegDelayError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
