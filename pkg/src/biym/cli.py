"""Command-line front end: ``biym {verify,flow,conformal,spectrum,stress,export}``.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical non-convergence.
"""
import argparse
import logging
import os
import sys

import numpy as np

from biym import io as bio
from biym.calculus import Connection, curvature, div_direct, div_formula, stress_energy
from biym.conformal import step2_verify, step1_weight
from biym.errors import ConvergenceError, DomainError, UnsupportedConfiguration
from biym.flow import minimize, random_connection
from biym.functional import density, spectrum, yang_mills
from biym.lattice import ConformalMetric, pointwise_norm2
from biym.refine import conservation_study, loglog_slope
from biym.verify import DEFAULT_TOLERANCES, Context, default_identities, run_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NONCONV = 0, 1, 2, 3

log = logging.getLogger("biym")


class _Abort(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _say(args, text):
    if not args.quiet:
        print(text)


def _config(args):
    if args.config is None:
        cfg = bio.parse_config({})
    else:
        try:
            cfg = bio.load_config(args.config)
        except OSError as exc:
            raise _Abort(EXIT_CONFIG, f"cannot read config {args.config}: {exc}") from None
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _snapshot(args, cfg):
    if args.snapshot is None:
        raise _Abort(EXIT_CONFIG, "this command needs --snapshot PATH")
    try:
        D, label = bio.load_snapshot(args.snapshot)
    except OSError as exc:
        raise _Abort(EXIT_CONFIG, f"cannot read snapshot {args.snapshot}: {exc}") from None
    except bio.SnapshotError as exc:
        raise _Abort(EXIT_CONFIG, f"{args.snapshot}: {exc}") from None
    return D, label


def _out(cfg, name):
    return os.path.join(cfg.out_dir, name)


def _table(rows):
    lines = [f"{'identity':<26}{'max residual':>14}{'tolerance':>12}  result"]
    for k, r, tol, ok in rows:
        lines.append(f"{k:<26}{r:>14.3e}{tol:>12.1e}  {'PASS' if ok else 'FAIL'}")
    return "\n".join(lines)


def cmd_verify(args):
    cfg = _config(args)
    vcfg = cfg.verify
    trials = int(vcfg.get("trials", 3))
    identities = list(vcfg.get("identities", default_identities(cfg.lattice.n)))
    tolerances = dict(DEFAULT_TOLERANCES, **vcfg.get("tolerances", {}))
    unknown = set(vcfg.get("tolerances", {})) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise _Abort(EXIT_CONFIG, f"unknown tolerance keys: {sorted(unknown)}")
    base = cfg.seeds[0]
    ctx = Context(cfg.lattice, cfg.m, cfg.metric(), [base + i for i in range(trials)])
    try:
        rows = run_suite(ctx, identities, tolerances)
    except DomainError as exc:
        raise _Abort(EXIT_CONFIG, str(exc)) from None
    except ValueError as exc:
        raise _Abort(EXIT_CONFIG, str(exc)) from None
    _say(args, _table(rows))
    bio.write_atomic(
        _out(cfg, "verify.csv"), bio.csv_text(["identity", "max_residual", "tolerance", "passed"], rows)
    )
    bio.write_atomic(
        _out(cfg, "verify.txt"),
        bio.kv_text([(k, f"{r!r} tol={tol!r} {'pass' if ok else 'fail'}") for k, r, tol, ok in rows]
                    + [("all_passed", all(r[3] for r in rows))]),
    )
    return EXIT_OK if all(r[3] for r in rows) else EXIT_FAIL


def _run_flow(cfg, F, seed):
    fc = cfg.flow_config(seed)
    D0 = random_connection(cfg.lattice, cfg.m, seed, fc.amplitude)
    return minimize(D0, cfg.metric(), F, fc)


def cmd_flow(args):
    cfg = _config(args)
    F = cfg.density_f()
    res = _run_flow(cfg, F, cfg.seeds[0])
    bio.save_snapshot(_out(cfg, "snapshot.biym"), res.connection, F.label)
    bio.write_atomic(_out(cfg, "trace.csv"), bio.csv_text(["iter", "energy", "residual", "step"], res.trace))
    _say(args, f"status: {res.status}\niterations: {res.trace[-1][0]}\n"
               f"energy: {res.energy:.12e}\nresidual: {res.residual:.6e}")
    return EXIT_OK if res.converged else EXIT_NONCONV


def cmd_conformal(args):
    cfg = _config(args)
    n = cfg.lattice.n
    if n not in (5, 6):
        raise _Abort(EXIT_CONFIG, f"the conformal construction needs n >= 5 (supported: 5, 6), got n={n}")
    metric = cfg.metric()
    step1 = cfg.conformal.get("step1", "ym")
    items = []
    if step1 == "ym":
        F = yang_mills()
    elif step1 in ("fp", "fp_el"):
        p = float(cfg.conformal.get("p", n / 2 + 0.5))
        F = density(step1, p)
    else:
        raise _Abort(EXIT_CONFIG, f"conformal.step1 must be ym, fp or fp_el, got {step1!r}")
    res = _run_flow(cfg, F, cfg.seeds[0])
    D = res.connection
    items += [("step1_density", F.label), ("flow_status", res.status),
              ("flow_iterations", res.trace[-1][0]), ("flow_residual", repr(res.residual))]
    if step1 != "ym":
        w = step1_weight(D, metric, F.p)
        items += [("step1_residual_gbar", repr(w.residual_bar)),
                  ("step1_residual_weighted", repr(w.residual_weighted)),
                  ("step1_defect", repr(w.defect))]
    rep = step2_verify(D, metric)
    items += [("r_ym", repr(rep.r_ym)), ("r_bi", repr(rep.r_bi)), ("bound", repr(rep.bound)),
              ("proportionality_defect", repr(rep.defect)),
              ("functional_equation_residual", repr(rep.equation_residual)),
              ("sigma_min", repr(rep.sigma_min)), ("sigma_max", repr(rep.sigma_max))]
    ok = rep.ok and rep.equation_residual <= 1e-10
    items.append(("verified", ok))
    bio.write_atomic(_out(cfg, "sigma.csv"),
                     bio.csv_text([f"x{i}" for i in range(n)] + ["sigma"], bio.site_field_rows(rep.sigma.sigma)))
    bio.write_atomic(_out(cfg, "metric_tilde.csv"),
                     bio.csv_text([f"x{i}" for i in range(n)] + ["c"], bio.site_field_rows(rep.metric.c)))
    bio.write_atomic(_out(cfg, "conformal.txt"), bio.kv_text(items))
    bio.save_snapshot(_out(cfg, "snapshot.biym"), D, F.label)
    _say(args, bio.kv_text(items).rstrip())
    if not res.converged:
        return EXIT_NONCONV
    return EXIT_OK if ok else EXIT_FAIL


def cmd_spectrum(args):
    cfg = _config(args)
    D, label = _snapshot(args, cfg)
    F = cfg.density_f()
    if cfg.metric_kind != "uniform":
        raise _Abort(EXIT_CONFIG, "spectrum requires a uniform metric")
    metric = ConformalMetric.uniform(D.lattice, cfg.metric_value)
    k = int(cfg.spectrum.get("k", 10))
    tau = cfg.spectrum.get("tau")
    try:
        res = spectrum(D, metric, F, k, None if tau is None else float(tau))
    except ConvergenceError as exc:
        _say(args, f"eigensolver did not converge: {exc.state}")
        return EXIT_NONCONV
    bio.write_atomic(_out(cfg, "eigenvalues.csv"),
                     bio.csv_text(["rank", "eigenvalue", "residual"],
                                  [(i, float(v), float(r)) for i, (v, r) in enumerate(zip(res.eigenvalues, res.residuals))]))
    items = [("density", F.label), ("method", res.method), ("k", len(res.eigenvalues)), ("tau", repr(res.tau)),
             ("index", res.index), ("nullity", res.nullity),
             ("gauge_dim", res.gauge_dim), ("gauge_null", res.gauge_null)]
    bio.write_atomic(_out(cfg, "spectrum.txt"), bio.kv_text(items))
    _say(args, bio.kv_text(items).rstrip())
    return EXIT_OK


def cmd_stress(args):
    cfg = _config(args)
    D, label = _snapshot(args, cfg)
    F = cfg.density_f()
    if cfg.metric_kind != "uniform":
        raise _Abort(EXIT_CONFIG, "stress requires a uniform metric")
    metric = ConformalMetric.uniform(D.lattice, cfg.metric_value)
    n = D.lattice.n
    R = curvature(D)
    S = stress_energy(D, metric, F, R)
    q = pointwise_norm2(R, metric)
    direct, nd = div_direct(S, metric)
    formula = div_formula(D, metric, F)
    gap = np.sqrt(np.sum(metric.c ** (n / 2) * metric.lattice.h**n * np.sum((direct - formula.total) ** 2, -1)))
    iu = np.triu_indices(n)
    header = ([f"x{i}" for i in range(n)] + [f"S{a}{b}" for a, b in zip(*iu)] + ["trace", "Q"]
              + [f"div_direct{k}" for k in range(n)] + [f"div_formula{k}" for k in range(n)])
    rows = []
    for idx in np.ndindex(*D.lattice.extents):
        rows.append(idx + tuple(S.S[idx][iu]) + (S.trace[idx], q[idx]) + tuple(direct[idx]) + tuple(formula.total[idx]))
    bio.write_atomic(_out(cfg, "stress.csv"), bio.csv_text(header, rows))
    items = [("div_direct_norm", repr(nd)), ("div_formula_norm", repr(formula.norms["total"])),
             ("difference_norm", repr(float(gap))),
             ("coderivative_term_norm", repr(formula.norms["coderivative"])),
             ("bianchi_term_norm", repr(formula.norms["bianchi"]))]
    sizes = cfg.stress.get("refinement")
    if sizes:
        study = conservation_study(F, n=n, m=D.m, sizes=tuple(sizes), amplitude=float(cfg.stress.get("amplitude", 0.5)))
        bio.write_atomic(_out(cfg, "refinement.csv"),
                         bio.csv_text(["L", "h", "div_gap", "bianchi", "div_direct"], study))
        hs = [r[1] for r in study]
        items.append(("refinement_slope_div_gap", repr(loglog_slope(hs, [r[2] for r in study]))))
        if n >= 3:
            items.append(("refinement_slope_bianchi", repr(loglog_slope(hs, [r[3] for r in study]))))
    bio.write_atomic(_out(cfg, "stress.txt"), bio.kv_text(items))
    _say(args, bio.kv_text(items).rstrip())
    return EXIT_OK


def cmd_export(args):
    cfg = _config(args)
    D, label = _snapshot(args, cfg)
    lat, m = D.lattice, D.m
    iu = np.triu_indices(m, 1)
    header = [f"x{i}" for i in range(lat.n)] + ["mu"] + [f"a{i}{j}" for i, j in zip(*iu)]
    rows = []
    for idx in np.ndindex(*lat.extents):
        for mu in range(lat.n):
            rows.append(idx + (mu,) + tuple(D.alpha.values[(mu,) + idx][iu]))
    bio.write_atomic(_out(cfg, "connection.csv"), bio.csv_text(header, rows))
    _say(args, f"exported {len(rows)} edges ({label}) to {_out(cfg, 'connection.csv')}")
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "flow": cmd_flow,
    "conformal": cmd_conformal,
    "spectrum": cmd_spectrum,
    "stress": cmd_stress,
    "export": cmd_export,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="biym", description="Yang-Mills-Born-Infeld lattice laboratory")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="YAML run configuration")
    parser.add_argument("--snapshot", help="connection snapshot (.biym)")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, help="override the first seed")
    parser.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except _Abort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (bio.ConfigError, UnsupportedConfiguration, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
