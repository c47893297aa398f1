"""Command-line entry points.

Subcommands: ``simulate`` (one consensus trajectory with fitted rates),
``spectrum`` (Lyapunov exponents, wedge cross-check, determinant identity),
``gap`` (Birkhoff block-length sweep against the qr gap), ``primitivity``
(family decision plus forward/backward index statistics) and ``acceptance``
(the full acceptance suite).

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 acceptance failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance, consensus, primitivity, spectrum
from .config import ConfigError, ExperimentConfig, load_config
from .generators import push_sum_matrix
from .report import ReportBundle

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_ACCEPTANCE = 3


def _thread_count(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("GOSSIPGAP_THREADS")
    return max(1, int(env)) if env else 1


def _bundle(args, cfg: ExperimentConfig) -> ReportBundle:
    outdir = Path(args.out) if args.out else Path.cwd()
    return ReportBundle(outdir, cfg.output.prefix, cfg.to_dict())


def _try_rate(ns, values) -> float:
    try:
        w_ns, w_vals = consensus.rate_window(ns, values)
        return consensus.fit_rate(w_ns, w_vals, window=1.0)
    except ValueError:
        return math.nan


def cmd_simulate(args, cfg: ExperimentConfig) -> int:
    proc = cfg.build_process(args.seed)
    x0, w0 = cfg.build_initial(proc.p)
    traj = consensus.run(proc, x0, w0, cfg.horizon.n,
                         checkpoints=cfg.horizon.checkpoints)
    bundle = _bundle(args, cfg)
    bundle.add_table("trajectory", traj.TABLE_HEADER, traj.rows())
    summary = {
        "limit_estimate": traj.limit,
        "column_stochastic": traj.column_stochastic,
        "envelope_violations": traj.envelope_violations,
        "rate_max_ratio_error": _try_rate(traj.ns, traj.max_ratio_error()),
        "rate_tv": _try_rate(traj.ns, traj.tv),
        "final_n": int(traj.ns[-1]),
    }
    bundle.add_summary(summary)
    bundle.write_manifest()
    if args.verbose:
        print(f"limit={traj.limit:.12g} rate={summary['rate_max_ratio_error']:.6g}")
    return EXIT_OK


def cmd_spectrum(args, cfg: ExperimentConfig) -> int:
    proc = cfg.build_process(args.seed)
    e = cfg.estimators
    est = spectrum.estimate_spectrum_qr(proc, e.k, cfg.horizon.n,
                                        e.reorth_period, e.replicates, e.burn_in)
    lhs, rhs = spectrum.check_det_identity(
        proc, cfg.horizon.n, replicates=e.replicates,
        reorth_period=e.reorth_period, burn_in=e.burn_in)
    x0, w0 = cfg.build_initial(proc.p)
    try:
        wedge = spectrum.estimate_sum_top2_wedge(proc, x0, w0, e.wedge_n)
    except ValueError:
        wedge = math.nan
    bundle = _bundle(args, cfg)
    bundle.add_table("spectrum", ("i", "lambda", "stderr"),
                     [(i + 1, est.lambdas[i], est.stderr[i]) for i in range(e.k)])
    bundle.add_summary({
        "gap": est.gap, "gap_stderr": est.gap_stderr,
        "det_identity_lhs": lhs, "det_identity_rhs": rhs,
        "wedge_sum_top2": wedge, "n_steps": est.n_steps,
        "replicates": est.replicates,
    })
    bundle.write_manifest()
    if args.verbose:
        print(f"lambdas={est.lambdas} gap={est.gap:.6g}")
    return EXIT_OK


def _gap_point(payload):
    cfg_dict, seed, m, trials = payload
    cfg = ExperimentConfig.from_dict(cfg_dict)
    proc = cfg.build_process(seed)
    g = spectrum.estimate_gap_birkhoff(proc, m, trials)
    return (m, g.value, g.stderr, g.diagnostics["tau_one_fraction"])


def cmd_gap(args, cfg: ExperimentConfig) -> int:
    proc = cfg.build_process(args.seed)
    e = cfg.estimators
    est = spectrum.estimate_spectrum_qr(proc, min(2, proc.p), cfg.horizon.n,
                                        e.reorth_period, e.replicates, e.burn_in)
    payloads = [(cfg.to_dict(), args.seed, int(m), e.trials)
                for m in e.birkhoff_m]
    threads = _thread_count(args)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(_gap_point, payloads))
    else:
        points = [_gap_point(p) for p in payloads]
    points.sort(key=lambda r: r[0])
    bundle = _bundle(args, cfg)
    bundle.add_table("gap", ("m", "birkhoff_gap", "stderr", "tau_one_fraction"),
                     points)
    bundle.add_summary({
        "qr_gap": est.gap, "qr_gap_stderr": est.gap_stderr,
        "birkhoff_final": points[-1][1] if points else math.nan,
    })
    bundle.write_manifest()
    if args.verbose:
        print(f"qr gap={est.gap:.6g}; birkhoff sweep={[p[1] for p in points]}")
    return EXIT_OK


def _family_patterns(cfg: ExperimentConfig, proc):
    if proc.kind == "push_sum":
        pats = []
        c = proc.config
        for e, (i, j) in enumerate(c.graph.edges):
            pats.append(primitivity.pattern_of(
                push_sum_matrix(proc.p, (i, j), c.share[e])))
            if c.loss_prob[e] > 0:
                pats.append(primitivity.pattern_of(
                    push_sum_matrix(proc.p, (i, j), c.share[e], loss=True)))
        return pats
    if proc.kind in ("iid_family", "markov_family"):
        return [primitivity.pattern_of(a) for a in proc._stack]
    return [primitivity.pattern_of(proc.matrix)]


def cmd_primitivity(args, cfg: ExperimentConfig) -> int:
    proc = cfg.build_process(args.seed)
    pats = _family_patterns(cfg, proc)
    rep = primitivity.is_family_primitive(pats)
    count = cfg.horizon.n
    psi = primitivity.sample_forward_indices(proc.spawn((500, 0)), count)
    rho = primitivity.sample_backward_indices(proc.spawn((500, 1)), count)
    ks = primitivity.ks_distance(psi, rho)
    ks_crit = primitivity.ks_critical_distance(len(psi), len(rho))
    try:
        slope, intercept, corr = primitivity.survival_loglinear_fit(psi)
    except ValueError:
        slope = intercept = corr = math.nan
    bundle = _bundle(args, cfg)
    bundle.add_table("indices", ("sample", "forward_psi", "backward_rho"),
                     [(s + 1, int(psi[s]), int(rho[s])) for s in range(count)])
    bundle.add_summary({
        "family_primitive": rep.family_primitive,
        "witness_word": ("-".join(map(str, rep.witness_word))
                         if rep.witness_word else None),
        "states_explored": rep.states_explored,
        "capped": rep.capped,
        "ks_distance": ks, "ks_critical_1pct": ks_crit,
        "psi_mean": float(psi.mean()), "rho_mean": float(rho.mean()),
        "survival_slope": slope, "survival_corr": corr,
    })
    bundle.write_manifest()
    if args.verbose:
        print(f"primitive={rep.family_primitive} KS={ks:.4f} (crit {ks_crit:.4f})")
    return EXIT_OK


def cmd_acceptance(args, cfg=None) -> int:
    results = acceptance.run_all(verbose=True)
    if args.out:
        bundle = ReportBundle(Path(args.out), "acceptance", {})
        bundle.add_table("criteria",
                         ("id", "name", "passed", "runtime_s", "details"),
                         [(r.cid, r.name, r.passed, r.runtime_s, r.details)
                          for r in results])
        bundle.write_manifest()
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} criteria passed")
    return EXIT_OK if n_fail == 0 else EXIT_ACCEPTANCE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gossipgap",
        description="ratio-consensus simulation and spectral-gap estimation")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, needs_cfg in (
            ("simulate", cmd_simulate, True),
            ("spectrum", cmd_spectrum, True),
            ("gap", cmd_gap, True),
            ("primitivity", cmd_primitivity, True),
            ("acceptance", cmd_acceptance, False)):
        p = sub.add_parser(name)
        p.set_defaults(fn=fn, needs_cfg=needs_cfg)
        if needs_cfg:
            p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config base seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker pool size (or GOSSIPGAP_THREADS)")
        p.add_argument("--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.needs_cfg else None
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.fn(args, cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
