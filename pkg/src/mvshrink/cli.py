"""Command-line interface.

Subcommands
-----------
fit          fit the model to X/Y CSV files and persist draws + summaries
simulate     generate a synthetic benchmark dataset as CSV files
experiment   run benchmark experiments and emit metrics.csv / medians.csv
check-prior  numerically verify the prior-mass conditions for a config
select       apply the row-selection rule to persisted posterior draws

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error,
4 I/O error.

A flat ``key = value`` config file with one section per subcommand (INI
syntax) can prefill any flag; explicit command-line flags win.  All
randomness flows from ``--seed``; when the flag is absent a fresh entropy
seed is drawn and echoed into run_meta.txt so the run can be reproduced.
"""

from __future__ import annotations

import argparse
import configparser
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__, io, priors, selection, theory
from .errors import ConfigError, DataError, MvshrinkError, NumericalError
from .experiments import (
    EXPERIMENT_TABLE,
    ExperimentConfig,
    experiment_config,
    generate_synthetic,
    run_experiment_suite,
)
from .sampler import (
    HyperParams,
    PosteriorSamples,
    RegressionData,
    SamplerConfig,
    posterior_summary,
    run_chain,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit2(message)


class SystemExit2(Exception):
    def __init__(self, message):
        super().__init__(message)


def _parse_ids(text: str) -> list[int]:
    ids: list[int] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if "-" in chunk:
            lo, _, hi = chunk.partition("-")
            ids.extend(range(int(lo), int(hi) + 1))
        elif chunk:
            ids.append(int(chunk))
    if not ids:
        raise ConfigError(f"no experiment ids in {text!r}")
    return ids


def _parse_cols(text: str, width: int) -> list[int]:
    """1-based column subset: '1:4' (inclusive range) or '1,2,5'."""
    if ":" in text:
        lo, _, hi = text.partition(":")
        cols = list(range(int(lo), int(hi) + 1))
    else:
        cols = [int(c) for c in text.split(",") if c.strip()]
    if not cols:
        raise ConfigError(f"empty column subset {text!r}")
    for c in cols:
        if not 1 <= c <= width:
            raise ConfigError(f"column {c} out of range 1..{width}")
    return [c - 1 for c in cols]


def _tau_value(text: str, n: int, p: int, family, a_n: float | None = None,
               u_prime: float = 1.0, s0: int = 1, q: int = 1) -> float | None:
    if text == "auto":
        return None
    if text == "theory":
        eps = theory.contraction_rate(n, p, q, s0)
        a = a_n if a_n is not None else eps / p
        return priors.theoretical_tau_max(a, p, priors.tail_exponent(family), u_prime)
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"--tau must be 'auto', 'theory', or a number, got {text!r}")
    if value <= 0:
        raise ConfigError("--tau must be positive")
    return value


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    return secrets.randbits(63)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_summary(out_dir, summary, sel, report, meta):
    """Persist the fit products; deterministic given its inputs."""
    out_dir = Path(out_dir)
    q = summary.sigma_mean.shape[0]
    p = summary.b_mean.shape[0]
    io.write_matrix(
        out_dir / "sigma_hat.csv", summary.sigma_mean,
        columns=[f"Sigma_{k + 1}" for k in range(q)], fmt="%.6g",
    )
    io.write_matrix(
        out_dir / "b_hat.csv", summary.b_mean,
        columns=[f"B_{k + 1}" for k in range(q)],
    )
    io.write_matrix(
        out_dir / "b_ci.csv",
        np.column_stack([
            np.repeat(np.arange(1, p + 1), q),
            np.tile(np.arange(1, q + 1), p),
            summary.b_lower.ravel(),
            summary.b_upper.ravel(),
        ]),
        columns=["row", "col", "lower", "upper"],
    )
    io.write_matrix(
        out_dir / "sigma_ci.csv",
        np.column_stack([
            np.repeat(np.arange(1, q + 1), q),
            np.tile(np.arange(1, q + 1), q),
            summary.sigma_lower.ravel(),
            summary.sigma_upper.ravel(),
        ]),
        columns=["row", "col", "lower", "upper"],
    )
    write_selection_csv(out_dir / "selection.csv", sel)
    items = theory.report_items(report)
    io.write_key_values(out_dir / "conditions.txt", items)
    _write_conditions_csv(out_dir / "conditions.csv", items)
    io.write_key_values(out_dir / "run_meta.txt", sorted(meta.items()))


def _write_conditions_csv(path, items):
    def render(handle):
        handle.write("key,value\n")
        for key, value in items:
            handle.write(f"{key},{value}\n")

    io._atomic_write(path, render)


def write_selection_csv(path, sel):
    p = sel.inclusion_probability.size
    chosen = np.zeros(p, dtype=int)
    chosen[sel.selected] = 1
    io.write_matrix(
        path,
        np.column_stack([
            np.arange(1, p + 1),
            sel.inclusion_probability,
            chosen,
        ]),
        columns=["row_index", "inclusion_probability", "selected"],
        fmt="%.10g",
    )


# --------------------------------------------------------------------------
# subcommand implementations


def _cmd_fit(args) -> int:
    x = io.ingest_csv(args.x)
    y = io.ingest_csv(args.y)
    if args.response_cols:
        y = y[:, _parse_cols(args.response_cols, y.shape[1])]
    if args.center:
        x = x - x.mean(axis=0)
        y = y - y.mean(axis=0)
    data = RegressionData(x, y)
    family = priors.parse_family(args.family)
    seed = _resolve_seed(args)
    nu = args.nu if args.nu is not None else data.q + 2.0
    tau = _tau_value(args.tau, data.n, data.p, family, q=data.q)
    hp = HyperParams(family=family, nu=nu, phi=np.eye(data.q), tau=tau)
    cfg = SamplerConfig(
        iterations=args.iters, burn_in=args.burnin, thinning=args.thin,
        seed=seed, fast_path=args.fast_path,
    )
    samples = run_chain(data, hp, cfg)
    summary = posterior_summary(samples, level=args.level)

    a_n = (
        selection.default_threshold(data.n, data.p)
        if args.a_n == "auto"
        else float(args.a_n)
    )
    sel = selection.select(samples, a_n, args.cutoff)

    # plug-in condition report: unknown truth is replaced by the estimates
    # and the selected-set size (floored at 1)
    s0_plug = max(1, sel.selected.size)
    m0 = args.m0 if args.m0 is not None else 1.1 * max(summary.row_score_mean.max(), 1e-6)
    report = theory.build_condition_report(
        family, samples.tau, data.n, data.p, data.q, s0_plug,
        u=args.u, m0=m0, b0=summary.b_mean, sigma0=summary.sigma_mean,
        x=data.x, c0=args.c0, subset_budget=args.subset_budget, seed=seed,
    )

    out = Path(args.out)
    io.save_posterior(out, samples)
    meta = dict(samples.meta)
    meta.update({"n": data.n, "p": data.p, "q": data.q, "a_n": a_n, "cutoff": args.cutoff})
    write_summary(out, summary, sel, report, meta)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    if args.experiment_id is not None:
        cfg = experiment_config(args.experiment_id, seed=seed)
    else:
        if None in (args.n, args.p, args.q, args.s0):
            raise ConfigError("simulate needs --experiment-id or all of --n/--p/--q/--s0")
        cfg = ExperimentConfig(
            n=args.n, p=args.p, q=args.q, s0=args.s0,
            sigma2=args.sigma2, rho=args.rho,
            coef_lo=args.lo, coef_hi=args.hi, seed=seed,
        )
    rng = np.random.default_rng(seed)
    data, b0, sigma0, support = generate_synthetic(cfg, rng)
    out = Path(args.out)
    io.write_matrix(out / "x.csv", data.x, columns=[f"x{j + 1}" for j in range(cfg.p)])
    io.write_matrix(out / "y.csv", data.y, columns=[f"y{k + 1}" for k in range(cfg.q)])
    io.write_matrix(out / "b0.csv", b0, columns=[f"B_{k + 1}" for k in range(cfg.q)])
    io.write_matrix(out / "sigma0.csv", sigma0, columns=[f"Sigma_{k + 1}" for k in range(cfg.q)])
    io.write_matrix(
        out / "support.csv", (support + 1).reshape(-1, 1), columns=["row_index"], fmt="%d"
    )
    io.write_key_values(
        out / "sim_meta.txt",
        [("n", cfg.n), ("p", cfg.p), ("q", cfg.q), ("s0", cfg.s0),
         ("sigma2", cfg.sigma2), ("rho", cfg.rho), ("coef_lo", cfg.coef_lo),
         ("coef_hi", cfg.coef_hi), ("seed", seed)],
    )
    return EXIT_OK


def _cmd_experiment(args) -> int:
    ids = _parse_ids(args.ids)
    seed = _resolve_seed(args)
    records, medians = run_experiment_suite(
        ids,
        replicates=args.replicates,
        iterations=args.iters,
        burn_in=args.burnin,
        seed=seed,
        workers=args.workers,
        fast_path=args.fast_path,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def render_metrics(handle):
        handle.write(
            "experiment,replicate,spectral_error,frobenius_error,coef_error,"
            "exact_recovery,tp,fp,seconds\n"
        )
        for r in records:
            seconds = r.seconds if args.timing == "wall" else 0.0
            handle.write(
                f"{r.experiment},{r.replicate},{r.spectral_error:.10g},"
                f"{r.frobenius_error:.10g},{r.coef_error:.10g},"
                f"{int(r.exact_recovery)},{r.tp},{r.fp},{seconds:.3f}\n"
            )

    io._atomic_write(out / "metrics.csv", render_metrics)

    def render_medians(handle):
        handle.write("experiment,spectral_error,frobenius_error,coef_error\n")
        for exp_id in sorted(medians):
            m = medians[exp_id]
            handle.write(
                f"{exp_id},{m['spectral_error']:.10g},"
                f"{m['frobenius_error']:.10g},{m['coef_error']:.10g}\n"
            )

    io._atomic_write(out / "medians.csv", render_medians)
    io.write_key_values(
        out / "run_meta.txt",
        [("seed", seed), ("ids", ",".join(map(str, ids))),
         ("replicates", args.replicates), ("iterations", args.iters),
         ("burn_in", args.burnin), ("workers", args.workers),
         ("timing", args.timing)],
    )
    return EXIT_OK


def _cmd_check_prior(args) -> int:
    family = priors.parse_family(args.family)
    eps = theory.contraction_rate(args.n, args.p, args.q, args.s0)
    a_n = float(args.a_n) if args.a_n != "auto" else eps / args.p
    tau = _tau_value(args.tau, args.n, args.p, family, a_n=a_n,
                     u_prime=args.u_prime, s0=args.s0, q=args.q)
    if tau is None:
        tau = priors.default_tau(args.n, args.p)
    report = theory.build_condition_report(
        family, tau, args.n, args.p, args.q, args.s0,
        u=args.u, m0=args.m0, a_n=a_n, c0=args.c0,
        subset_budget=args.subset_budget, seed=_resolve_seed(args),
    )
    items = theory.report_items(report)
    if args.out:
        out = Path(args.out)
        io.write_key_values(out / "conditions.txt", items)
        _write_conditions_csv(out / "conditions.csv", items)
    else:
        for key, value in items:
            print(f"{key} = {value}")
    return EXIT_OK


def _cmd_select(args) -> int:
    samples = io.load_posterior(args.draws)
    if args.a_n == "auto":
        meta = samples.meta
        if "n" not in meta or "p" not in meta:
            raise DataError(
                "--a-n auto needs n and p in run_meta.txt next to the draws"
            )
        a_n = selection.default_threshold(int(meta["n"]), int(meta["p"]))
    else:
        a_n = float(args.a_n)
    sel = selection.select(samples, a_n, args.cutoff)
    write_selection_csv(args.out, sel)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser construction


def _add_common(sub):
    sub.add_argument("--seed", type=int, default=None, help="master seed (default: fresh entropy, echoed to run_meta.txt)")


def build_parser() -> _Parser:
    parser = _Parser(prog="mvshrink", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mvshrink {__version__}")
    parser.add_argument("--config", default=None, help="INI config file with one section per subcommand")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit the model to X/Y CSV files")
    fit.add_argument("--x", required=True, help="design matrix CSV (header row)")
    fit.add_argument("--y", required=True, help="response matrix CSV (header row)")
    fit.add_argument("--out", required=True, help="output directory")
    fit.add_argument("--family", default="horseshoe",
                     help="mixing family spec, e.g. horseshoe or tpbn:u=0.5,a=0.5")
    fit.add_argument("--tau", default="auto", help="global scale: auto, theory, or a number")
    fit.add_argument("--nu", type=float, default=None, help="inverse-Wishart df (default q+2)")
    fit.add_argument("--iters", type=int, default=15000)
    fit.add_argument("--burnin", type=int, default=5000)
    fit.add_argument("--thin", type=int, default=1)
    fit.add_argument("--fast-path", default="auto", choices=["auto", "always", "never"])
    fit.add_argument("--response-cols", default=None,
                     help="1-based response column subset, e.g. 1:4 or 1,2,5")
    fit.add_argument("--center", action="store_true",
                     help="center X and Y columns before fitting (default off)")
    fit.add_argument("--a-n", default="auto", help="selection threshold (auto or a number)")
    fit.add_argument("--cutoff", type=float, default=0.5)
    fit.add_argument("--level", type=float, default=0.95, help="credible-interval level")
    fit.add_argument("--u", type=float, default=0.5, help="tail-condition exponent")
    fit.add_argument("--m0", type=float, default=None,
                     help="density-floor radius (default 1.1 x max posterior row score)")
    fit.add_argument("--c0", type=float, default=None, help="flatness ball-radius factor")
    fit.add_argument("--subset-budget", type=int, default=200)
    _add_common(fit)

    sim = sub.add_parser("simulate", help="write a synthetic dataset as CSV")
    sim.add_argument("--experiment-id", type=int, default=None,
                     choices=sorted(EXPERIMENT_TABLE), help="use a table configuration")
    sim.add_argument("--n", type=int, default=None)
    sim.add_argument("--p", type=int, default=None)
    sim.add_argument("--q", type=int, default=None)
    sim.add_argument("--s0", type=int, default=None)
    sim.add_argument("--sigma2", type=float, default=2.0)
    sim.add_argument("--rho", type=float, default=0.5)
    sim.add_argument("--lo", type=float, default=0.5, help="smallest signal magnitude")
    sim.add_argument("--hi", type=float, default=5.0, help="largest signal magnitude")
    sim.add_argument("--out", required=True)
    _add_common(sim)

    exp = sub.add_parser("experiment", help="run benchmark experiments")
    exp.add_argument("--ids", default="1-6", help="experiment ids, e.g. 1-6 or 1,3")
    exp.add_argument("--replicates", type=int, default=20)
    exp.add_argument("--iters", type=int, default=3000)
    exp.add_argument("--burnin", type=int, default=1000)
    exp.add_argument("--workers", type=int, default=1)
    exp.add_argument("--fast-path", default="auto", choices=["auto", "always", "never"])
    exp.add_argument("--timing", default="none", choices=["none", "wall"],
                     help="'wall' writes measured seconds into metrics.csv and"
                          " breaks byte-for-byte reproducibility (default: 0.000)")
    exp.add_argument("--out", required=True)
    _add_common(exp)

    chk = sub.add_parser("check-prior", help="verify prior-mass conditions")
    chk.add_argument("--family", required=True)
    chk.add_argument("--tau", default="auto", help="auto, theory, or a number")
    chk.add_argument("--n", type=int, required=True)
    chk.add_argument("--p", type=int, required=True)
    chk.add_argument("--q", type=int, required=True)
    chk.add_argument("--s0", type=int, required=True)
    chk.add_argument("--u", type=float, default=0.5)
    chk.add_argument("--u-prime", type=float, default=1.0,
                     help="exponent u' in the theory tau scale")
    chk.add_argument("--m0", type=float, default=1.0)
    chk.add_argument("--c0", type=float, default=None)
    chk.add_argument("--a-n", default="auto")
    chk.add_argument("--subset-budget", type=int, default=200)
    chk.add_argument("--out", default=None, help="directory (default: print to stdout)")
    _add_common(chk)

    sel = sub.add_parser("select", help="apply the selection rule to saved draws")
    sel.add_argument("--draws", required=True, help="directory with *_draws.csv files")
    sel.add_argument("--a-n", default="auto")
    sel.add_argument("--cutoff", type=float, default=0.5)
    sel.add_argument("--out", required=True, help="output CSV path")
    _add_common(sel)

    return parser


def _apply_config(parser, argv):
    """Pre-scan for --config and install file values as subcommand defaults."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        return argv
    path = argv[idx + 1]
    command = next((a for a in argv if a in
                    ("fit", "simulate", "experiment", "check-prior", "select")), None)
    if command is None:
        return argv
    ini = configparser.ConfigParser()
    read = ini.read(path)
    if not read:
        raise DataError(f"config file {path!r} not found or unreadable")
    if not ini.has_section(command):
        return argv
    for sub_action in parser._subparsers._group_actions:
        sub_parser = sub_action.choices.get(command)
        if sub_parser is None:
            continue
        defaults = {}
        known = {a.dest: a for a in sub_parser._actions}
        for key, value in ini.items(command):
            dest = key.replace("-", "_")
            if dest not in known:
                raise ConfigError(
                    f"unknown key {key!r} in config section [{command}]"
                )
            action = known[dest]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[dest] = ini.getboolean(command, key)
            elif action.type is int:
                defaults[dest] = int(value)
            elif action.type is float:
                defaults[dest] = float(value)
            else:
                defaults[dest] = value
            action.required = False  # a config value satisfies a required flag
        sub_parser.set_defaults(**defaults)
    return argv


_COMMANDS = {
    "fit": _cmd_fit,
    "simulate": _cmd_simulate,
    "experiment": _cmd_experiment,
    "check-prior": _cmd_check_prior,
    "select": _cmd_select,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MvshrinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
