"""Command-line front end.

Subcommands: gen, check-pattern, complete, run, phase, theorem2, example1,
mix-images.  A config file (--config, `key = value` lines, `#` comments) can
supply any long-option value; explicit command-line flags win over the file.
All outputs are deterministic functions of the inputs and seeds — no
timestamps, hostnames or timing data are ever written.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .ammc import AmmcOptions, run_ammc
from .harness import (
    desk_phase_preset,
    full_phase_preset,
    run_counterexample_suite,
    run_mix_trial,
    run_phase_grid,
    run_rate_bound_campaign,
    mix_images,
    read_pgm,
    write_grid_csv,
    write_pgm,
    write_trial_log,
)
from .lrmc import LrmcOptions, complete_lowrank, leading_subspace
from .model import (
    read_mask,
    read_matrix,
    read_observed,
    write_assignment,
    write_mask,
    write_matrix,
    write_observed,
)
from .patterns import check_pattern_exhaustive, check_pattern_flow, search_partition
from .seeding import substream
from .synth import SynthConfig, generate_mixture, perturb_subspaces

__all__ = ["main"]


# ---------- config file ---------- #


def _parse_config_value(text: str):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def read_config(path) -> dict:
    """Parse `key = value` lines; `#` starts a comment, blank lines ignored."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(
                    f"{os.fspath(path)}: line {i}: expected 'key = value', "
                    f"got {raw.rstrip()!r}"
                )
            key, _, val = line.partition("=")
            key = key.strip().replace("-", "_")
            val = val.strip()
            if not key or not val:
                raise ValueError(
                    f"{os.fspath(path)}: line {i}: empty key or value"
                )
            values[key] = _parse_config_value(val)
    return values


def _apply_config(parser, sub_parser, args, argv):
    """Re-parse with config values as defaults so explicit flags win."""
    if not getattr(args, "config", None):
        return args
    values = read_config(args.config)
    valid = {
        action.dest
        for action in sub_parser._actions
        if action.dest not in ("help",)
    }
    unknown = sorted(set(values) - valid)
    if unknown:
        raise ValueError(
            f"unknown config key(s) for '{args.command}': {', '.join(unknown)}"
        )
    sub_parser.set_defaults(**values)
    return parser.parse_args(argv)


# ---------- small helpers ---------- #


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated floats, got {text!r}"
        ) from None


def _random_basis(d: int, r: int, seed: int, tag: int) -> np.ndarray:
    g = substream(seed, "init", tag).standard_normal((d, r))
    q, _ = np.linalg.qr(g)
    return q[:, :r]


def _ammc_options(args, k: int, r: int) -> AmmcOptions:
    return AmmcOptions(
        k=k,
        rank=r,
        max_outer_iters=args.max_outer,
        erasure_tol=args.erasure_tol,
        assignment_cap=args.cap,
        noise_sigma=args.sigma2,
        restarts=args.restarts,
        lrmc=LrmcOptions(rank=r, method=args.lrmc_method, tol=args.lrmc_tol,
                         max_iters=args.lrmc_iters),
        seed=args.seed,
    )


def _add_ammc_args(sp) -> None:
    sp.add_argument("--max-outer", type=int, default=100,
                    help="outer iteration budget (default 100)")
    sp.add_argument("--erasure-tol", type=float, default=1e-9,
                    help="relative gap at which erasure stops (default 1e-9)")
    sp.add_argument("--restarts", type=int, default=0,
                    help="random erasure restarts per column (default 0)")
    sp.add_argument("--cap", type=int, default=None,
                    help="max entries per component per column")
    sp.add_argument("--sigma2", type=float, default=None,
                    help="squared error above which entries become outliers")
    sp.add_argument("--lrmc-method", choices=("alt-min", "hard-svt"),
                    default="alt-min", help="completion engine")
    sp.add_argument("--lrmc-tol", type=float, default=1e-12,
                    help="completion convergence tolerance (default 1e-12)")
    sp.add_argument("--lrmc-iters", type=int, default=500,
                    help="completion iteration budget (default 500)")


# ---------- subcommand bodies ---------- #


def _cmd_gen(args) -> int:
    cfg = SynthConfig(d=args.d, n=args.n, r=args.r, k=args.k, p=args.p,
                      delta=args.delta, seed=args.seed)
    problem = generate_mixture(cfg)
    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    write_observed(os.path.join(out, "observed.mtx.txt"), problem.observed)
    write_assignment(os.path.join(out, "assignment.mtx.txt"),
                     problem.assignments)
    write_mask(os.path.join(out, "mask.mtx.txt"), problem.observed.observed)
    for k, x in enumerate(problem.truth):
        write_matrix(os.path.join(out, f"truth_{k + 1}.mtx.txt"), x)
    bases = [leading_subspace(x, args.r)[0] for x in problem.truth]
    if args.delta > 0:
        bases = perturb_subspaces(bases, args.delta, seed=args.seed)
    for k, b in enumerate(bases):
        write_matrix(os.path.join(out, f"basis_{k + 1}.mtx.txt"), b)
    counts = [int(m.sum()) for m in problem.assignments.masks]
    print(f"wrote {out}: d={args.d} n={args.n} r={args.r} k={args.k}")
    print(f"observed {problem.observed.count_observed()} entries; "
          f"per component {counts}")
    print(f"initial bases written at distance {args.delta!r} "
          f"from the true subspaces")
    return 0


def _cmd_check_pattern(args) -> int:
    mask = read_mask(args.mask)
    if args.search:
        report = search_partition(mask, args.r, budget=args.budget,
                                  seed=args.seed)
    elif args.method == "exhaustive":
        report = check_pattern_exhaustive(mask, args.r)
    else:
        report = check_pattern_flow(mask, args.r)
    if report.note:
        print(report.note)
    if report.passed:
        if report.witness_partition is not None:
            groups = "|".join(
                ",".join(str(c) for c in g) for g in report.witness_partition
            )
            witness = f"partition:{groups}"
        else:
            witness = "none"
        print(f"PASS method={report.method} witness={witness}")
        return 0
    if report.witness_columns is not None:
        witness = ",".join(str(c) for c in report.witness_columns)
    else:
        witness = "none"
    print(f"FAIL method={report.method} witness={witness}")
    return 1


def _cmd_complete(args) -> int:
    obs = read_observed(args.infile)
    opts = LrmcOptions(rank=args.r, method=args.method, tol=args.tol,
                       max_iters=args.max_iters)
    res = complete_lowrank(obs, opts)
    write_matrix(args.out, res.matrix)
    print(f"converged={res.converged} iters={res.iters} "
          f"residual={res.residual:.3e}")
    if res.ridge_flagged:
        print("warning: rank-deficient systems were ridge-regularized")
    if res.underdetermined_columns:
        print(f"warning: {len(res.underdetermined_columns)} columns have "
              f"fewer than r + 1 observations")
    return 0


def _cmd_run(args) -> int:
    obs = read_observed(args.infile)
    d, _ = obs.shape
    opts = _ammc_options(args, args.k, args.r)
    if args.init_dir:
        init = [
            read_matrix(os.path.join(args.init_dir, f"basis_{k + 1}.mtx.txt"))
            for k in range(args.k)
        ]
    else:
        init = [_random_basis(d, args.r, args.seed, k) for k in range(args.k)]
    result = run_ammc(obs, init, opts)
    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    for k, comp in enumerate(result.state.completions):
        write_matrix(os.path.join(out, f"completed_{k + 1}.mtx.txt"), comp)
    write_assignment(os.path.join(out, "assignment.mtx.txt"),
                     result.state.assignments)
    write_mask(os.path.join(out, "outliers.mtx.txt"), result.state.outliers)
    log_lines = [
        f"converged {result.converged}",
        f"outer_iters {result.outer_iters}",
        "history " + ",".join(str(c) for c in result.history),
    ] + [f"note {n}" for n in result.notes]
    with open(os.path.join(out, "run_log.txt"), "w", encoding="ascii",
              newline="\n") as fh:
        fh.write("\n".join(log_lines) + "\n")
    print(f"converged={result.converged} outer_iters={result.outer_iters}")
    print("assignment changes per iteration: "
          + ",".join(str(c) for c in result.history))
    for note in result.notes:
        print(f"note: {note}")
    return 0


def _cmd_phase(args) -> int:
    preset = {}
    if args.preset == "desk":
        preset = desk_phase_preset()
    elif args.preset == "full":
        preset = full_phase_preset()

    def pick(value, key, fallback):
        if value is not None:
            return value
        if key in preset:
            return preset[key]
        return fallback

    base_cfg = preset.get("cfg", SynthConfig(d=100, n=100, r=5, k=2, p=1.0))
    d = pick(args.d, None, base_cfg.d)
    n = pick(args.n, None, base_cfg.n)
    r = pick(args.r, None, base_cfg.r)
    k = pick(args.k, None, base_cfg.k)
    cfg = SynthConfig(d=d, n=n, r=r, k=k, p=1.0, seed=args.seed)
    p_values = pick(args.p_values, "p_values", (0.6, 0.7, 0.8, 0.9, 1.0))
    delta_values = pick(args.delta_values, "delta_values",
                        (0.0, 0.05, 0.1, 0.2, 0.3))
    trials = pick(args.trials, "trials", 20)
    if args.max_outer is not None:
        opts = AmmcOptions(k=k, rank=r, max_outer_iters=args.max_outer)
    elif "opts" in preset and preset["opts"].k == k and preset["opts"].rank == r:
        opts = preset["opts"]
    else:
        opts = AmmcOptions(k=k, rank=r)

    grid, records = run_phase_grid(
        cfg, p_values, delta_values, trials,
        seed=args.seed, workers=args.workers, opts=opts,
    )
    if args.out_csv:
        write_grid_csv(grid, args.out_csv)
    if args.out_jsonl:
        write_trial_log(records, args.out_jsonl)
    print("p,delta,success_rate")
    for ip, p in enumerate(grid.p_values):
        for idl, delta in enumerate(grid.delta_values):
            print(f"{p!r},{delta!r},{float(grid.success_rate[ip, idl])!r}")
    return 0


def _cmd_theorem2(args) -> int:
    result = run_rate_bound_campaign(
        args.d, args.r, args.eps, args.trials, seed=args.seed,
        budget=args.budget,
    )
    print(f"p={result.p!r} n_cols={result.n_cols} trials={result.trials}")
    print(f"failures={result.outcomes.count(False)} "
          f"failure_rate={result.failure_rate!r} bound={result.bound!r}")
    for note in result.notes:
        print(f"note: {note}")
    if args.out_jsonl:
        with open(args.out_jsonl, "w", encoding="ascii", newline="\n") as fh:
            for t, ok in enumerate(result.outcomes):
                fh.write(f'{{"passed": {"true" if ok else "false"}, '
                         f'"trial": {t}}}\n')
    return 0


def _cmd_example1(args) -> int:
    report = run_counterexample_suite()
    for line in report.lines():
        print(line)
    print(f"{'PASS' if report.passed else 'FAIL'} counterexample suite")
    return 0 if report.passed else 1


def _cmd_mix_images(args) -> int:
    if args.synthetic:
        rng_a = substream(args.seed, "image", 0)
        rng_b = substream(args.seed, "image", 1)
        a = rng_a.standard_normal((args.d, args.r)) @ \
            rng_a.standard_normal((args.r, args.n))
        b = rng_b.standard_normal((args.d, args.r)) @ \
            rng_b.standard_normal((args.r, args.n))
    else:
        if not args.a or not args.b:
            print("error: provide --a and --b PGM files, or --synthetic",
                  file=sys.stderr)
            return 2
        a = read_pgm(args.a)
        b = read_pgm(args.b)
    rank = args.r
    trial = run_mix_trial(a, b, rank=rank, seed=args.seed,
                          opts=None if args.max_outer is None else AmmcOptions(
                              k=2, rank=rank, max_outer_iters=args.max_outer))
    print(f"classification_error={trial.classification_error!r}")
    print("reconstruction_errors="
          + ",".join(repr(e) for e in trial.errors))
    print(f"converged={trial.converged} outer_iters={trial.outer_iters}")
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        mixed = mix_images(a, b, seed=args.seed, rank=rank)
        problem = mixed.problem
        init = [leading_subspace(x, rank)[0] for x in problem.truth]
        result = run_ammc(problem.observed, init,
                          AmmcOptions(k=2, rank=rank, seed=args.seed))
        write_pgm(os.path.join(args.out_dir, "mixed.pgm"),
                  problem.observed.values)
        for k, comp in enumerate(result.state.completions):
            write_pgm(os.path.join(args.out_dir, f"recon_{k + 1}.pgm"), comp)
        write_assignment(os.path.join(args.out_dir, "assignment.mtx.txt"),
                         result.state.assignments)
    return 0


# ---------- parser ---------- #


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mmc",
        description="Mixtures of low-rank matrices: generate, check "
                    "patterns, complete, recover, experiment.",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    sub_parsers = {}

    def add(name, **kw):
        sp = subs.add_parser(name, **kw)
        sp.add_argument("--config", default=None,
                        help="key = value file supplying option defaults")
        sub_parsers[name] = sp
        return sp

    sp = add("gen", help="generate a synthetic mixture and write it out")
    sp.add_argument("--d", type=int, default=100)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--r", type=int, default=5)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--delta", type=float, default=0.0,
                    help="subspace distance of the written basis_K files "
                         "from the true column spans (0 = exact)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=_cmd_gen)

    sp = add("check-pattern",
             help="check the column surplus condition on a mask file")
    sp.add_argument("--mask", required=True)
    sp.add_argument("--r", type=int, required=True)
    sp.add_argument("--method", choices=("flow", "exhaustive"),
                    default="flow")
    sp.add_argument("--search", action="store_true",
                    help="search for r + 1 disjoint passing column groups")
    sp.add_argument("--budget", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=_cmd_check_pattern)

    sp = add("complete", help="low-rank completion of one observed matrix")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--r", type=int, required=True)
    sp.add_argument("--method", choices=("alt-min", "hard-svt"),
                    default="alt-min")
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.add_argument("--max-iters", type=int, default=500)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_complete)

    sp = add("run", help="alternating mixture recovery on an observed matrix")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--r", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--init-dir", default=None,
                    help="directory with basis_1..K.mtx.txt initial bases "
                         "(default: random orthonormal)")
    sp.add_argument("--out-dir", required=True)
    _add_ammc_args(sp)
    sp.set_defaults(func=_cmd_run)

    sp = add("phase", help="success-rate grid over (p, delta)")
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--r", type=int, default=None)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--p-values", type=_float_list, default=None)
    sp.add_argument("--delta-values", type=_float_list, default=None)
    sp.add_argument("--trials", type=int, default=None)
    sp.add_argument("--preset", choices=("desk", "full"), default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--max-outer", type=int, default=None)
    sp.add_argument("--out-csv", default=None)
    sp.add_argument("--out-jsonl", default=None)
    sp.set_defaults(func=_cmd_phase)

    sp = add("theorem2",
             help="minimum-rate campaign: sample masks at the closed-form "
                  "rate and search partitions")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--r", type=int, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=4)
    sp.add_argument("--out-jsonl", default=None)
    sp.set_defaults(func=_cmd_theorem2)

    sp = add("example1", help="run the built-in two-explanations example")
    sp.set_defaults(func=_cmd_example1)

    sp = add("mix-images", help="mix two images pixel-wise and unmix them")
    sp.add_argument("--a", default=None, help="first PGM image")
    sp.add_argument("--b", default=None, help="second PGM image")
    sp.add_argument("--synthetic", action="store_true",
                    help="use random low-rank images instead of files")
    sp.add_argument("--d", type=int, default=256,
                    help="synthetic image height")
    sp.add_argument("--n", type=int, default=64, help="synthetic image width")
    sp.add_argument("--r", type=int, default=10, help="working rank")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-outer", type=int, default=None)
    sp.add_argument("--out-dir", default=None)
    sp.set_defaults(func=_cmd_mix_images)

    return parser, sub_parsers


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, sub_parsers = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(parser, sub_parsers[args.command], args, argv)
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
