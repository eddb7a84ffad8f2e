"""``fracact`` command line: plot, gradcheck, train, sweep.

Exit codes: 0 success, 1 check failure, 2 usage or input error, 3 NaN abort.
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import kernels
from .activations import falu_eval, frac_act_forward, make_activation
from .bench import sweep_terms
from .config import build_datasets, build_model, load_config
from .errors import FracActError, TrainingAborted
from .nn import save_checkpoint, train
from .reporting import atomic_write_text, write_csv, write_histogram, write_metrics, write_timing

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NAN = 0, 1, 2, 3
PLOT_FUNCTIONS = ("fsig", "fgelu", "fmish", "falu")


class _Usage(Exception):
    pass


def _floats(text, what):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise _Usage(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise _Usage(f"{what}: empty list")
    return vals


def _ints(text, what):
    vals = _floats(text, what)
    if any(v != int(v) for v in vals):
        raise _Usage(f"{what}: expected integers, got {text!r}")
    return [int(v) for v in vals]


def _range(text):
    parts = text.split(":")
    if len(parts) != 2:
        raise _Usage(f"--range: expected LO:HI, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise _Usage(f"--range: expected LO:HI, got {text!r}") from None
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise _Usage(f"--range: need finite LO < HI, got {text!r}")
    return lo, hi


# ---- plot -------------------------------------------------------------------


def plot_table(function, orders, terms=None, step=None, lo=-5.0, hi=5.0, samples=201, beta=1.0):
    """Columns ``x`` then one per order; returns ``(header, rows)``."""
    if function not in PLOT_FUNCTIONS:
        raise _Usage(f"unknown function {function!r}; choose from {', '.join(PLOT_FUNCTIONS)}")
    if samples < 2:
        raise _Usage("--samples must be >= 2")
    for a in orders:
        if not 0.0 <= a <= 2.0:
            raise _Usage(f"order {a!r} outside [0, 2]")
    if function == "falu" and not 1.0 <= beta <= 10.0:
        raise _Usage(f"--beta {beta!r} outside [1, 10]")
    x = np.linspace(lo, hi, samples)
    cols = []
    for a in orders:
        if function == "falu":
            cols.append(falu_eval(x, a, beta))
        else:
            spec = make_activation(function, order=a, terms=terms, step=step)
            cols.append(frac_act_forward(spec, x)[0])
    header = ["x"] + [f"a={a!r}" for a in orders]
    rows = [[float(x[i])] + [float(c[i]) for c in cols] for i in range(samples)]
    return header, rows


def cmd_plot(args):
    orders = _floats(args.orders, "--orders")
    lo, hi = _range(args.range)
    header, rows = plot_table(args.function, orders, args.terms, args.step, lo, hi, args.samples, args.beta)
    out = args.out
    if not out.endswith(".csv"):
        out = os.path.join(out, f"plot_{args.function}.csv")
    write_csv(out, header, rows)
    print(f"wrote {out}")
    return EXIT_OK


# ---- gradcheck ----------------------------------------------------------------


def cmd_gradcheck(args):
    from .gradcheck import run_all

    if args.cases < 1:
        raise _Usage("--cases must be >= 1")
    ok = True
    for r in run_all(seed=args.seed, cases=args.cases):
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:34s} cases={r.cases:4d} worst_rel_err={r.worst:.3e} tol={r.tol:.0e} {status}")
        if not r.passed:
            ok = False
            print(f"  failing case: {r.worst_case}")
    return EXIT_OK if ok else EXIT_CHECK


# ---- train / sweep --------------------------------------------------------------


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, train=replace(cfg.train, seed=args.seed))
    if getattr(args, "terms", None) is not None:
        cfg = cfg.with_terms(args.terms)
    if getattr(args, "step", None) is not None:
        cfg = replace(cfg, model=replace(cfg.model, step=args.step))
    return cfg


def write_failure_report(out_dir, exc, context=""):
    lines = [
        "status: nan_abort",
        f"error: {exc}",
        f"layer: {getattr(exc, 'layer', None)}",
        f"index: {getattr(exc, 'index', None)}",
        f"epoch: {getattr(exc, 'epoch', None)}",
        f"step: {getattr(exc, 'step', None)}",
    ]
    if context:
        lines.append(context)
    path = os.path.join(out_dir, "failure_report.txt")
    atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def cmd_train(args):
    cfg = _load(args)
    train_set, test_set = build_datasets(cfg)
    model = build_model(cfg, train_set.dims, max(train_set.n_classes, test_set.n_classes))
    os.makedirs(args.out, exist_ok=True)
    seen = {}
    try:
        metrics = train(model, train_set, test_set, cfg.train, on_epoch=lambda m: seen.setdefault("m", m))
    except TrainingAborted as exc:
        if "m" in seen:
            write_metrics(os.path.join(args.out, "metrics.csv"), seen["m"])
        path = write_failure_report(args.out, exc, f"config: {os.path.abspath(args.config)}")
        print(f"training aborted: {exc}", file=sys.stderr)
        print(f"failure report: {path}", file=sys.stderr)
        return EXIT_NAN
    write_metrics(os.path.join(args.out, "metrics.csv"), metrics)
    write_timing(os.path.join(args.out, "timing.csv"), metrics)
    write_histogram(os.path.join(args.out, "fdo_hist_start.csv"), metrics.fdo_hist_start)
    write_histogram(os.path.join(args.out, "fdo_hist_end.csv"), metrics.fdo_hist_end)
    save_checkpoint(model, os.path.join(args.out, "checkpoint.json"))
    print(f"best_test_acc {metrics.best_test_acc!r}")
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load(args)
    n_list = _ints(args.n_list, "--n-list")
    data = build_datasets(cfg)
    report = sweep_terms(cfg, n_list, data)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "sweep.csv")
    report.write_csv(path)
    for r in report.rows:
        print(f"N={r.N:<3d} h={r.h!r:<8} status={r.status} best_acc={r.best_acc!r} planes={r.cached_planes!r}")
    print(f"wrote {path}")
    if report.best_terms is not None:
        print(f"best_terms {report.best_terms}")
    # individual nan_abort rows are data, not a failed sweep
    return EXIT_OK if any(r.status == "ok" for r in report.rows) else EXIT_NAN


# ---- entry point -----------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="fracact", description="Fractional-order activation toolkit.")
    p.add_argument("--backend", choices=("auto", "cython", "python"), default="auto", help="kernel backend")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("plot", help="tabulate fractional activation curves as CSV")
    sp.add_argument("--function", default="fsig", help="fsig, fgelu, fmish or falu")
    sp.add_argument("--orders", default="0,0.5,1,1.5,2")
    sp.add_argument("--terms", type=int, default=None)
    sp.add_argument("--step", type=float, default=None)
    sp.add_argument("--range", default="-5:5")
    sp.add_argument("--samples", type=int, default=201)
    sp.add_argument("--beta", type=float, default=1.0, help="FALU beta")
    sp.add_argument("--out", default=".", help="CSV path, or a directory")
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cases", type=int, default=200)
    sp.set_defaults(func=cmd_gradcheck)

    for name, fn, helptext in (("train", cmd_train, "train one configured model"), ("sweep", cmd_sweep, "sweep the term count N")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int, default=None, help="override the training seed")
        sp.add_argument("--out", default="out")
        if name == "train":
            sp.add_argument("--terms", type=int, default=None)
            sp.add_argument("--step", type=float, default=None)
        else:
            sp.add_argument("--n-list", default="1,2,4,8")
        sp.set_defaults(func=fn)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.backend != "auto":
        try:
            kernels.set_backend(args.backend)
        except ValueError as exc:
            print(f"fracact: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except _Usage as exc:
        print(f"fracact {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingAborted as exc:
        print(f"fracact {args.command}: training aborted: {exc}", file=sys.stderr)
        return EXIT_NAN
    except (FracActError, OSError) as exc:
        print(f"fracact {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
