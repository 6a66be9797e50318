"""Command-line entry point.

Subcommands: ``net``, ``weights``, ``compress``, ``bench``, ``train``,
``eval``.  Any flag may also come from ``--config FILE`` holding
``key = value`` lines; flags given on the command line win.
Exit status is 0 on success, 2 on usage errors and 1 on pipeline errors.
Output files are written atomically, so a failed run leaves none behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from pathlib import Path

from . import __version__, _accel, clustering, mlp, mnist, nets, testbed, weights
from .dataset import DEFAULT_NOISE_VAR, atomic_write_text, read_csv
from .errors import ParameterError, QmcReduceError

log = logging.getLogger("qmcreduce")


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _fmt(v) -> str:
    return repr(float(v))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="read further flags from a key=value file")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--threads", type=int, default=None, help="cap on kernel worker threads")
    p.add_argument("--out", "-o", metavar="PATH", help="output file (default stdout)")
    p.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")


def _add_net_source(p: argparse.ArgumentParser, need_s: bool = True) -> None:
    g = p.add_argument_group("net")
    g.add_argument("--b", type=int, default=2, help="prime base (default 2)")
    g.add_argument("--m", type=int, help="the net has b**m points")
    if need_s:
        g.add_argument("--s", type=int, help="dimension")
    g.add_argument("--alpha", type=int, default=1, help="interlacing order (default 1)")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--faure", action="store_true", help="Faure generating matrices (default when s <= b)")
    src.add_argument("--sobol", action="store_true", help="Sobol generating matrices (base 2)")
    src.add_argument("--matrices", metavar="FILE", help="generating-matrix text file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmcreduce",
        description="Compress regression datasets with digital nets and supervised clustering.",
    )
    parser.add_argument("--version", action="version", version=f"qmcreduce {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("net", help="generate digital-net points as CSV",
                       description="Write the points of a digital net as CSV (columns l, x1..xs).")
    _add_net_source(p)
    p.add_argument("--verify", action="store_true", help="compute the exact t value and report it on stderr")
    _add_common(p)

    p = sub.add_parser("weights", help="QMC-averaging weights for a dataset",
                       description="Compute signed net-point weights; CSV columns l, z1..zs, wx, wxy.")
    p.add_argument("--data", required=True, metavar="CSV", help="dataset CSV with header x1..xs,y")
    _add_net_source(p, need_s=False)
    p.add_argument("--nu", type=int, help="partition level (default from the net quality)")
    _add_common(p)

    p = sub.add_parser("compress", help="cluster-based compression",
                       description="Compress a dataset; CSV columns z1..zs, w (and net_index for voronoi).")
    p.add_argument("--data", required=True, metavar="CSV", help="dataset CSV with header x1..xs,y")
    p.add_argument("--method", required=True, choices=["supercompress", "robust", "voronoi", "kmeans"])
    p.add_argument("--K", type=int, help="number of clusters")
    p.add_argument("--lam", type=float, help="robust blend parameter in (0, 1]")
    p.add_argument("--x-only", action="store_true", help="robust: split on x instead of (x, y)")
    _add_net_source(p, need_s=False)
    _add_common(p)

    p = sub.add_parser("bench", help="compression-error, scaling or timing experiments",
                       description="Run testbed experiments; CSV or JSON report, table on stderr.")
    p.add_argument("--kind", choices=["error", "scale", "timing"], default="error")
    p.add_argument("--function", choices=list(testbed.FUNCTIONS), default="f1")
    p.add_argument("--N", type=int, default=3000)
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--K", type=_int_list, default=[2**k for k in range(5, 11)], help="comma-separated sizes")
    p.add_argument("--reps", type=int, default=100, help="repetitions")
    p.add_argument("--methods", type=_str_list, default=["supercompress", "qmc-avg", "voronoi"],
                   help=f"comma-separated subset of {','.join(testbed.METHODS)}")
    p.add_argument("--b", type=int, default=2, help="net base")
    p.add_argument("--nu", type=int, help="QMC-averaging level")
    p.add_argument("--lam", type=float, help="robust blend parameter")
    p.add_argument("--noise-var", type=float, default=DEFAULT_NOISE_VAR,
                   help=f"noise variance (default {DEFAULT_NOISE_VAR:g}; 0.0004 reads 0.02 as a std)")
    p.add_argument("--gamma", type=_float_list, default=[100.0, 10.0, 1.0], help="scale experiment gammas")
    p.add_argument("--noise-before-scaling", action="store_true", help="scale experiment: add noise first")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--no-timing", action="store_true", help="omit the non-deterministic time column")
    _add_common(p)

    p = sub.add_parser("train", help="train the MNIST network on compressed data",
                       description="Compress the MNIST training set, train, save the model; prints a JSON summary.")
    p.add_argument("--data-dir", help="directory with the four IDX files (default: $QMCREDUCE_MNIST_DIR or bundled subset)")
    p.add_argument("--n-train", type=int, default=10_000, help="training images used (default 10000)")
    p.add_argument("--method", choices=list(mnist.METHODS), default="full")
    p.add_argument("--K", type=int, help="clusters")
    p.add_argument("--rate", type=float, help="compression rate K/N (alternative to --K)")
    p.add_argument("--m", type=int, default=10, help="Sobol net exponent for qmc-avg/voronoi")
    p.add_argument("--nu", type=int, default=2)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--model-out", required=True, metavar="PATH", help="where to save the model")
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate a saved model on the MNIST test split",
                       description="Accuracy report as JSON; optional CSV confusion matrix.")
    p.add_argument("--model", required=True, metavar="PATH")
    p.add_argument("--data-dir", help="directory with the IDX files")
    p.add_argument("--confusion", metavar="CSV", help="write the confusion matrix here")
    _add_common(p)
    return parser


def _expand_config(argv: list[str]) -> list[str]:
    """Insert flags from ``--config FILE`` right after the subcommand."""
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return argv
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    extra = []
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() == "true":
            extra.append(flag)
        elif value.lower() != "false":
            extra.extend([flag, value])
    pos = next((i for i, tok in enumerate(argv) if not tok.startswith("-")), 0)
    return argv[: pos + 1] + extra + argv[pos + 1 :]


# ---------------------------------------------------------------- commands


def _net_from_args(args, s: int) -> nets.DigitalNet:
    if args.m is None and not args.matrices:
        raise UsageError("--m is required unless --matrices is given")
    if args.matrices:
        G = nets.load_matrices(args.matrices)
        if G.alpha == 1 and args.alpha > 1:
            G = nets.interlace(G, args.alpha)
        return nets.generate_points(G, s)
    count = s * args.alpha
    use_sobol = args.sobol or (not args.faure and count > args.b)
    if use_sobol:
        if args.b != 2:
            raise ParameterError("Sobol matrices require b = 2")
        G = nets.sobol_matrices(args.m, count)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            G = nets.faure_matrices(args.b, args.m, count)
    if args.alpha > 1:
        G = nets.interlace(G, args.alpha)
    net = nets.generate_points(G, s)
    if not use_sobol and args.alpha == 1 and count <= args.b:
        net.t = 0  # Faure nets with s <= b are (0, m, s)-nets
    return net


def cmd_net(args) -> int:
    if args.s is None and not args.matrices:
        raise UsageError("--s is required unless --matrices is given")
    s = args.s
    if args.matrices and s is None:
        s = nets.load_matrices(args.matrices).count // args.alpha
    net = _net_from_args(args, s)
    if args.verify:
        net.t = nets.min_t(net)
        print(f"t = {net.t}", file=sys.stderr)
    header = ["l"] + [f"x{j + 1}" for j in range(net.s)]
    rows = ([l] + [_fmt(v) for v in pt] for l, pt in enumerate(net.points))
    _emit(_csv_text(header, rows), args.out)
    return 0


def cmd_weights(args) -> int:
    ds = read_csv(args.data)
    net = _net_from_args(args, ds.s)
    if net.t is None:
        net.t = nets.min_t(net)
    nu = weights.default_nu(net.m, net.t, net.alpha) if args.nu is None else args.nu
    log.info("net b=%d m=%d s=%d t=%s, nu=%d", net.b, net.m, net.s, net.t, nu)
    W = weights.compute_weights(ds.points, ds.responses, net, nu)
    header = ["l"] + [f"z{j + 1}" for j in range(net.s)] + ["wx", "wxy"]
    rows = (
        [l] + [_fmt(v) for v in net.points[l]] + [_fmt(W.wx[l]), _fmt(W.wxy[l])]
        for l in range(net.L)
    )
    _emit(_csv_text(header, rows), args.out)
    return 0


def cmd_compress(args) -> int:
    ds = read_csv(args.data)
    X, Y = ds.points, ds.responses
    if args.method == "voronoi":
        model = clustering.qmc_voronoi(X, Y, _net_from_args(args, ds.s))
    else:
        if args.K is None:
            raise UsageError(f"--K is required for {args.method}")
        if args.method == "supercompress":
            model = clustering.supercompress(X, Y, args.K, args.seed)
        elif args.method == "robust":
            model = clustering.robust_supercompress(X, Y, args.K, args.lam, args.seed, joint=not args.x_only)
        else:
            model = clustering.kmeans(X, args.K, args.seed, Y)
    header = [f"z{j + 1}" for j in range(ds.s)] + ["w"]
    if model.net_index is not None:
        header.append("net_index")
    rows = []
    for k in range(model.K):
        row = [_fmt(v) for v in model.centers[k]] + [_fmt(model.responses[k])]
        if model.net_index is not None:
            row.append(int(model.net_index[k]))
        rows.append(row)
    _emit(_csv_text(header, rows), args.out)
    return 0


def cmd_bench(args) -> int:
    cfg = testbed.ExperimentConfig(
        N=args.N, s=args.s, Ks=tuple(args.K), repetitions=args.reps, seed=args.seed,
        noise_var=args.noise_var, methods=tuple(args.methods), function=args.function, b=args.b,
        nu=args.nu, noise_after_scaling=not args.noise_before_scaling, lam=args.lam,
    )
    if args.kind == "error":
        report = testbed.run_error_experiment(cfg)
    elif args.kind == "scale":
        report = testbed.run_scale_experiment(cfg, tuple(args.gamma))
    else:
        report = testbed.run_timing_experiment(cfg)
    timing = not args.no_timing
    text = report.to_csv(timing) if args.format == "csv" else report.to_json(timing) + "\n"
    _emit(text, args.out)
    print(report.pretty(), file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    data = mnist.load(args.data_dir, args.n_train)
    K = args.K
    if K is None and args.rate is not None:
        K = mnist.rate_to_K(len(data.y_train), args.rate)
    if args.method in ("supercompress", "robust", "kmeans") and K is None:
        raise UsageError(f"--K or --rate is required for {args.method}")
    run = mnist.run(
        data, args.method, K=K, m=args.m if args.method in ("qmc-avg", "voronoi") else None,
        nu=args.nu, epochs=args.epochs, hidden=args.hidden, seed=args.seed, lr=args.lr,
        batch_size=args.batch_size,
    )
    mlp.save_model(args.model_out, run.extra["model"])
    summary = run.row()
    summary.update({k: v for k, v in run.extra.items() if k != "model"})
    _emit(json.dumps(summary, indent=2) + "\n", args.out)
    return 0


def cmd_eval(args) -> int:
    model = mlp.load_model(args.model)
    data = mnist.load(args.data_dir, n_train=1)
    rep = mlp.evaluate(model, data.X_test, data.y_test)
    if args.confusion:
        atomic_write_text(args.confusion, rep.confusion_csv())
    _emit(rep.to_json() + "\n", args.out)
    return 0


COMMANDS = {
    "net": cmd_net,
    "weights": cmd_weights,
    "compress": cmd_compress,
    "bench": cmd_bench,
    "train": cmd_train,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(_expand_config(argv))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qmcreduce: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse: --help exits 0, bad flags 2
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if args.threads is not None:
        try:
            _accel.set_threads(args.threads)
        except ValueError as exc:
            print(f"qmcreduce: error: {exc}", file=sys.stderr)
            return 2
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qmcreduce {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (QmcReduceError, ValueError, OSError, FloatingPointError, KeyError) as exc:
        print(f"qmcreduce {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
