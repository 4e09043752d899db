"""Command-line interface.

Every subcommand that fits a model writes an ExperimentReport; ``contract``,
``inspect`` and ``tensorize`` write one when ``--report`` is given.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import io
from .als import AlsConfig, LossSpec, ObservationSet
from .baselines import MODELS, RankSweepSpec, rank_sweep
from .network import edge_list, evaluate, param_count
from .search import GreedyConfig, greedy_search
from .transfer import SliceInitPolicy


class CliError(Exception):
    pass


def _rank_range(text: str) -> tuple[int, int]:
    try:
        a, b = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b, got {text!r}") from None
    return a, b


def _dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(v) for v in text.replace("x", ",").split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected dims like 8,8,8 or 8x8x8, got {text!r}") from None
    if not dims or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"dims must be positive, got {text!r}")
    return dims


def _fraction(text: str) -> float:
    f = float(text)
    if not 0 < f <= 1:
        raise argparse.ArgumentTypeError(f"fraction must be in (0, 1], got {text}")
    return f


def _add_search_flags(p: argparse.ArgumentParser, search_iters: int):
    p.add_argument("--loss-threshold", type=float, default=None,
                   help="stop once the relative error on fitted entries is below this")
    p.add_argument("--max-params", type=int, required=True)
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--edge-search-iters", type=int, default=search_iters)
    p.add_argument("--split-threshold", type=float, default=1e-5)
    p.add_argument("--slice-sigma", type=float, default=1e-3,
                   help="half-width of the new-slice noise; 0 pads with zeros")
    p.add_argument("--no-split", action="store_true")
    p.add_argument("--no-transfer", action="store_true")
    p.add_argument("--random-walk", action="store_true")
    p.add_argument("--constrain", choices=("tt", "tr"), default=None,
                   help="only grow edges of a chain (tt) or cycle (tr)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save-network", metavar="TNET", default=None)
    p.add_argument("--report", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greedy-tn", description="Greedy tensor network structure learning."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="fit a full target tensor")
    p.add_argument("--target", required=True, metavar="TNSR")
    _add_search_flags(p, search_iters=2)

    p = sub.add_parser("complete", help="fit observed entries of a tensor")
    p.add_argument("--observations", required=True, metavar="TNSR",
                   help="full tensor (with --mask-fraction) or observed values (with --indices)")
    p.add_argument("--mask-fraction", type=_fraction, default=None)
    p.add_argument("--indices", metavar="TNSR", default=None,
                   help="n x p array of observed multi-indices")
    p.add_argument("--dims", type=_dims, default=None)
    _add_search_flags(p, search_iters=10)

    p = sub.add_parser("baseline", help="uniform-rank TT/TR/Tucker sweep")
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--rank-range", type=_rank_range, default=(1, 50))
    p.add_argument("--param-cap", type=int, default=25_000)
    p.add_argument("--target", metavar="TNSR", default=None)
    p.add_argument("--observations", metavar="TNSR", default=None)
    p.add_argument("--mask-fraction", type=_fraction, default=None)
    p.add_argument("--indices", metavar="TNSR", default=None)
    p.add_argument("--dims", type=_dims, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", required=True)

    p = sub.add_parser("contract", help="evaluate a network to a dense tensor")
    p.add_argument("--network", required=True, metavar="TNET")
    p.add_argument("--out", required=True, metavar="TNSR")
    p.add_argument("--report", default=None)

    p = sub.add_parser("inspect", help="print structure, ranks and parameter count")
    p.add_argument("--network", required=True, metavar="TNET")
    p.add_argument("--report", default=None)

    p = sub.add_parser("tensorize", help="reshape an image into a higher-order tensor")
    p.add_argument("--image", required=True, metavar="TNSR")
    p.add_argument("--preset", required=True,
                   help="einstein, live4x8 or custom:<f1>x<f2>.../<g1>x<g2>...")
    p.add_argument("--out", required=True, metavar="TNSR")
    p.add_argument("--report", default=None)

    p = sub.add_parser("plot", help="print the loss-vs-parameters curve of a report")
    p.add_argument("--report", required=True)
    p.add_argument("--csv", default=None, help="also write the curve as CSV")
    return parser


def _read_tensor(path):
    try:
        return io.read_tensor(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    except io.FormatError as exc:
        raise CliError(f"{path}: {exc}") from None


def _observations(args):
    """Return (observed, held-out or None) from the completion flags."""
    values = _read_tensor(args.observations)
    if args.indices is not None:
        if args.mask_fraction is not None:
            raise CliError("use either --indices or --mask-fraction, not both")
        if args.dims is None:
            raise CliError("--indices needs --dims")
        idx = _read_tensor(args.indices)
        if idx.ndim != 2 or idx.shape[1] != len(args.dims) or idx.shape[0] != values.size:
            raise CliError(
                f"indices shape {idx.shape} does not match {values.size} values of order {len(args.dims)}"
            )
        if not np.array_equal(idx, np.round(idx)):
            raise CliError("indices must be integers")
        return ObservationSet(idx.astype(np.int64), values.ravel(), args.dims), None
    if args.mask_fraction is None:
        raise CliError("give --mask-fraction with a full tensor, or --indices and --dims")
    if args.dims is not None and tuple(args.dims) != values.shape:
        raise CliError(f"--dims {args.dims} does not match tensor shape {values.shape}")
    return io.split_observations(values, args.mask_fraction, args.seed)


def _chain(p: int, cycle: bool):
    edges = [(k, k + 1) for k in range(p - 1)]
    if cycle and p > 2:
        edges.append((0, p - 1))
    return tuple(edges)


def _greedy_config(args, spec: LossSpec) -> GreedyConfig:
    threshold = None
    if args.loss_threshold is not None:
        threshold = spec.loss_for_relative_error(args.loss_threshold)
    if args.slice_sigma > 0:
        policy = SliceInitPolicy("uniform", args.slice_sigma)
    else:
        policy = SliceInitPolicy.zeros()
    whitelist = None
    if args.constrain:
        whitelist = _chain(len(spec.dims), args.constrain == "tr")
    return GreedyConfig(
        max_params=args.max_params,
        loss_threshold=threshold,
        max_iterations=args.max_iterations,
        edge_search_iters=args.edge_search_iters,
        split_threshold=args.split_threshold,
        slice_policy=policy,
        edge_whitelist=whitelist,
        enable_split=not args.no_split and not args.constrain,
        transfer_weights=not args.no_transfer,
        random_walk=args.random_walk,
        rng_seed=args.seed,
    )


def _run_search(args, spec, holdout):
    config = _greedy_config(args, spec)
    echo = {"args": _echo(args), "greedy": io.greedy_config_to_dict(config)}
    net, trace = greedy_search(spec.dims, spec, config, holdout=holdout)
    report = io.ExperimentReport.from_search(args.command, echo, trace, net)
    report.write(args.report)
    if args.save_network:
        io.write_network(args.save_network, net)
    last = trace.records[-1]
    line = f"{trace.status}: params {last.params}, relative error {last.rel_error:.3e}"
    if last.test_error is not None:
        line += f", held-out error {last.test_error:.3e}"
    print(line)
    return 0


def _echo(args) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items()}


def cmd_decompose(args):
    target = _read_tensor(args.target)
    return _run_search(args, LossSpec.full(target), None)


def cmd_complete(args):
    observed, holdout = _observations(args)
    return _run_search(args, LossSpec.masked(observed), holdout)


def cmd_baseline(args):
    holdout = None
    if args.target is not None:
        if args.observations is not None:
            raise CliError("use either --target or --observations")
        spec = LossSpec.full(_read_tensor(args.target))
    elif args.observations is not None:
        observed, holdout = _observations(args)
        spec = LossSpec.masked(observed)
    else:
        raise CliError("baseline needs --target or --observations")
    a, b = args.rank_range
    try:
        sweep = RankSweepSpec(args.model, a, b, args.param_cap)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    curve = rank_sweep(sweep, spec, AlsConfig(), rng_seed=args.seed, holdout=holdout)
    rows = [vars(pt) for pt in curve]
    status = "ok" if curve else "budget-exhausted"
    report = io.ExperimentReport(args.command, {"args": _echo(args)}, rows, {}, status)
    report.write(args.report)
    for pt in curve:
        extra = f"  held-out {pt.test_error:.3e}" if pt.test_error is not None else ""
        print(f"rank {pt.rank:3d}  params {pt.params:7d}  relative error {pt.rel_error:.3e}{extra}")
    return 0


def _read_network(path):
    try:
        return io.read_network(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    except (io.FormatError, ValueError) as exc:
        raise CliError(f"{path}: {exc}") from None


def cmd_contract(args):
    net = _read_network(args.network)
    io.write_tensor(args.out, evaluate(net))
    if args.report:
        io.ExperimentReport(args.command, {"args": _echo(args)}, [], io.structure_of(net)).write(
            args.report
        )
    print(f"wrote tensor of shape {net.dims} to {args.out}")
    return 0


def cmd_inspect(args):
    net = _read_network(args.network)
    print(f"nodes: {net.p}")
    print(f"dims: {' '.join(str(d) for d in net.dims)}")
    print("edges:")
    for i, j, r in edge_list(net):
        print(f"  {i} - {j}: rank {r}")
    print(f"params: {param_count(net)}")
    if args.report:
        io.ExperimentReport(args.command, {"args": _echo(args)}, [], io.structure_of(net)).write(
            args.report
        )
    return 0


def cmd_tensorize(args):
    img = _read_tensor(args.image)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[..., 0]
    try:
        rows, cols, interleave = io.parse_preset(args.preset)
        t = io.tensorize_image(img, rows, cols, interleave)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    io.write_tensor(args.out, t)
    if args.report:
        io.ExperimentReport(args.command, {"args": _echo(args)}, [], {"dims": list(t.shape)}).write(
            args.report
        )
    print(f"wrote tensor of shape {t.shape} to {args.out}")
    return 0


def cmd_plot(args):
    try:
        report = io.ExperimentReport.read(args.report)
    except OSError as exc:
        raise CliError(f"cannot read {args.report}: {exc.strerror}") from None
    except ValueError as exc:
        raise CliError(f"{args.report}: {exc}") from None
    cols = ["params", "rel_error", "test_error"]
    lines = [",".join(cols)]
    for row in report.rows:
        lines.append(",".join("" if row.get(c) is None else str(row.get(c)) for c in cols))
    print(f"{report.command} ({report.status})")
    for row in report.rows:
        err = row.get("rel_error")
        bar = "#" * max(0, min(60, int(round(-10 * np.log10(err))))) if err else ""
        print(f"{row.get('params', 0):8d}  {err:.3e}  {bar}")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


COMMANDS = {
    "decompose": cmd_decompose,
    "complete": cmd_complete,
    "baseline": cmd_baseline,
    "contract": cmd_contract,
    "inspect": cmd_inspect,
    "tensorize": cmd_tensorize,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
