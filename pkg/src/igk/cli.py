"""``igk`` command line: kernel, analyze, train, verify.

Exit codes: 0 success / property holds, 1 property violated,
2 usage or configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import analysis, reports
from .graph import (FAMILIES, GraphCollection, InvalidSpec, ParseError, SyntheticSpec,
                    generate_synthetic, parse_tu_dataset)
from .kernels import (DegenerateKernel, KernelSpec, gram_series, gram_series_from_sequences,
                      load_histogram_fixture, write_gram_csv)

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def _split(text):
    try:
        parts = tuple(int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"split must look like 8:1:1, got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"split must have three parts, got {text!r}")
    return parts


def _add_data_args(p):
    g = p.add_argument_group("data")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--dataset", help="directory with TU-format files")
    src.add_argument("--histograms", help="JSON fixture of explicit colour histograms")
    src.add_argument("--synthetic", choices=FAMILIES, help="generate a synthetic corpus")
    g.add_argument("--name", help="TU file prefix (default: detected from *_graph_indicator.txt)")
    g.add_argument("--sizes", default="4,5,6,7,8,9", help="comma-separated graph sizes")
    g.add_argument("--count", type=_positive_int, help="number of synthetic graphs")
    g.add_argument("--p", type=float, default=0.2, help="edge probability for random families")
    g.add_argument("--data-seed", type=int, default=0, help="seed for synthetic generation")


def _add_kernel_args(p):
    g = p.add_argument_group("kernel")
    g.add_argument("--kernel", choices=["wl-subtree", "wloa"], default="wloa")
    g.add_argument("--iterations", type=_positive_int, default=3, metavar="H")
    g.add_argument("--omega", choices=["one", "linear"], default="one")
    g.add_argument("--normalize", action="store_true")
    g.add_argument("--include-iteration-zero", action="store_true")
    g.add_argument("--no-node-labels", action="store_true", help="start WL from a uniform colour")
    g.add_argument("--threads", type=_positive_int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="igk", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with option defaults (flags override)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", help="Gram matrices per WL iteration")
    _add_data_args(p)
    _add_kernel_args(p)
    p.add_argument("--out", default="igk-out", help="output directory")

    p = sub.add_parser("analyze", help="check consistency properties of a Gram series")
    _add_data_args(p)
    _add_kernel_args(p)
    p.add_argument("--property", choices=["monotonic", "order", "wloa-bound", "margin"],
                   required=True)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--seed", type=int, default=0, help="seed for sampled triple checks")
    p.add_argument("--out", help="write the report here as well as to stdout")

    p = sub.add_parser("train", help="train the GNN with or without the consistency loss")
    _add_data_args(p)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--consistency", choices=["off", "all", "first-last"], default="all")
    p.add_argument("--paper-literal-sign", action="store_true")
    p.add_argument("--all-references", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", help="comma-separated seeds; overrides --seed")
    p.add_argument("--compare", action="store_true",
                   help="pair every run with a --consistency off baseline")
    p.add_argument("--split", type=_split, default=(8, 1, 1))
    p.add_argument("--checkpoint", help="save best weights of the (last) run here")
    p.add_argument("--out", help="write the report here as well as to stdout")

    p = sub.add_parser("verify", help="built-in self checks")
    p.add_argument("--check", choices=["counterexample", "gradients", "all"], default="all")
    p.add_argument("--out", help="write the report here as well as to stdout")
    return parser


# -- data loading ----------------------------------------------------------------

def _sizes(text):
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad --sizes {text!r}") from None


def _guess_name(directory):
    """Use the single ``<DS>_graph_indicator.txt`` prefix, else the directory name."""
    suffix = "_graph_indicator.txt"
    try:
        found = [f[:-len(suffix)] for f in os.listdir(directory) if f.endswith(suffix)]
    except OSError:
        found = []
    return found[0] if len(found) == 1 else os.path.basename(os.path.normpath(directory))


def load_collection(args) -> GraphCollection:
    if args.dataset:
        name = args.name or _guess_name(args.dataset)
        try:
            return parse_tu_dataset(args.dataset, name)
        except (ParseError, OSError) as exc:
            raise DataError(str(exc)) from None
        except ValueError as exc:
            raise DataError(str(exc)) from None
    family = args.synthetic or "cycles_vs_paths"
    try:
        spec = SyntheticSpec(family, _sizes(args.sizes), args.count, p=args.p)
        return generate_synthetic(spec, args.data_seed)
    except InvalidSpec as exc:
        raise UsageError(str(exc)) from None


def kernel_spec(args) -> KernelSpec:
    return KernelSpec(kind=args.kernel.replace("-", "_"), H=args.iterations,
                      omega="constant_one" if args.omega == "one" else "linear",
                      include_iteration_zero=args.include_iteration_zero,
                      normalized=args.normalize, use_node_labels=not args.no_node_labels)


def build_series(args, spec: KernelSpec):
    """Return (series, dataset-info) for whichever data source was given."""
    if args.histograms:
        try:
            seqs, labels, name = load_histogram_fixture(args.histograms)
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"cannot read histogram fixture: {exc}") from None
        series = gram_series_from_sequences(seqs, spec, f"histograms:{name}", labels, args.threads)
        return series, {"name": name, "fingerprint": series.fingerprint, "graphs": len(seqs)}
    collection = load_collection(args)
    series = gram_series(collection, spec, workers=args.threads)
    return series, _dataset_info(collection)


def _dataset_info(c: GraphCollection) -> dict:
    return {"name": c.name, "fingerprint": c.fingerprint(), "graphs": len(c)}


# -- commands --------------------------------------------------------------------

def cmd_kernel(args):
    spec = kernel_spec(args)
    t0 = time.perf_counter()
    series, info = build_series(args, spec)
    t1 = time.perf_counter()
    files = write_gram_csv(series, args.out, prefix=f"gram_{spec.kind}")
    results = {"gram": series.summary(), "files": [os.path.basename(f) for f in files]}
    report = reports.make_report("kernel", vars_config(args), None, info, results,
                                 {"gram": t1 - t0, "export": time.perf_counter() - t1})
    reports.write(report, os.path.join(args.out, "report.json"))
    return report, EXIT_OK


def cmd_analyze(args):
    if args.property == "wloa-bound" and args.kernel != "wloa":
        raise UsageError("wloa-bound only applies to --kernel wloa")
    args.normalize = True
    spec = kernel_spec(args)
    t0 = time.perf_counter()
    series, info = build_series(args, spec)
    t1 = time.perf_counter()
    try:
        if args.property == "monotonic":
            rep = analysis.check_monotonic_decrease(series, args.tolerance or analysis.MONOTONIC_TOL)
        elif args.property == "order":
            rep = analysis.check_order_consistency(series, args.tolerance or analysis.ORDER_TOL,
                                                   seed=args.seed)
        elif args.property == "wloa-bound":
            rep = analysis.check_wloa_bound(series, args.tolerance or analysis.MONOTONIC_TOL)
        else:
            curve = analysis.margin_curve(series)
            rep = analysis.margin_report(curve, args.tolerance or 1e-12)
    except analysis.InvalidInput as exc:
        raise UsageError(str(exc)) from None
    if args.property == "margin":
        results = {"property": "margin", "kernel": spec.kind, "H": spec.H, **curve.to_dict()}
    else:
        results = reports.violation_payload(rep)
    report = reports.make_report("analyze", vars_config(args), args.seed, info, results,
                                 {"gram": t1 - t0, "check": time.perf_counter() - t1})
    return report, EXIT_OK if rep.ok else EXIT_VIOLATION


def cmd_train(args):
    from .gnn import GnnConfig, InvalidConfig, save_weights, split_indices, train

    collection = load_collection(args)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [args.seed]
    mode = args.consistency.replace("-", "_")
    if args.lam < 0:
        raise UsageError("--lambda must be >= 0")
    runs, comparison, timings = [], [], {}
    last = None
    for seed in seeds:
        try:
            config = GnnConfig(layer_count=args.layers, hidden_dim=args.hidden,
                               learning_rate=args.lr, epochs=args.epochs,
                               batch_size=args.batch_size, seed=seed, dropout_rate=args.dropout)
            split = split_indices(len(collection), args.split, seed)
        except InvalidConfig as exc:
            raise UsageError(str(exc)) from None
        variants = [("off", 0.0)] if args.compare and mode != "off" else []
        variants.append((mode, args.lam))
        pair = {}
        for m, lam in variants:
            t0 = time.perf_counter()
            res = train(collection, split, config, m, lam, args.paper_literal_sign,
                        args.all_references)
            timings[f"seed{seed}_{m}"] = time.perf_counter() - t0
            d = res.to_dict()
            d["seed"] = seed
            runs.append(d)
            pair[m] = d
            last = res
        if len(pair) == 2:
            base, enh = pair["off"], pair[mode]
            rho_b = (base["layer_correlation"] or {}).get("overall")
            rho_e = (enh["layer_correlation"] or {}).get("overall")
            comparison.append({
                "seed": seed,
                "rho_off": rho_b, "rho_on": rho_e,
                "rho_gain": None if rho_b is None or rho_e is None else rho_e - rho_b,
                "accuracy_off": base["test_accuracy"], "accuracy_on": enh["test_accuracy"],
            })
    if args.checkpoint and last is not None:
        save_weights(args.checkpoint, last.weights)
    results = {"runs": runs}
    if comparison:
        results["comparison"] = comparison
    report = reports.make_report("train", vars_config(args), seeds, _dataset_info(collection),
                                 results, timings)
    return report, EXIT_OK


def gradient_check_error(eps: float = 1e-5, seed: int = 0) -> float:
    """Max relative error of backward vs central differences for the total
    loss (3-layer GNN, 4 synthetic graphs, lambda=1, all layer pairs)."""
    from . import autodiff as ad
    from .consistency import consistency_loss, total_loss
    from .gnn import FeatureEncoder, GnnConfig, build_batch, forward, init_weights

    col = generate_synthetic(SyntheticSpec("er_vs_ba", (6, 7, 8), count=4, p=0.4), seed)
    enc = FeatureEncoder(col.graphs)
    batch = build_batch(col.graphs, enc)
    config = GnnConfig(layer_count=3, hidden_dim=8, seed=seed)
    weights = init_weights(enc.dim, col.class_count, config, np.random.default_rng(seed))

    def loss_for(target):
        def f(x):
            ws = [x if w is target else w for w in weights]
            reps = forward(batch, ws, config)
            origin = ad.softmax_cross_entropy(reps.logits, batch.labels)
            cons = consistency_loss(reps, "all", np.random.default_rng(seed))
            return total_loss(origin, cons, 1.0)
        return f

    return max(ad.grad_check(loss_for(w), w, eps) for w in weights)


def cmd_verify(args):
    checks = {}
    timings = {}
    if args.check in ("counterexample", "all"):
        t0 = time.perf_counter()
        first, second = analysis.reproduce_counterexample()
        ok = analysis.counterexample_holds()
        checks["counterexample"] = {"values": [first, second], "expected": [0.0400, 0.0404],
                                    "tolerance": 5e-4, "passed": ok}
        timings["counterexample"] = time.perf_counter() - t0
        print(f"counterexample: ({first:.4f}, {second:.4f}) {'PASS' if ok else 'FAIL'}",
              file=sys.stderr)
    if args.check in ("gradients", "all"):
        t0 = time.perf_counter()
        err = gradient_check_error()
        ok = err < 1e-4
        checks["gradients"] = {"max_relative_error": err, "tolerance": 1e-4, "passed": ok}
        timings["gradients"] = time.perf_counter() - t0
        print(f"gradients: max relative error {err:.2e} {'PASS' if ok else 'FAIL'}",
              file=sys.stderr)
    passed = all(c["passed"] for c in checks.values())
    report = reports.make_report("verify", {"check": args.check}, None, None,
                                 {"checks": checks, "passed": passed}, timings)
    return report, EXIT_OK if passed else EXIT_VIOLATION


COMMANDS = {"kernel": cmd_kernel, "analyze": cmd_analyze, "train": cmd_train,
            "verify": cmd_verify}


def vars_config(args) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items())
            if k not in ("config", "out", "checkpoint", "threads")}


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                defaults = json.load(fh)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read --config: {exc}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(defaults) - known
        if unknown:
            parser.error(f"unknown keys in --config: {sorted(unknown)}")
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        report, code = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"igk {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DegenerateKernel) as exc:
        print(f"igk {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    text = reports.dumps(report)
    print(text)
    if getattr(args, "out", None) and args.command != "kernel":
        reports.write(report, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
