"""Command-line surface: train, baseline, homophily, gen-synth, convert,
gradcheck, embed."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

log = logging.getLogger("grain")


def _setup_logging() -> None:
    level = os.environ.get("GRAIN_LOG", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        level = "info"
    logging.basicConfig(stream=sys.stderr, level=levels[level],
                        format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grain",
        description="Granularity-adaptive graph node classification.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True, out=True):
        if data:
            p.add_argument("--data", required=True, help="dataset directory")
        p.add_argument("--config", help="config file of `key = value` lines")
        p.add_argument("--seed", type=int, help="override the config seed")
        if out:
            p.add_argument("--out", default="grain_out", help="output directory")

    common(sub.add_parser("train", help="full pipeline: policy, classifier, baselines"))
    common(sub.add_parser("baseline", help="train only the GCN/MLP baselines"))
    common(sub.add_parser("embed", help="train the classifier and dump a 2-D embedding"))

    p = sub.add_parser("homophily", help="print the edge homophily of a dataset")
    common(p, out=False)

    p = sub.add_parser("gen-synth", help="generate a synthetic dataset directory")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--h", type=float, required=True, help="target edge homophily")
    p.add_argument("--avg-degree", type=float, default=10.0)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--sep", type=float, default=1.5, help="class mean separation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("convert", help="convert content/cites citation files")
    p.add_argument("--content", required=True)
    p.add_argument("--cites", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=50)
    return parser


def _load_config(args):
    from .config import TrainConfig, load_config

    config = load_config(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        config.seed = args.seed
    config.validate()
    return config


def _load_data(args):
    from .data import load_dataset

    split_seed = args.seed if getattr(args, "seed", None) is not None else 0
    return load_dataset(args.data, split_seed=split_seed)


def _cmd_train(args) -> int:
    from .trainer import emit_report, run_full

    config = _load_config(args)
    dataset = _load_data(args)
    log.info("loaded %s: n=%d d=%d C=%d", dataset.name, dataset.n_nodes,
             dataset.feature_dim, dataset.n_classes)
    report, _, _, embedding = run_full(dataset, config, with_baselines=True)
    files = emit_report(report, args.out, embedding, dataset.labels)
    for f in files:
        log.info("wrote %s", f)
    print(f"grain test accuracy: {report['grain']['test_accuracy']:.4f}")
    for variant in ("gcn", "mlp"):
        if variant in report:
            print(f"{variant} test accuracy: {report[variant]['test_accuracy']:.4f}")
    print(f"report: {Path(args.out) / 'report.json'}")
    return 0


def _cmd_baseline(args) -> int:
    import time

    from .config import to_flat_dict
    from .graph import edge_homophily
    from .trainer import _phase_metrics, emit_report, run_baselines

    config = _load_config(args)
    dataset = _load_data(args)
    started = time.perf_counter()
    results = run_baselines(dataset, config)
    report = {
        "dataset": dataset.name,
        "homophily": edge_homophily(dataset.graph, dataset.labels),
        "seed": config.seed,
        "splits_source": dataset.splits_source,
        "config": to_flat_dict(config),
        "curves": {},
        "wall_clock_seconds": time.perf_counter() - started,
    }
    for variant, fit in results.items():
        report[variant] = _phase_metrics(fit)
        report["curves"][f"{variant}_train_loss"] = [float(x) for x in fit.train_losses]
        report["curves"][f"{variant}_val_accuracy"] = [float(x) for x in fit.val_curve]
        print(f"{variant} test accuracy: {report[variant]['test_accuracy']:.4f}")
    emit_report(report, args.out)
    return 0


def _cmd_embed(args) -> int:
    from .trainer import emit_report, run_full

    config = _load_config(args)
    dataset = _load_data(args)
    report, _, _, embedding = run_full(dataset, config, with_baselines=False)
    emit_report(report, args.out, embedding, dataset.labels)
    print(f"embedding: {Path(args.out) / 'embedding.tsv'}")
    return 0


def _cmd_homophily(args) -> int:
    from .graph import edge_homophily

    dataset = _load_data(args)
    print(f"{edge_homophily(dataset.graph, dataset.labels):.4f}")
    return 0


def _cmd_gen_synth(args) -> int:
    from .data import save_dataset
    from .synth import SynthConfig, generate_synthetic

    config = SynthConfig(n=args.n, n_classes=args.classes, h_target=args.h,
                         avg_degree=args.avg_degree, feature_dim=args.dim,
                         class_separation=args.sep, seed=args.seed)
    dataset = generate_synthetic(config)
    out = save_dataset(dataset, args.out)
    print(out)
    return 0


def _cmd_convert(args) -> int:
    from .data import convert_content_cites

    stats = convert_content_cites(args.content, args.cites, args.out)
    print(f"nodes: {stats['n_nodes']}  classes: {stats['n_classes']}  "
          f"edges: {stats['n_cite_lines']}  dropped: {stats['dropped_cites']}")
    return 0


def _cmd_gradcheck(args) -> int:
    from .gradcheck import TOLERANCES, run_suite

    results = run_suite(instances=args.instances, seed=args.seed)
    failed = []
    for name, err in results.items():
        ok = err < TOLERANCES[name]
        print(f"{name:24s} max_rel_err={err:.3e}  {'ok' if ok else 'FAIL'}")
        if not ok:
            failed.append(name)
    if failed:
        raise FloatingPointError(f"gradient check failed for: {', '.join(failed)}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "baseline": _cmd_baseline,
    "embed": _cmd_embed,
    "homophily": _cmd_homophily,
    "gen-synth": _cmd_gen_synth,
    "convert": _cmd_convert,
    "gradcheck": _cmd_gradcheck,
}


def main(argv=None) -> int:
    _setup_logging()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # one machine-parseable line, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
