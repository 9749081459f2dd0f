"""Command-line entry point: ``biascope gen|train|bias|probe|sweep|plot``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from biascope.bias import embed_dataset, shape_bias, write_embeddings, write_report
from biascope.config import RunConfig
from biascope.diversity import run_sweep
from biascope.errors import BiascopeError, UserError
from biascope.plot import plot_file
from biascope.runtime import configure_threads
from biascope.synthgen.dataset import DatasetManifest, build_dataset, load_images
from biascope.training.loop import load_checkpoint, train
from biascope.training.metrics import write_metrics
from biascope.training.probe import linear_probe

log = logging.getLogger("biascope")

DATA_SUBDIR = "data"


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.default()
    return cfg.with_overrides(seed=args.seed, out=args.out, k=getattr(args, "k", None))


def _manifest(path, what: str) -> DatasetManifest:
    if path is None:
        raise UserError(f"no {what} given")
    p = Path(path)
    if not (p.is_file() or (p / "manifest.jsonl").is_file()):
        raise UserError(f"{what}: no manifest at {p}")
    return DatasetManifest.load(p)


def cmd_gen(args) -> int:
    cfg = _load_config(args)
    g = cfg.generator
    out = cfg.out_dir / DATA_SUBDIR
    cfg.write_effective()
    manifest = build_dataset(g["family"], g["n"], g["size"], out, g["seed"], g["classes"])
    print(out / "manifest.jsonl")
    log.info("wrote %d images", len(manifest))
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    data = args.data or cfg.train["data"] or cfg.out_dir / DATA_SUBDIR
    manifest = _manifest(data, "training data")
    cfg.write_effective()
    ckpts = train(cfg.train_config(), cfg.encoder_config(), manifest, cfg.out_dir)
    print(json.dumps({"epochs": len(ckpts), "final_loss": ckpts[-1].mean_loss, "out": str(cfg.out_dir)}))
    return 0


def _checkpoints(args, cfg: RunConfig) -> list[Path]:
    target = Path(args.checkpoint) if args.checkpoint else cfg.out_dir
    if args.all_epochs:
        if not target.is_dir():
            raise UserError(f"--all-epochs needs a checkpoint directory, got {target}")
        found = sorted(target.glob("ckpt_epoch*.bin"))
        if not found:
            raise UserError(f"no checkpoints in {target}")
        return found
    if not target.is_file():
        raise UserError("--checkpoint must name a checkpoint file (or use --all-epochs)")
    return [target]


def cmd_bias(args) -> int:
    cfg = _load_config(args)
    bench = _manifest(args.benchmark or cfg.eval["benchmark"], "benchmark")
    paths = _checkpoints(args, cfg)
    k = cfg.eval["k"]
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    cfg.write_effective()
    images = None
    rows, reports = [], []
    for path in paths:
        ckpt = load_checkpoint(path)
        if images is None:
            images = load_images(bench, ckpt.encoder_config.channels)
        emb = embed_dataset(ckpt, bench, images)
        emb.source["checkpoint"] = path.name
        report = shape_bias(emb, k)
        tag = f"epoch{ckpt.epoch:03d}"
        write_embeddings(out / f"embeddings_{tag}.emb", emb)
        write_report(out / f"bias_{tag}.json", report)
        reports.append(report.to_json())
        rows += [
            (ckpt.epoch, "bias", "bias", report.bias),
            (ckpt.epoch, "bias", "shape_correct", report.shape_correct),
            (ckpt.epoch, "bias", "texture_correct", report.texture_correct),
        ]
    write_metrics(out / "metrics.csv", rows, {"bias"})
    print(json.dumps(reports[0] if len(reports) == 1 else reports, sort_keys=True))
    return 0


def cmd_probe(args) -> int:
    cfg = _load_config(args)
    data = _manifest(args.data or cfg.eval["probe_data"], "probe data")
    paths = _checkpoints(args, cfg)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    cfg.write_effective()
    rows, results = [], []
    for path in paths:
        ckpt = load_checkpoint(path)
        res = linear_probe(ckpt, data, cfg.eval["probe_epochs"], cfg.train_config())
        obj = {"checkpoint": path.name, "epoch": ckpt.epoch, **vars(res)}
        (out / f"probe_epoch{ckpt.epoch:03d}.json").write_text(
            json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8"
        )
        results.append(obj)
        rows.append((ckpt.epoch, "probe", "accuracy", res.accuracy))
    write_metrics(out / "metrics.csv", rows, {"probe"})
    print(json.dumps(results[0] if len(results) == 1 else results, sort_keys=True))
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    data = args.data or cfg.sweep["data"] or cfg.train["data"] or cfg.out_dir / DATA_SUBDIR
    manifest = _manifest(data, "training data")
    bench = _manifest(args.benchmark or cfg.eval["benchmark"], "benchmark")
    cfg.write_effective()
    report = run_sweep(cfg.sweep_config(), cfg.encoder_config(), manifest, bench, cfg.out_dir)
    print(json.dumps(report.to_json(), sort_keys=True))
    return 0


def cmd_plot(args) -> int:
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    plot_file(args.input, out, args.metric)
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biascope", description="Shape-bias and dataset-diversity experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, k=False):
        p.add_argument("--config", metavar="PATH", help="RunConfig JSON (defaults apply to missing keys)")
        p.add_argument("--seed", type=int, metavar="U64", help="override every seed in the config")
        p.add_argument("--out", metavar="DIR", help="override output.dir")
        if k:
            p.add_argument("--k", type=int, metavar="N", help="override eval.k (neighbours)")

    p = sub.add_parser("gen", help="build a dataset into OUT/data")
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train an encoder; checkpoints and metrics.csv go to OUT")
    common(p)
    p.add_argument("--data", metavar="PATH", help="training manifest (default train.data, then OUT/data)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bias", help="K-NN shape bias of one checkpoint or every epoch")
    common(p, k=True)
    p.add_argument("--checkpoint", metavar="PATH", help="checkpoint file, or directory with --all-epochs")
    p.add_argument("--benchmark", metavar="PATH", help="dual-labelled manifest (default eval.benchmark)")
    p.add_argument("--all-epochs", action="store_true", help="evaluate every ckpt_epoch*.bin in the directory")
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("probe", help="linear probe on frozen features")
    common(p)
    p.add_argument("--checkpoint", metavar="PATH", help="checkpoint file, or directory with --all-epochs")
    p.add_argument("--data", metavar="PATH", help="labelled manifest (default eval.probe_data)")
    p.add_argument("--all-epochs", action="store_true", help="probe every ckpt_epoch*.bin in the directory")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("sweep", help="dataset-fraction sweep and diversity score")
    common(p, k=True)
    p.add_argument("--data", metavar="PATH", help="training manifest (default sweep.data, train.data, OUT/data)")
    p.add_argument("--benchmark", metavar="PATH", help="dual-labelled manifest (default eval.benchmark)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render metrics.csv or a sweep report as SVG")
    p.add_argument("input", help="metrics.csv or sweep_report.json")
    p.add_argument("output", help="destination .svg")
    p.add_argument("--metric", help="only plot metrics whose name contains this string")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    configure_threads()
    try:
        return args.func(args)
    except BiascopeError as exc:
        err = {"error": exc.code, "message": str(exc), "exit_code": exc.exit_code}
        code = exc.exit_code
    except Exception as exc:  # noqa: BLE001 - everything else is an internal error
        err = {"error": "InternalError", "message": f"{type(exc).__name__}: {exc}", "exit_code": 1}
        code = 1
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
