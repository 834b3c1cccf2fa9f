"""Command-line entry point.

Subcommands cover the full pipeline: gen-synth, extract, train, evaluate,
crossval, compare, serve, simulate-device, report. Every subcommand takes
--seed and echoes its resolved configuration as a JSON line to stdout
before doing any work, so artifacts are traceable to exact settings.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import audio, features, synth
from .errors import (
    CheckpointError,
    InvalidDatasetError,
    ProtocolError,
    ServerStartupError,
    TrainingDivergedError,
    TransportError,
    UnsupportedWavError,
    WavFormatError,
    WoodwatchError,
)
from .evaluation import (
    comparative_report,
    confusion_from_predictions,
    crossval_run,
    metrics_from_confusion,
)
from .ingest import query_store, serve, simulate_device
from .models import ModelKind, TrainConfig, build_model, model_inputs, predict, train
from .nn import load_checkpoint, save_checkpoint

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

_DATA_ERRORS = (
    WavFormatError,
    UnsupportedWavError,
    InvalidDatasetError,
    CheckpointError,
    ProtocolError,
    FileNotFoundError,
    IsADirectoryError,
    json.JSONDecodeError,
    KeyError,
    ValueError,
)
_RUNTIME_ERRORS = (TrainingDivergedError, ServerStartupError, TransportError, OSError)


class _Parser(argparse.ArgumentParser):
    """argparse counts usage problems as exit 2 by default; the contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _echo_config(command: str, args: argparse.Namespace) -> None:
    resolved = {"command": command}
    resolved.update({k: v for k, v in sorted(vars(args).items()) if k != "func"})
    print(json.dumps(resolved, default=str))


def _print_json(payload: dict) -> None:
    print(json.dumps(payload))


# --------------------------------------------------------------------------
# subcommand implementations

def _cmd_gen_synth(args) -> int:
    cfg = synth.SynthConfig(
        sample_rate=args.sample_rate,
        duration_s=args.duration_s,
        click_rate=args.click_rate,
        band_low_hz=args.band_low_hz,
        band_high_hz=args.band_high_hz,
        click_decay_s=args.click_decay_s,
        snr_db=args.snr_db,
        seed=args.seed,
    )
    manifest = synth.gen_dataset(args.out, args.n, cfg)
    _print_json({"written": len(manifest["clips"]), "out": str(args.out)})
    return EXIT_OK


def _cmd_extract(args) -> int:
    dataset = Path(args.dataset)
    if not dataset.is_dir():
        raise InvalidDatasetError(f"{dataset} is not a directory")
    wavs = sorted(dataset.glob("*/*.wav")) + sorted(dataset.glob("*.wav"))
    if not wavs:
        raise InvalidDatasetError(f"no WAV files under {dataset}")
    cfg = features.FeatureConfig()
    ids, labels, matrices = [], [], []
    for wav_path in wavs:
        clip = audio.load_wav(wav_path)
        clip = audio.resample_linear(clip, audio.CANONICAL_RATE)
        segments = audio.segment_clip(clip, args.clip_seconds)
        parent = wav_path.parent.name
        label = int(audio.ClipLabel.from_name(parent)) if parent in ("clean", "infested") else -1
        for k, segment in enumerate(segments):
            suffix = f"#{k}" if len(segments) > 1 else ""
            ids.append(str(wav_path.relative_to(dataset)) + suffix)
            labels.append(label)
            matrices.append(features.mfcc_frames(segment, cfg).values)
    feature_set = features.FeatureSet(ids, np.asarray(labels), np.stack(matrices), cfg)
    features.save_features(args.out, feature_set)
    _print_json({"clips": len(feature_set), "frames": int(feature_set.matrices.shape[1]), "out": str(args.out)})
    return EXIT_OK


def _require_labels(feature_set: features.FeatureSet) -> None:
    if np.any(feature_set.labels < 0):
        raise InvalidDatasetError("feature dump contains unlabeled clips")


def _cmd_train(args) -> int:
    from .evaluation import stratified_split

    feature_set = features.load_features(args.features)
    _require_labels(feature_set)
    kind = ModelKind(args.kind)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
    train_idx, val_idx = stratified_split(feature_set.labels, ratio=args.val_ratio, seed=args.seed)
    inputs, stats = model_inputs(kind, feature_set, train_idx)
    graph = build_model(kind, seed=args.seed)
    history = train(graph, inputs[train_idx], feature_set.labels[train_idx],
                    inputs[val_idx], feature_set.labels[val_idx], cfg)
    save_checkpoint(args.out_checkpoint, graph, kind.value, args.seed,
                    feature_stats=stats.to_dict() if stats else None,
                    feature_config=feature_set.config.to_dict())
    history_path = args.out_history or f"{args.out_checkpoint}.history.json"
    Path(history_path).write_text(json.dumps(history.to_dict()))
    _print_json({
        "checkpoint": str(args.out_checkpoint),
        "final_train_accuracy": history.train_accuracy[-1],
        "final_val_accuracy": history.val_accuracy[-1],
    })
    return EXIT_OK


def _labels_from_any(values) -> np.ndarray:
    out = []
    for v in values:
        if isinstance(v, str):
            out.append(int(audio.ClipLabel.from_name(v)))
        else:
            out.append(int(v))
    return np.asarray(out)


def _cmd_evaluate(args) -> int:
    if bool(args.predictions) == bool(args.checkpoint):
        raise ValueError("provide exactly one of --predictions or --checkpoint/--features")
    if args.predictions:
        payload = json.loads(Path(args.predictions).read_text())
        true_labels = _labels_from_any(payload["true_labels"])
        predicted = _labels_from_any(payload["predicted_labels"])
    else:
        if not args.features:
            raise ValueError("--checkpoint requires --features")
        checkpoint = load_checkpoint(args.checkpoint)
        feature_set = features.load_features(args.features)
        _require_labels(feature_set)
        kind = ModelKind(checkpoint.kind)
        if kind is ModelKind.DNN_MEAN:
            x = feature_set.mean_vectors
        else:
            if checkpoint.feature_stats is None:
                raise CheckpointError(f"{args.checkpoint}: missing standardization stats")
            stats = features.StandardizeStats.from_dict(checkpoint.feature_stats)
            x = features.apply_standardize(feature_set.matrices, stats)
        true_labels = feature_set.labels
        _, predicted = predict(checkpoint.graph, x)
    confusion = confusion_from_predictions(true_labels, predicted)
    report = metrics_from_confusion(confusion)
    if args.out_report:
        Path(args.out_report).write_text(json.dumps({
            "metrics": report.to_dict(), "confusion": confusion.to_dict(),
        }))
    if args.out_confusion:
        Path(args.out_confusion).write_text(confusion.to_csv())
    _print_json({"metrics": report.to_dict(), "confusion": confusion.to_dict()})
    return EXIT_OK


def _cmd_crossval(args) -> int:
    feature_set = features.load_features(args.features)
    _require_labels(feature_set)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
    report = crossval_run(ModelKind(args.kind), feature_set, k=args.k, seed=args.seed, cfg=cfg)
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict()))
    _print_json(report.to_dict())
    return EXIT_OK


def _cmd_compare(args) -> int:
    feature_set = features.load_features(args.features)
    _require_labels(feature_set)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
    report = comparative_report(feature_set, seed=args.seed, cfg=cfg, ratio=args.test_ratio)
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict()))
    if args.out_table:
        Path(args.out_table).write_text(report.format_table())
    print(report.format_table(), end="")
    _print_json(report.to_dict())
    return EXIT_OK


def _cmd_serve(args) -> int:
    serve(args.port, args.checkpoint, args.store, archive_dir=args.archive_dir,
          clip_seconds=args.clip_seconds, host=args.host)
    return EXIT_OK


def _cmd_simulate_device(args) -> int:
    if bool(args.wav) == bool(args.synth):
        raise ValueError("provide exactly one of --wav or --synth")
    if args.wav:
        source = args.wav
    else:
        cfg = synth.SynthConfig(snr_db=args.snr_db)
        generate = synth.gen_clean_clip if args.synth == "clean" else synth.gen_infested_clip
        source = generate(cfg, args.seed)
    sent = simulate_device(args.host, args.port, source, args.device_id,
                           frame_samples=args.frame_samples, realtime=args.realtime)
    _print_json({"frames_sent": sent})
    return EXIT_OK


def _cmd_report(args) -> int:
    records = query_store(args.store, device_id=args.device, label=args.label,
                          since=args.since, until=args.until)
    _print_json({"count": len(records), "records": [asdict(r) for r in records]})
    return EXIT_OK


# --------------------------------------------------------------------------
# parser wiring

def build_parser() -> _Parser:
    parser = _Parser(prog="woodwatch",
                     description="Acoustic wood-pest detection pipeline")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--seed", type=int, default=0, help="master random seed")
        p.set_defaults(func=func)
        return p

    p = add("gen-synth", _cmd_gen_synth, "generate a labeled synthetic WAV dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--n", type=int, default=100, help="clips per class")
    p.add_argument("--sample-rate", type=int, default=16000)
    p.add_argument("--duration-s", type=float, default=5.0)
    p.add_argument("--click-rate", type=float, default=8.0)
    p.add_argument("--band-low-hz", type=float, default=3000.0)
    p.add_argument("--band-high-hz", type=float, default=6000.0)
    p.add_argument("--click-decay-s", type=float, default=0.005)
    p.add_argument("--snr-db", type=float, default=10.0)

    p = add("extract", _cmd_extract, "extract MFCC features from a WAV directory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="feature dump path (JSON)")
    p.add_argument("--clip-seconds", type=float, default=5.0)

    p = add("train", _cmd_train, "train one model kind on a feature dump")
    p.add_argument("--features", required=True)
    p.add_argument("--kind", required=True, choices=[k.value for k in ModelKind])
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--val-ratio", type=float, default=0.2)
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--out-history", default=None,
                   help="history JSON path (default: <checkpoint>.history.json)")

    p = add("evaluate", _cmd_evaluate, "metrics from a checkpoint or a prediction file")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--features", default=None)
    p.add_argument("--predictions", default=None,
                   help="JSON file with true_labels and predicted_labels")
    p.add_argument("--out-report", default=None)
    p.add_argument("--out-confusion", default=None, help="2x2 CSV path")

    p = add("crossval", _cmd_crossval, "stratified k-fold cross-validation")
    p.add_argument("--features", required=True)
    p.add_argument("--kind", required=True, choices=[k.value for k in ModelKind])
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--out", default=None)

    p = add("compare", _cmd_compare, "train all four kinds on one split and tabulate")
    p.add_argument("--features", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--test-ratio", type=float, default=0.2)
    p.add_argument("--out", default=None)
    p.add_argument("--out-table", default=None)

    p = add("serve", _cmd_serve, "run the ingestion server")
    p.add_argument("--port", type=int, default=7071)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--store", required=True, help="JSON-lines detection store")
    p.add_argument("--archive-dir", default=None, help="optional WAV archive directory")
    p.add_argument("--clip-seconds", type=float, default=5.0)

    p = add("simulate-device", _cmd_simulate_device, "stream audio to the server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--device-id", type=int, default=1)
    p.add_argument("--wav", default=None, help="stream this WAV file")
    p.add_argument("--synth", default=None, choices=["clean", "infested"],
                   help="stream a synthetic clip instead of a file")
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--frame-samples", type=int, default=2500)
    p.add_argument("--realtime", action="store_true")

    p = add("report", _cmd_report, "query the detection store")
    p.add_argument("--store", required=True)
    p.add_argument("--device", type=int, default=None)
    p.add_argument("--label", default=None, choices=["clean", "infested"])
    p.add_argument("--since", default=None, help="ISO-8601 lower bound")
    p.add_argument("--until", default=None, help="ISO-8601 upper bound")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _echo_config(args.command, args)
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        # checked first: FileNotFoundError is an OSError but counts as bad data
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except WoodwatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
