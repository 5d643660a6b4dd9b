"""Command-line front end: ``liftcodec {train,compress,decompress,evaluate,synth,plot}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .codec import CodecConfig, load_model, save_model
from .metrics import compress_samples, decompress_stream, evaluate_record
from .plot import emit_plot
from .signal_io import (
    FORMATS,
    SampleRecord,
    SynthConfig,
    load_samples,
    save_raw_f32,
    segment_array,
    split_record,
    synthesize_bearing,
)
from .training import STOP_POLICIES, TrainConfig, train_model

# flag destination -> TrainConfig field
TRAIN_FLAGS = {
    "epochs": "epochs_max",
    "batch": "batch_size",
    "lr": "learning_rate",
    "lam": "lam",
    "omega": "omega",
    "phi": "phi",
    "stop_policy": "stop_policy",
    "seed": "seed",
}


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return p


def _writable(path: str) -> Path:
    p = Path(path)
    if not p.parent.resolve().is_dir():
        raise argparse.ArgumentTypeError(f"output directory does not exist: {p.parent}")
    return p


def _key_value(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        return key.strip(), value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liftcodec", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def input_opts(p):
        p.add_argument("--input", required=True, type=_existing)
        p.add_argument("--format", choices=FORMATS, default="raw-f32-le")
        p.add_argument("--rate", type=float, default=1.0, help="sample rate in Hz (metadata only)")

    p = sub.add_parser("train", help="train a model on the leading fraction of a record")
    input_opts(p)
    p.add_argument("--out-model", required=True, type=_writable)
    p.add_argument("--log", type=_writable, help="TrainLog CSV (default: <out-model>.log.csv)")
    p.add_argument("--config", type=_existing, help="JSON file with training/codec settings")
    p.add_argument("--set", dest="overrides", action="append", type=_key_value, default=[], metavar="KEY=VALUE")
    p.add_argument("--train-fraction", type=float, default=0.2)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--phi", type=float)
    p.add_argument("--stop-policy", choices=STOP_POLICIES)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("compress", help="encode a record into an .aalw bitstream")
    input_opts(p)
    p.add_argument("--model", required=True, type=_existing)
    p.add_argument("--out", required=True, type=_writable)

    p = sub.add_parser("decompress", help="decode an .aalw bitstream to raw-f32-le samples")
    p.add_argument("--input", required=True, type=_existing)
    p.add_argument("--model", required=True, type=_existing)
    p.add_argument("--out", required=True, type=_writable)

    p = sub.add_parser("evaluate", help="report CR, PRD, PRDN, RMSE and QS for a record")
    input_opts(p)
    p.add_argument("--model", required=True, type=_existing)
    p.add_argument("--bin", type=int, default=32, help="bits per original sample for CR")
    p.add_argument("--holdout-after", type=float, metavar="FRACTION",
                   help="evaluate only the samples after this leading fraction")
    p.add_argument("--csv", type=_writable, help="also write the report as CSV")

    p = sub.add_parser("synth", help="write a synthetic bearing record as raw-f32-le")
    p.add_argument("--out", required=True, type=_writable)
    defaults = SynthConfig()
    p.add_argument("--duration", type=float, default=defaults.duration_s)
    p.add_argument("--rate", type=float, default=defaults.sample_rate_hz)
    p.add_argument("--fault-hz", type=float, default=defaults.fault_freq_hz)
    p.add_argument("--resonance-hz", type=float, default=defaults.resonance_hz)
    p.add_argument("--decay", type=float, default=defaults.ring_decay)
    p.add_argument("--noise", type=float, default=defaults.noise_std)
    p.add_argument("--amplitude", type=float, default=defaults.amplitude)
    p.add_argument("--seed", type=int, default=defaults.seed)

    p = sub.add_parser("plot", help="overlay original and reconstructed signals as SVG + CSV")
    p.add_argument("--original", required=True, type=_existing)
    p.add_argument("--reconstructed", required=True, type=_existing)
    p.add_argument("--format", choices=FORMATS, default="raw-f32-le")
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--window", type=int, default=1024, help="samples shown in the time panel")
    p.add_argument("--out", required=True, type=_writable)
    return parser


def _train_settings(args) -> tuple[TrainConfig, CodecConfig]:
    """Merge defaults < config file < --set overrides < explicit flags."""
    settings = {}
    if args.config:
        settings.update(json.loads(Path(args.config).read_text()))
    settings.update(dict(args.overrides))
    for flag, name in TRAIN_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            settings[name] = value

    train_keys = {f.name for f in fields(TrainConfig)}
    codec_keys = {f.name for f in fields(CodecConfig)}
    unknown = set(settings) - train_keys - codec_keys
    if unknown:
        raise ValueError(f"unknown setting(s): {', '.join(sorted(unknown))}")
    tcfg = TrainConfig(**{k: v for k, v in settings.items() if k in train_keys}).validate()
    ccfg = CodecConfig(**{k: v for k, v in settings.items() if k in codec_keys and k not in train_keys})
    return tcfg, ccfg


def cmd_train(args):
    tcfg, ccfg = _train_settings(args)
    record = load_samples(args.input, args.format, args.rate)
    if args.train_fraction < 1:
        record, _ = split_record(record, args.train_fraction)
    if len(record) == 0:
        raise ValueError("training fraction leaves no samples")
    model, log = train_model(segment_array(record.samples, ccfg.M), tcfg, codec=ccfg)
    save_model(args.out_model, model)
    log_path = args.log or args.out_model.with_name(args.out_model.name + ".log.csv")
    log.write_csv(log_path)
    print(f"trained {len(log.records)} epochs; final loss {log.records[-1].loss:.6g}, "
          f"nonzero fraction {log.records[-1].nonzero_fraction:.3f}; model -> {args.out_model}")


def cmd_compress(args):
    model = load_model(args.model)
    record = load_samples(args.input, args.format, args.rate)
    stream = compress_samples(record.samples, model)
    args.out.write_bytes(stream)
    print(f"{len(record)} samples -> {len(stream)} bytes")


def cmd_decompress(args):
    model = load_model(args.model)
    samples = decompress_stream(args.input.read_bytes(), model)
    save_raw_f32(args.out, samples)
    print(f"{samples.size} samples -> {args.out}")


def cmd_evaluate(args):
    model = load_model(args.model)
    record = load_samples(args.input, args.format, args.rate)
    if args.holdout_after is not None:
        _, record = split_record(record, args.holdout_after)
    report, _ = evaluate_record(record, model, bits_in=args.bin)
    sys.stdout.write(report.to_table())
    if args.csv:
        args.csv.write_text(report.to_csv())


def cmd_synth(args):
    cfg = SynthConfig(args.duration, args.rate, args.fault_hz, args.resonance_hz, args.decay,
                      args.noise, args.amplitude, args.seed)
    record = synthesize_bearing(cfg)
    save_raw_f32(args.out, record.samples)
    print(f"{len(record)} samples -> {args.out}")


def cmd_plot(args):
    original = load_samples(args.original, args.format, args.rate)
    recon = load_samples(args.reconstructed, args.format, args.rate)
    svg, table = emit_plot(original.samples, recon.samples, args.out, args.rate, args.window)
    print(f"wrote {svg} and {table}")


COMMANDS = {
    "train": cmd_train,
    "compress": cmd_compress,
    "decompress": cmd_decompress,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"liftcodec {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
