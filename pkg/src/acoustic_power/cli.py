"""Command-line entry point: ``acoustic-power <subcommand> ...``.

Subcommands: synth, extract, train, eval, predict, experiment-matrix.
Exit status is 0 on success, 2 on usage errors and the ``exit_code`` of the
raised error family otherwise (see ``acoustic_power.errors``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import audio_io, evaluation, labeling, spectral, synth
from .errors import AcousticPowerError, InvalidInputError
from .evaluation import PipelineConfig, SplitSpec
from .mlp import TrainConfig, load_model, save_model

log = logging.getLogger("acoustic_power")

SEED_ENV = "ACOUSTIC_POWER_SEED"
IO_ERROR_EXIT = 12


def default_seed() -> int:
    try:
        return int(os.environ.get(SEED_ENV, "0"))
    except ValueError:
        return 0


def _pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LOW:HIGH, got {text!r}") from None
    return lo, hi


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# --------------------------------------------------------------------------
# argument groups

def _add_feature_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--approach", choices=spectral.APPROACHES, default="reduced",
                   help="full in-band DFT components or max-binned sub-regions (default: reduced)")
    p.add_argument("--band", default="166:700", help="fan band LOW:HIGH in Hz (default: 166:700)")
    p.add_argument("--bin-width", type=float, default=15.0, help="sub-region width in Hz (default: 15)")
    p.add_argument("--taper", action="store_true", help="apply a Hann taper before the DFT")


def _add_input_args(p: argparse.ArgumentParser, csv_required: bool) -> None:
    p.add_argument("--wav", required=True, help="mono 16-bit PCM or 32-bit float WAV")
    p.add_argument("--power-csv", required=csv_required, help="power log: timestamp_s,watts or watts")
    p.add_argument("--csv-interval", type=float, default=None,
                   help="reading interval for single-column power logs (default: 20 s)")
    p.add_argument("--offset-s", type=float, default=0.0,
                   help="recording time at which the first power interval starts")


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--goal-error", type=float, default=1e-4)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--init-range", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=None,
                   help=f"seeds weight init and the split (default: ${SEED_ENV} or 0)")
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--stratified", action="store_true", help="stratify the split by class")
    p.add_argument("--bounds", choices=evaluation.BOUNDS_POLICIES, default="global",
                   help="class cut policy: global min/max, training rows only, or quartiles")


def _add_synth_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--segments", type=int, default=None)
    p.add_argument("--segment-s", type=float, default=None, help="segment length in seconds (default: 20)")
    p.add_argument("--sample-rate", type=int, default=None, help="Hz (default: 16000)")
    p.add_argument("--blades", type=int, default=None)
    p.add_argument("--rpm-range", type=_pair, default=None, help="MIN:MAX (default: 2000:6000)")
    p.add_argument("--power-range", type=_pair, default=None, help="MIN:MAX watts (default: 100:180)")
    p.add_argument("--harmonics", type=int, default=None)
    p.add_argument("--ac-level", type=float, default=None)
    p.add_argument("--noise-level", type=float, default=None)
    p.add_argument("--pattern", choices=("levels", "random-walk"), default=None)
    p.add_argument("--shares", type=_floats, default=None, help="per-level shares, e.g. 0.3,0.05,0.3,0.35")
    p.add_argument("--extra-tenant", action="store_true", help="add a fixed-speed interfering fan")
    p.add_argument("--tenant-rpm", type=float, default=3300.0)
    p.add_argument("--tenant-blades", type=int, default=7)
    p.add_argument("--tenant-level", type=float, default=0.8)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acoustic-power",
        description="Estimate a server's power class from its cooling-fan noise.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic recording and power log")
    _add_synth_args(p)
    p.add_argument("--config", help="JSON scenario file; explicit flags override it")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--encoding", choices=("pcm16", "float32"), default="pcm16")
    p.add_argument("--out-prefix", default="synth", help="writes PREFIX.wav, PREFIX.csv, PREFIX.json")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="dump per-segment feature vectors as CSV")
    _add_input_args(p, csv_required=False)
    _add_feature_args(p)
    p.add_argument("--segment-s", type=float, default=20.0, help="used when no power log is given")
    p.add_argument("--out", required=True, help="feature CSV path")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a classifier and save the model")
    _add_input_args(p, csv_required=True)
    _add_feature_args(p)
    _add_train_args(p)
    p.add_argument("--model-out", required=True)
    p.add_argument("--log", default=None, help="training log path (default: MODEL_OUT.log)")
    p.add_argument("--report-dir", default=None, help="also write the held-out report and figures here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a saved model against a labelled recording")
    _add_input_args(p, csv_required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--test-split", action="store_true",
                   help="score only the held-out part of the split recorded in the model")
    p.add_argument("--report-dir", default="report")
    p.add_argument("--name", default="")
    p.add_argument("--emit-spectrum", action="store_true",
                   help="also dump the per-segment feature CSV into the report directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="print one power class per segment of a recording")
    p.add_argument("--wav", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--offset-s", type=float, default=0.0)
    p.add_argument("--segment-s", type=float, default=None, help="default: the model's segment length")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("experiment-matrix",
                       help="both feature layouts on a clean and a noisy recording")
    p.add_argument("--clean-wav")
    p.add_argument("--clean-csv")
    p.add_argument("--noisy-wav")
    p.add_argument("--noisy-csv")
    p.add_argument("--offset-s", type=float, default=0.0)
    p.add_argument("--synth", action="store_true",
                   help="generate both recordings instead of reading them")
    p.add_argument("--segments", type=int, default=200)
    p.add_argument("--segment-s", type=float, default=20.0)
    p.add_argument("--clean-noise-level", type=float, default=0.05)
    p.add_argument("--noisy-noise-level", type=float, default=9.0)
    p.add_argument("--noisy-ac-level", type=float, default=9.0)
    p.add_argument("--band", default="166:700")
    p.add_argument("--bin-width", type=float, default=15.0)
    p.add_argument("--taper", action="store_true")
    _add_train_args(p)
    p.add_argument("--out-dir", default="experiment")
    p.set_defaults(func=cmd_experiment_matrix)
    return parser


# --------------------------------------------------------------------------
# helpers

def _seed(args) -> int:
    return default_seed() if args.seed is None else args.seed


def _band(args) -> spectral.BandSpec:
    return spectral.BandSpec.parse(args.band, args.bin_width)


def _pipeline_config(args, approach: str) -> PipelineConfig:
    seed = _seed(args)
    return PipelineConfig(
        approach=approach,
        band=_band(args),
        train=TrainConfig(args.epochs, args.goal_error, args.lr, seed, args.init_range),
        split=SplitSpec(args.train_frac, seed, args.stratified),
        bounds_policy=args.bounds,
        taper=args.taper,
    )


def _load_pairs(wav: str, power_csv: str, csv_interval=None, offset_s: float = 0.0):
    signal = audio_io.read_wav(wav)
    trace = audio_io.read_power_csv(power_csv, csv_interval)
    return audio_io.segment_and_align(signal, trace, offset_s), trace


def _write_report(report: evaluation.EvalReport, out_dir: Path, stem: str = "report") -> None:
    from . import plotting

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{stem}.txt").write_text(report.to_text(), encoding="utf-8")
    (out_dir / f"{stem}.json").write_text(report.to_json(), encoding="utf-8")
    (out_dir / f"{stem}_confusion.csv").write_text(report.confusion_csv(), encoding="utf-8")
    plotting.plot_confusion(report, out_dir / f"{stem}_confusion.png")


def _write_features(path: Path, pairs, band, approach, taper) -> None:
    segments = [s for s, _ in pairs]
    matrix = spectral.feature_matrix(segments, band, approach, taper)
    first = segments[0]
    freqs = spectral.feature_labels(first.sample_rate_hz, first.n, band, approach)
    spectral.write_feature_csv(path, matrix, freqs, [s.start_time_s for s in segments])


# --------------------------------------------------------------------------
# subcommands

def cmd_synth(args) -> int:
    scenario = synth.load_scenario(args.config) if args.config else synth.Scenario()
    fan, room, trace = scenario.fan, scenario.room, scenario.trace
    fan_kw = {k: v for k, v in {
        "blade_count": args.blades, "harmonics": args.harmonics,
        "rpm_min": args.rpm_range and args.rpm_range[0], "rpm_max": args.rpm_range and args.rpm_range[1],
    }.items() if v is not None}
    room_kw = {k: v for k, v in {
        "ac_level": args.ac_level, "broadband_noise_level": args.noise_level,
        "power_min_w": args.power_range and args.power_range[0],
        "power_max_w": args.power_range and args.power_range[1],
    }.items() if v is not None}
    if args.extra_tenant:
        room_kw["interferer"] = synth.Interferer(args.tenant_rpm, args.tenant_blades, args.tenant_level)
    trace_kw = {k: v for k, v in {
        "segments": args.segments, "segment_s": args.segment_s, "sample_rate_hz": args.sample_rate,
        "pattern": args.pattern, "shares": args.shares,
    }.items() if v is not None}
    if args.segments is not None and args.segments < 1:
        raise _UsageError("--segments must be at least 1")
    seed = args.seed if args.seed is not None else (scenario.seed if args.config else default_seed())
    scenario = synth.Scenario(replace(fan, **fan_kw), replace(room, **room_kw),
                              replace(trace, **trace_kw), seed)

    signal, power = scenario.render()
    prefix = Path(args.out_prefix)
    if prefix.parent != Path("."):
        prefix.parent.mkdir(parents=True, exist_ok=True)
    audio_io.write_wav(f"{prefix}.wav", signal, args.encoding)
    audio_io.write_power_csv(f"{prefix}.csv", power)
    Path(f"{prefix}.json").write_text(json.dumps(scenario.to_dict(), indent=2) + "\n", encoding="utf-8")
    log.info("wrote %s.wav (%.0f s) and %s.csv (%d readings)", prefix, signal.duration_s, prefix, len(power))
    return 0


def cmd_extract(args) -> int:
    band = _band(args)
    if args.power_csv:
        pairs, _ = _load_pairs(args.wav, args.power_csv, args.csv_interval, args.offset_s)
    else:
        signal = audio_io.read_wav(args.wav)
        segments = audio_io.segment_signal(signal, args.segment_s, args.offset_s)
        if not segments:
            raise audio_io.EmptyInputError(f"no full {args.segment_s:g} s segment in {args.wav}")
        pairs = [(s, float("nan")) for s in segments]
    _write_features(Path(args.out), pairs, band, args.approach, args.taper)
    log.info("wrote %d feature rows to %s", len(pairs), args.out)
    return 0


def cmd_train(args) -> int:
    from . import plotting

    config = _pipeline_config(args, args.approach)
    pairs, trace = _load_pairs(args.wav, args.power_csv, args.csv_interval, args.offset_s)
    result = evaluation.run_pipeline(pairs, config, name=f"{args.approach} features, held-out split")
    model = result.model
    model.metadata["source"] = {"wav": os.path.basename(args.wav),
                                "power_csv": os.path.basename(args.power_csv),
                                "offset_s": args.offset_s}
    save_model(model, args.model_out)

    log_path = args.log or f"{args.model_out}.log"
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write(f"config {json.dumps(config.echo(), sort_keys=True)}\n")
        s = model.shape
        fh.write(f"shape m={s.m} k1={s.k1} k2={s.k2} p={s.p}\n")
        fh.write(f"split n_train={len(result.train_idx)} n_test={len(result.test_idx)}\n")
        for epoch, mse in enumerate(result.history, start=1):
            fh.write(f"epoch {epoch} mse {mse!r}\n")
        fh.write(f"test_accuracy {result.report.accuracy!r}\n")
    log.info("network %d-%d-%d-%d, %d epochs, final MSE %.3g, held-out accuracy %.1f%%",
             s.m, s.k1, s.k2, s.p, len(result.history), result.history[-1],
             100 * result.report.accuracy)

    if args.report_dir:
        out = Path(args.report_dir)
        _write_report(result.report, out)
        plotting.plot_training_curve(result.history, out / "training_curve.png", config.train.goal_error)
        plotting.plot_power_classes(trace.timestamps_s[: len(pairs)], trace.watts[: len(pairs)],
                                    model.bounds, out / "power_classes.png")
    return 0


def cmd_eval(args) -> int:
    from . import plotting

    model = load_model(args.model)
    pairs, trace = _load_pairs(args.wav, args.power_csv, args.csv_interval, args.offset_s)
    segments = [s for s, _ in pairs]
    watts = np.array([w for _, w in pairs])
    classes = labeling.classify_many(watts, model.bounds)
    features = spectral.feature_matrix(segments, model.band, model.approach, model.taper)
    idx = np.arange(len(pairs))
    train_counts = None
    if args.test_split:
        cfg = model.metadata.get("config", {})
        if not cfg.get("split"):
            raise InvalidInputError("model carries no split configuration")
        pipeline = PipelineConfig(approach=model.approach, split=SplitSpec(**cfg["split"]),
                                  bounds_policy=cfg.get("bounds_policy", "global"))
        train_idx, idx = evaluation.split_for(watts, pipeline)
        train_counts = evaluation.class_counts(classes[train_idx])
    if train_counts is None:
        train_counts = model.metadata.get("train_class_counts")
    echo = {"model": os.path.basename(args.model), "wav": os.path.basename(args.wav),
            "power_csv": os.path.basename(args.power_csv), "test_split": args.test_split,
            "model_config": model.metadata.get("config", {})}
    report = evaluation.evaluate(model, features[idx], classes[idx], train_counts, echo, args.name)

    out = Path(args.report_dir)
    _write_report(report, out)
    plotting.plot_power_classes(trace.timestamps_s[: len(pairs)], watts, model.bounds,
                                out / "power_classes.png")
    if args.emit_spectrum:
        _write_features(out / "features.csv", pairs, model.band, model.approach, model.taper)
    sys.stdout.write(report.to_text())
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    signal = audio_io.read_wav(args.wav)
    if signal.sample_rate_hz != model.sample_rate_hz:
        log.warning("recording is %d Hz but the model was trained at %d Hz",
                    signal.sample_rate_hz, model.sample_rate_hz)
    segment_s = args.segment_s or model.segment_s
    if segment_s != model.segment_s:
        log.warning("segment length %g s differs from the model's %g s; magnitudes will not match "
                    "the training scale", segment_s, model.segment_s)
    segments = audio_io.segment_signal(signal, segment_s, args.offset_s)
    if not segments:
        raise audio_io.EmptyInputError("recording is shorter than one segment")
    features = spectral.feature_matrix(segments, model.band, model.approach, model.taper)
    for seg, cls in zip(segments, model.predict_many(features)):
        c = labeling.PowerClass(int(cls))
        sys.stdout.write(f"{seg.start_time_s:g}\t{int(c)}\t{c.label}\n")
    return 0


def cmd_experiment_matrix(args) -> int:
    from . import plotting

    if args.synth:
        seed = _seed(args)
        spec = synth.TraceSpec(segments=args.segments, segment_s=args.segment_s)
        clean_room = synth.RoomProfile(broadband_noise_level=args.clean_noise_level)
        noisy_room = synth.RoomProfile(broadband_noise_level=args.noisy_noise_level,
                                       ac_level=args.noisy_ac_level, interferer=synth.Interferer())
        data = {}
        for which, room in (("clean", clean_room), ("noisy", noisy_room)):
            signal, trace = synth.synth_dataset(synth.FanProfile(), room, spec, seed)
            data[which] = audio_io.segment_and_align(signal, trace)
    else:
        missing = [f for f in ("clean_wav", "clean_csv", "noisy_wav", "noisy_csv") if not getattr(args, f)]
        if missing:
            raise _UsageError("need --synth or all of --clean-wav/--clean-csv/--noisy-wav/--noisy-csv")
        data = {
            "clean": _load_pairs(args.clean_wav, args.clean_csv, None, args.offset_s)[0],
            "noisy": _load_pairs(args.noisy_wav, args.noisy_csv, None, args.offset_s)[0],
        }

    config = _pipeline_config(args, "reduced")
    results = evaluation.run_experiment_matrix(data["clean"], data["noisy"], config)
    reports = [r.report for r in results]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for (approach, which, _), res in zip(evaluation.MATRIX_CELLS, results):
        stem = f"{approach}_{which}"
        _write_report(res.report, out, stem)
        plotting.plot_training_curve(res.history, out / f"{stem}_training_curve.png",
                                     config.train.goal_error)
    (out / "comparison.txt").write_text(evaluation.comparison_text(reports), encoding="utf-8")
    (out / "comparison.json").write_text(evaluation.comparison_json(reports), encoding="utf-8")
    plotting.plot_accuracy_grid(reports, out / "accuracy.png")
    sys.stdout.write(evaluation.comparison_text(reports))
    return 0


class _UsageError(Exception):
    pass


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.error(str(exc))
    except AcousticPowerError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return IO_ERROR_EXIT
    return 0


if __name__ == "__main__":
    sys.exit(main())
