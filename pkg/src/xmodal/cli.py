"""Command-line surface: analysis, degradation, training, evaluation jobs.

Every command is deterministic given its config and seed; rerunning writes
byte-identical outputs. Outputs are data files (CSV + JSON), never rendered
plots. Exit codes: 0 success (possibly with per-sample warnings), 2
configuration/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from . import __version__
from .cmsupcon import LossVariant
from .codecsim import ChainSpec, apply_chain, derive_sample_seed
from .core import (
    ImageBuffer,
    Label,
    Manifest,
    Modality,
    SampleRecord,
    load_image,
    parse_manifest,
    save_image,
    write_manifest,
)
from .errors import NonFiniteLossError, XmodalError
from .forensics import (
    Window,
    dataset_mean_rapsd,
    dct_ac_histogram,
    detect_tv_range,
    luminance_histogram,
    residual_spectrum,
)
from .metrics import (
    Aggregation,
    EvalReport,
    FrameScore,
    ScoredPrediction,
    group_frames,
    multi_frame_average,
    per_subset_report,
)
from .trainer import (
    FeatureDataset,
    SyntheticSpec,
    ToyModel,
    TrainConfig,
    forward,
    generate_synthetic,
    load_checkpoint,
    save_checkpoint,
    train,
)


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_run_manifest(
    out_dir: Path, command: str, config: dict, inputs: dict[str, Path]
) -> None:
    doc = {
        "command": command,
        "version": __version__,
        "config": config,
        "inputs": {
            name: {"path": str(path), "sha256": _sha256_file(path)}
            for name, path in inputs.items()
        },
    }
    _write_json(out_dir / "run.json", doc)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            ["" if v is None else repr(v) if isinstance(v, float) else v for v in row]
        )
    return buf.getvalue()


def _limited_records(manifest: Manifest, limit: Optional[int]) -> list[SampleRecord]:
    records = list(manifest.records)
    return records[:limit] if limit else records


def _load_images_with_failures(
    records: Sequence[SampleRecord], threads: int = 1
) -> tuple[list[ImageBuffer], list[str]]:
    """Load all records, in manifest order, tolerating per-sample failures."""

    def load_one(rec: SampleRecord):
        try:
            return load_image(rec.path), None
        except (XmodalError, OSError):
            return None, rec.id

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(load_one, records))
    else:
        results = [load_one(rec) for rec in records]
    images = [img for img, _ in results if img is not None]
    failed = [rec_id for _, rec_id in results if rec_id is not None]
    return images, failed


# --- analyze ----------------------------------------------------------------


def cmd_analyze(args: argparse.Namespace) -> int:
    manifest = parse_manifest(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = _limited_records(manifest, args.limit)
    kind = args.kind
    inputs = {"manifest": Path(args.manifest)}
    config = {
        "kind": kind,
        "manifest": str(args.manifest),
        "out": str(args.out),
        "limit": args.limit,
        "seed": args.seed,
        "threads": args.threads,
    }

    if kind == "dct":
        images, failed = _load_images_with_failures(records, args.threads)
        if not images:
            raise XmodalError("no loadable samples in manifest")
        result = dct_ac_histogram(images, value_range=args.range, nbins=args.bins)
        hist = result.histogram
        rows = [
            (repr(float(hist.bin_edges[i])), repr(float(hist.bin_edges[i + 1])), int(c))
            for i, c in enumerate(hist.counts)
        ]
        (out_dir / "dct.csv").write_text(
            _csv_text(("bin_lo", "bin_hi", "count"), rows), encoding="utf-8"
        )
        center = np.abs(hist.bin_edges[:-1] + np.diff(hist.bin_edges) / 2.0)
        near_zero = float(hist.counts[center < 0.5].sum() / max(hist.total, 1))
        summary = {
            "zero_fraction": result.zero_fraction,
            "near_zero_mass": near_zero,
            "total_ac": result.total_ac,
            "n_images": result.n_images,
            "n_failed": len(failed),
            "failed_ids": failed,
        }
        _write_json(out_dir / "dct.summary.json", summary)

    elif kind == "rapsd":
        preprocess = None
        if args.chain:
            preprocess = ChainSpec.load(args.chain)
            inputs["chain"] = Path(args.chain)
            config["chain"] = str(args.chain)
        window = Window.HANN if args.window == "hann" else Window.NONE
        sub = Manifest(tuple(records), manifest.source_path)
        result = dataset_mean_rapsd(
            sub, preprocess=preprocess, nbins=args.bins, window=window, seed=args.seed
        )
        profile = result.profile
        rows = [
            (repr(float(r)), repr(float(p)), int(c))
            for r, p, c in zip(profile.radii, profile.power, profile.counts)
        ]
        (out_dir / "rapsd.csv").write_text(
            _csv_text(("radius", "power", "count"), rows), encoding="utf-8"
        )
        third = max(len(profile.power) // 3, 1)
        summary = {
            "low_band_power": float(profile.power[:third].mean()),
            "mid_band_power": float(profile.power[third : 2 * third].mean()),
            "high_band_power": float(profile.power[2 * third :].mean()),
            "n_used": result.n_used,
            "n_failed": result.n_failed,
            "failed_ids": list(result.failed_ids),
        }
        _write_json(out_dir / "rapsd.summary.json", summary)

    elif kind == "luma":
        images, failed = _load_images_with_failures(records, args.threads)
        if not images:
            raise XmodalError("no loadable samples in manifest")
        hist = luminance_histogram(images)
        rows = [(code, int(count)) for code, count in enumerate(hist.counts)]
        (out_dir / "luma.csv").write_text(
            _csv_text(("code", "count"), rows), encoding="utf-8"
        )
        verdict, evidence = detect_tv_range(hist)
        summary = {
            "verdict": verdict.value,
            "tail_mass": evidence.tail_mass,
            "comb_score": evidence.comb_score,
            "total_pixels": hist.total,
            "n_images": len(images),
            "n_failed": len(failed),
            "failed_ids": failed,
        }
        _write_json(out_dir / "luma.summary.json", summary)

    elif kind == "spectrum":
        sub = Manifest(tuple(records), manifest.source_path)
        result = residual_spectrum(sub, denoise_sigma=args.sigma, size=args.size)
        spec = result.spectrum
        rows = [
            (y, x, repr(float(spec.values[y, x])))
            for y in range(spec.height)
            for x in range(spec.width)
        ]
        (out_dir / "spectrum.csv").write_text(
            _csv_text(("row", "col", "log10_power"), rows), encoding="utf-8"
        )
        cy, cx = spec.height // 2, spec.width // 2
        quarter = max(spec.height // 4, 1)
        lf = spec.values[cy - quarter : cy + quarter, cx - quarter : cx + quarter]
        total_sum = spec.values.sum()
        lf_sum = lf.sum()
        hf_cells = spec.values.size - lf.size
        summary = {
            "low_freq_mean": float(lf.mean()),
            "high_freq_mean": float((total_sum - lf_sum) / max(hf_cells, 1)),
            "size": spec.width,
            "denoise_sigma": args.sigma,
            "n_used": result.n_used,
            "n_failed": result.n_failed,
            "failed_ids": list(result.failed_ids),
        }
        _write_json(out_dir / "spectrum.summary.json", summary)

    else:  # pragma: no cover - argparse restricts choices
        raise XmodalError(f"unknown analysis kind {kind!r}")

    _write_run_manifest(out_dir, f"analyze {kind}", config, inputs)
    return 0


# --- degrade -----------------------------------------------------------------


def _safe_filename(sample_id: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in sample_id)


def cmd_degrade(args: argparse.Namespace) -> int:
    manifest = parse_manifest(args.manifest)
    chain = ChainSpec.load(args.chain)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = _limited_records(manifest, args.limit)

    def process(item: tuple[int, SampleRecord]):
        index, rec = item
        try:
            img = load_image(rec.path)
            rng = np.random.default_rng(derive_sample_seed(args.seed, rec.id))
            degraded = apply_chain(img, chain, rng)
            ext = "pgm" if degraded.channels == 1 else "ppm"
            out_path = out_dir / f"{index:06d}_{_safe_filename(rec.id)}.{ext}"
            save_image(degraded, out_path)
            return rec, str(out_path), None
        except (XmodalError, OSError) as exc:
            return rec, None, str(exc)

    items = list(enumerate(records))
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(process, items))
    else:
        results = [process(item) for item in items]

    new_records = []
    failures = []
    for rec, out_path, error in results:
        if error is None:
            new_records.append(
                SampleRecord(
                    id=rec.id,
                    path=out_path,
                    label=rec.label,
                    modality=rec.modality,
                    subset=rec.subset,
                    frame_index=rec.frame_index,
                    frame_count=rec.frame_count,
                )
            )
        else:
            failures.append({"id": rec.id, "error": error})
    if not new_records:
        raise XmodalError("every sample failed degradation")
    write_manifest(
        Manifest(tuple(new_records), str(out_dir / "manifest.jsonl")),
        out_dir / "manifest.jsonl",
    )
    summary = {
        "n_ok": len(new_records),
        "n_failed": len(failures),
        "failures": failures,
    }
    _write_json(out_dir / "degrade.summary.json", summary)
    config = {
        "manifest": str(args.manifest),
        "chain": str(args.chain),
        "out": str(args.out),
        "seed": args.seed,
        "limit": args.limit,
        "threads": args.threads,
    }
    _write_run_manifest(
        out_dir,
        "degrade",
        config,
        {"manifest": Path(args.manifest), "chain": Path(args.chain)},
    )
    return 0


# --- train ---------------------------------------------------------------------


def _train_config_from_doc(doc: dict, seed_override: Optional[int]) -> TrainConfig:
    train_doc = dict(doc.get("train", {}))
    if "lambda" in train_doc:
        train_doc["lam"] = train_doc.pop("lambda")
    if "variant" in train_doc:
        train_doc["variant"] = LossVariant(train_doc["variant"])
    if seed_override is not None:
        train_doc["seed"] = seed_override
    return TrainConfig(**train_doc)


def _synthetic_spec_from_doc(doc: dict) -> SyntheticSpec:
    kwargs = dict(doc)
    for key in ("train_counts", "val_counts", "test_counts"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    if "video_shift" in kwargs and kwargs["video_shift"] is not None:
        kwargs["video_shift"] = tuple(kwargs["video_shift"])
    return SyntheticSpec.default(**kwargs)


def load_feature_file(path: str | Path) -> list[dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or "records" not in doc:
        raise XmodalError(f"{path}: feature file must be {{'records': [...]}}")
    return doc["records"]


def _records_to_dataset(records: list[dict]) -> FeatureDataset:
    xs = [rec["x"] for rec in records]
    ys = [Label.from_string(rec["label"]).numeric for rec in records]
    ms = [Modality.from_string(rec["modality"]).numeric for rec in records]
    return FeatureDataset(np.asarray(xs, dtype=np.float64), ys, ms)


def _history_csv(history) -> str:
    rows = [
        (
            h.epoch,
            repr(h.train_bce),
            repr(h.train_cm),
            repr(h.train_total),
            repr(h.val_total),
            repr(h.train_acc),
            repr(h.val_acc),
        )
        for h in history
    ]
    return _csv_text(
        (
            "epoch",
            "train_bce",
            "train_cm",
            "train_total",
            "val_total",
            "train_acc",
            "val_acc",
        ),
        rows,
    )


def cmd_train(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    if not config_path.is_file():
        raise XmodalError(f"config not found: {config_path}")
    doc = json.loads(config_path.read_text(encoding="utf-8"))
    config = _train_config_from_doc(doc, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_doc = doc.get("data", {"synthetic": {}})
    inputs = {"config": config_path}
    if "synthetic" in data_doc:
        spec = _synthetic_spec_from_doc(data_doc["synthetic"])
        data = generate_synthetic(spec)
        train_data, val_data = data.train, data.val
    else:
        train_records = load_feature_file(data_doc["train_features"])
        val_records = load_feature_file(data_doc["val_features"])
        train_data = _records_to_dataset(train_records)
        val_data = _records_to_dataset(val_records)
        inputs["train_features"] = Path(data_doc["train_features"])
        inputs["val_features"] = Path(data_doc["val_features"])
    rng = np.random.default_rng(config.seed)
    model = ToyModel.init(
        train_data.x.shape[1], config.hidden_dim, config.feature_dim, rng
    )
    result = train(model, train_data, val_data, config)
    save_checkpoint(result.model, config, out_dir / "checkpoint.json")
    (out_dir / "history.csv").write_text(_history_csv(result.history), encoding="utf-8")
    resolved = {
        "config_file": str(config_path),
        "out": str(args.out),
        "data": data_doc,
        "train": {
            **{k: (v.value if isinstance(v, LossVariant) else v)
               for k, v in vars(config).items()}
        },
        "best_epoch": result.best_epoch,
        "best_val": result.best_val,
        "stopped_early": result.stopped_early,
    }
    _write_run_manifest(out_dir, "train", resolved, inputs)
    return 0


# --- evaluate ---------------------------------------------------------------------


def _score_feature_records(
    model: ToyModel, feature_layer: str, records: list[dict], t: int
) -> list[ScoredPrediction]:
    singles: list[FrameScore] = []
    for i, rec in enumerate(records):
        x = np.asarray(rec["x"], dtype=np.float64)[None, :]
        logit = float(forward(model, x, feature_layer).logits[0])
        singles.append(
            FrameScore(
                video_id=str(rec.get("video_id") or f"__single_{i}"),
                frame_index=int(rec.get("frame_index") or 0),
                score=float(expit(logit)),
                label=Label.from_string(rec["label"]),
                subset=rec["subset"],
                logit=logit,
            )
        )
    preds = []
    for _, frames in group_frames(singles).items():
        preds.append(multi_frame_average(frames, t=t))
    return preds


def _video_group_key(rec: SampleRecord) -> Optional[str]:
    if rec.frame_index is not None and "#" in rec.id:
        return rec.id.rsplit("#", 1)[0]
    return None


def _score_manifest(
    model: ToyModel, feature_layer: str, manifest: Manifest, t: int, limit
) -> list[ScoredPrediction]:
    frames: list[FrameScore] = []
    for i, rec in enumerate(_limited_records(manifest, limit)):
        img = load_image(rec.path)
        x = img.data.ravel()[None, :]
        logit = float(forward(model, x, feature_layer).logits[0])
        key = _video_group_key(rec) or f"__single_{i}"
        frames.append(
            FrameScore(
                video_id=key,
                frame_index=rec.frame_index or 0,
                score=float(expit(logit)),
                label=rec.label,
                subset=rec.subset,
                logit=logit,
            )
        )
    return [
        multi_frame_average(group, t=t) for group in group_frames(frames).values()
    ]


def cmd_evaluate(args: argparse.Namespace) -> int:
    model, config = load_checkpoint(args.checkpoint)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = {"checkpoint": Path(args.checkpoint)}
    if args.features:
        records = load_feature_file(args.features)
        if args.limit:
            records = records[: args.limit]
        preds = _score_feature_records(
            model, config.feature_layer, records, args.frames
        )
        inputs["features"] = Path(args.features)
    elif args.manifest:
        manifest = parse_manifest(args.manifest)
        preds = _score_manifest(
            model, config.feature_layer, manifest, args.frames, args.limit
        )
        inputs["manifest"] = Path(args.manifest)
    else:
        raise XmodalError("evaluate needs --features or --manifest")
    headline = (
        Aggregation.OVERALL_POOLED
        if args.aggregation == "overall"
        else Aggregation.MEAN_OVER_SUBSETS
    )
    report = per_subset_report(preds, threshold=args.threshold, headline=headline)
    (out_dir / "report.csv").write_text(report.to_csv_text(), encoding="utf-8")
    _write_json(out_dir / "report.json", report.to_json_dict())
    config_doc = {
        "checkpoint": str(args.checkpoint),
        "features": args.features,
        "manifest": args.manifest,
        "aggregation": args.aggregation,
        "frames": args.frames,
        "threshold": args.threshold,
        "limit": args.limit,
        "headline_acc": report.headline_row().acc,
    }
    _write_run_manifest(out_dir, "evaluate", config_doc, inputs)
    return 0


# --- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xmodal",
        description="Cross-modal AIGC-detection toolkit: analysis, degradation, "
        "training, and evaluation jobs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    analyze = sub.add_parser("analyze", help="run a forensic dataset analysis")
    analyze.add_argument("kind", choices=("dct", "rapsd", "luma", "spectrum"))
    analyze.add_argument("--manifest", required=True)
    analyze.add_argument("--out", required=True)
    analyze.add_argument("--limit", type=int, default=None)
    analyze.add_argument("--seed", type=int, default=0)
    analyze.add_argument("--threads", type=int, default=1)
    analyze.add_argument("--bins", type=int, default=None)
    analyze.add_argument("--range", type=float, default=64.0,
                         help="dct: half-width of the coefficient histogram")
    analyze.add_argument("--window", choices=("none", "hann"), default="none")
    analyze.add_argument("--chain", default=None,
                         help="rapsd: degradation chain applied before analysis")
    analyze.add_argument("--sigma", type=float, default=1.0,
                         help="spectrum: residual blur sigma")
    analyze.add_argument("--size", type=int, default=64,
                         help="spectrum: transform size")
    analyze.set_defaults(func=cmd_analyze)

    degrade = sub.add_parser("degrade", help="apply a degradation chain to a corpus")
    degrade.add_argument("--manifest", required=True)
    degrade.add_argument("--chain", required=True)
    degrade.add_argument("--out", required=True)
    degrade.add_argument("--seed", type=int, default=0)
    degrade.add_argument("--limit", type=int, default=None)
    degrade.add_argument("--threads", type=int, default=1)
    degrade.set_defaults(func=cmd_degrade)

    train_p = sub.add_parser("train", help="train the desk-scale model")
    train_p.add_argument("--config", required=True)
    train_p.add_argument("--out", required=True)
    train_p.add_argument("--seed", type=int, default=None,
                         help="override the seed in the config file")
    train_p.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("evaluate", help="score a dataset and emit a report")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--features", default=None)
    evaluate.add_argument("--manifest", default=None)
    evaluate.add_argument("--out", required=True)
    evaluate.add_argument("--aggregation", choices=("subset-mean", "overall"),
                          default="subset-mean")
    evaluate.add_argument("--frames", type=int, default=1,
                          help="frames per video for logit averaging")
    evaluate.add_argument("--threshold", type=float, default=0.5)
    evaluate.add_argument("--limit", type=int, default=None)
    evaluate.set_defaults(func=cmd_evaluate)

    version = sub.add_parser("version", help="print the tool version")
    version.set_defaults(func=lambda args: print(__version__) or 0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "kind", None) == "dct" and args.bins is None:
        args.bins = 129
    elif getattr(args, "kind", None) == "rapsd" and args.bins is None:
        args.bins = 32
    try:
        return args.func(args)
    except NonFiniteLossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (XmodalError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
