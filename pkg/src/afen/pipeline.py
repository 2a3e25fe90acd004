"""Stage orchestration and run artifacts.

A run directory is laid out as

    splits.csv                      original recordings and their split
    clips/clips.csv                 every cached clip (originals + augmented)
    clips/<split>/<clip_id>.wav     standardized float32 WAVs
    features/<clip_id>.<kind>.afen  five matrices per clip
    features/<split>_vectors.afen   the 364-wide matrix per split
    features/<split>_labels.csv
    models/ history/ reports/
    run_manifest.json

Each stage records a key (config slice + upstream key) and the hashes of its
outputs in the manifest; a rerun with an unchanged key and intact outputs is
skipped, and changing, say, an augmentation parameter invalidates exactly the
stages downstream of prepare.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, persist
from .audio_io import AudioClip, read_wav, standardize_clip, write_wav
from .augment import AugmentSpec, augment_variants
from .config import RunConfig
from .dataset import Recording, scan_corpus, stratified_split
from .ensemble import EnsembleSpec, calibrate_weight, soft_vote
from .errors import ConfigError, DataError
from .features import FEATURE_ORDER, extract_bundle
from .gbdt import BoostConfig, fit_gbdt, predict_gbdt
from .metrics import DIAGNOSIS_CLASSES, EvalReport, evaluate
from .nn import CnnModel, TrainConfig, fit_cnn, predict_probs

SPLITS = ("train", "val", "test")


@dataclass
class ClipEntry:
    clip_id: str
    source: str
    patient: int
    label: str
    split: str
    augmentation: str  # "original" or the variant kind

    @property
    def label_index(self) -> int:
        return DIAGNOSIS_CLASSES.index(self.label)


class RunLock:
    """Single-process ownership of an output directory."""

    def __init__(self, output_dir: Path):
        self.path = Path(output_dir) / ".lock"

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            try:
                other = int(self.path.read_text().strip())
                os.kill(other, 0)
            except (ValueError, ProcessLookupError, PermissionError):
                self.path.unlink()  # stale
            else:
                raise ConfigError(f"output directory is locked by running pid {other}")
        fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        self.path.unlink(missing_ok=True)
        return False


def build_id() -> str:
    return f"afen-{__version__}"


class Manifest:
    def __init__(self, output_dir: Path, config: RunConfig):
        self.path = Path(output_dir) / "run_manifest.json"
        if self.path.is_file():
            self.data = json.loads(self.path.read_text())
        else:
            self.data = {"build": build_id(), "stages": {}}
        self.data["config"] = config.to_dict()
        self.data["build"] = build_id()

    def stage_fresh(self, name: str, key: str) -> bool:
        stage = self.data["stages"].get(name)
        if not stage or stage.get("key") != key:
            return False
        for rel, digest in stage.get("outputs", {}).items():
            p = self.path.parent / rel
            if not p.is_file() or persist.sha256_file(p) != digest:
                return False
        return True

    def record_stage(self, name: str, key: str, outputs: list[Path], seconds: float) -> None:
        root = self.path.parent
        self.data["stages"][name] = {
            "key": key,
            "outputs": {
                str(p.relative_to(root)): persist.sha256_file(p) for p in outputs
            },
            "seconds": round(seconds, 3),
        }
        self.save()

    def stage_key(self, name: str) -> str:
        stage = self.data["stages"].get(name)
        if not stage:
            raise DataError(f"stage {name!r} has not run; run the earlier pipeline stages first")
        return stage["key"]

    def save(self) -> None:
        persist.write_json(self.path, self.data)


def _config_slice(config: RunConfig, keys: list[str]) -> str:
    d = config.to_dict()
    return json.dumps({k: d[k] for k in keys}, sort_keys=True)


def _hash_corpus(recordings: list[Recording]) -> str:
    parts = [f"{r.meta.path.name}:{persist.sha256_file(r.meta.path)}:{r.label}" for r in recordings]
    return persist.sha256_text("\n".join(parts))


# --- prepare ---

_PREPARE_KEYS = [
    "seed", "test_fraction", "val_fraction", "split_by",
    "augment_snr_db", "augment_band_lo_hz", "augment_band_hi_hz",
    "augment_band_order", "augment_shift_fraction", "augment_pitch_semitones",
    "class_balanced_augment",
]


def _write_clip_rows(path: Path, entries: list[ClipEntry]) -> None:
    lines = ["clip_id,source,patient,label,split,augmentation"]
    for e in entries:
        lines.append(f"{e.clip_id},{e.source},{e.patient},{e.label},{e.split},{e.augmentation}")
    path.write_text("\n".join(lines) + "\n")


def read_clip_entries(output_dir: Path) -> list[ClipEntry]:
    path = Path(output_dir) / "clips" / "clips.csv"
    if not path.is_file():
        raise DataError(f"{path} not found; run the prepare stage first")
    entries = []
    with path.open(newline="") as fp:
        for row in csv.DictReader(fp):
            entries.append(
                ClipEntry(row["clip_id"], row["source"], int(row["patient"]),
                          row["label"], row["split"], row["augmentation"])
            )
    return entries


def cmd_prepare(config: RunConfig) -> list[ClipEntry]:
    """Split the corpus, standardize every clip, and augment the train split."""
    out = Path(config.output_dir)
    recordings = scan_corpus(config.corpus_dir)
    manifest = Manifest(out, config)
    key = persist.sha256_text(_config_slice(config, _PREPARE_KEYS) + _hash_corpus(recordings))
    if manifest.stage_fresh("prepare", key):
        return read_clip_entries(out)
    t0 = time.time()
    split = stratified_split(
        recordings,
        test_fraction=config.test_fraction,
        val_fraction=config.val_fraction,
        seed=config.seed,
        by_patient=config.split_by == "patient",
    )
    split_lines = ["path,patient,label,split"]
    members = {"train": split.train, "val": split.validation, "test": split.test}
    for split_name in SPLITS:
        for rec in members[split_name]:
            split_lines.append(f"{rec.meta.path},{rec.meta.patient_id},{rec.label},{split_name}")
    splits_csv = out / "splits.csv"
    splits_csv.parent.mkdir(parents=True, exist_ok=True)
    splits_csv.write_text("\n".join(split_lines) + "\n")

    spec = AugmentSpec(
        snr_db=config.augment_snr_db,
        band_lo_hz=config.augment_band_lo_hz,
        band_hi_hz=config.augment_band_hi_hz,
        band_order=config.augment_band_order,
        shift_fraction=config.augment_shift_fraction,
        pitch_semitones=config.augment_pitch_semitones,
        seed=config.seed,
    )
    clips_dir = out / "clips"
    for split_name in SPLITS:
        (clips_dir / split_name).mkdir(parents=True, exist_ok=True)
    entries: list[ClipEntry] = []
    outputs = [splits_csv]
    standardized: dict[str, AudioClip] = {}

    def emit(clip: AudioClip, entry: ClipEntry) -> None:
        path = clips_dir / entry.split / f"{entry.clip_id}.wav"
        write_wav(clip, path, float32=True)
        outputs.append(path)
        entries.append(entry)

    for split_name in SPLITS:
        for rec in members[split_name]:
            stem = rec.meta.path.stem
            clip = standardize_clip(read_wav(rec.meta.path))
            if split_name == "train":
                standardized[stem] = clip
            emit(clip, ClipEntry(stem, str(rec.meta.path), rec.meta.patient_id,
                                 rec.label, split_name, "original"))

    def augment_one(rec: Recording, round_tag: str) -> None:
        stem = rec.meta.path.stem
        base = standardized[stem]
        key_prefix = stem if not round_tag else f"{stem}#{round_tag}"
        for kind, variant in augment_variants(base, spec, key_prefix).items():
            suffix = f"aug-{kind}" if not round_tag else f"aug-{round_tag}-{kind}"
            emit(variant, ClipEntry(f"{stem}.{suffix}", str(rec.meta.path),
                                    rec.meta.patient_id, rec.label, "train", kind))

    for rec in members["train"]:
        augment_one(rec, "")
    if config.class_balanced_augment:
        per_class: dict[str, list[Recording]] = {}
        for rec in members["train"]:
            per_class.setdefault(rec.label, []).append(rec)
        biggest = max(len(v) for v in per_class.values())
        for label in sorted(per_class):
            recs = per_class[label]
            # uniform inflation left this class at 5*len(recs) clips; each
            # extra round adds 4*len(recs) more
            deficit = 5 * (biggest - len(recs))
            extra_rounds = -(-deficit // (4 * len(recs))) if recs else 0
            for r in range(extra_rounds):
                for rec in recs:
                    augment_one(rec, f"bal{r}")

    clips_csv = clips_dir / "clips.csv"
    _write_clip_rows(clips_csv, entries)
    outputs.append(clips_csv)
    manifest.record_stage("prepare", key, outputs, time.time() - t0)
    return entries


# --- extract ---


def feature_paths(features_dir: Path, clip_id: str) -> dict[str, Path]:
    return {kind: features_dir / f"{clip_id}.{kind}.afen" for kind in FEATURE_ORDER}


def cmd_extract(config: RunConfig) -> None:
    """Write the five matrices per cached clip and the per-split tree vectors."""
    out = Path(config.output_dir)
    manifest = Manifest(out, config)
    key = persist.sha256_text("extract:" + manifest.stage_key("prepare"))
    if manifest.stage_fresh("extract", key):
        return
    t0 = time.time()
    entries = read_clip_entries(out)
    features_dir = out / "features"
    features_dir.mkdir(parents=True, exist_ok=True)
    outputs: list[Path] = []
    vectors: dict[str, list[np.ndarray]] = {s: [] for s in SPLITS}
    labels: dict[str, list[tuple[str, int]]] = {s: [] for s in SPLITS}
    for entry in entries:
        clip = read_wav(out / "clips" / entry.split / f"{entry.clip_id}.wav")
        bundle = extract_bundle(clip)
        for kind, mat in bundle.matrices():
            path = features_dir / f"{entry.clip_id}.{kind}.afen"
            persist.write_feature_matrix(path, kind, mat)
            outputs.append(path)
        vectors[entry.split].append(bundle.gbdt_vector)
        labels[entry.split].append((entry.clip_id, entry.label_index))
    for split_name in SPLITS:
        vec_path = features_dir / f"{split_name}_vectors.afen"
        mat = (
            np.vstack(vectors[split_name])
            if vectors[split_name]
            else np.zeros((0, 364))
        )
        persist.write_feature_matrix(vec_path, "vectors", mat)
        outputs.append(vec_path)
        lab_path = features_dir / f"{split_name}_labels.csv"
        lines = ["clip_id,label_index"] + [f"{cid},{idx}" for cid, idx in labels[split_name]]
        lab_path.write_text("\n".join(lines) + "\n")
        outputs.append(lab_path)
    manifest.record_stage("extract", key, outputs, time.time() - t0)


# --- train / evaluate ---


def load_split_vectors(output_dir: Path, split_name: str) -> tuple[np.ndarray, np.ndarray, list[str]]:
    features_dir = Path(output_dir) / "features"
    vec_path = features_dir / f"{split_name}_vectors.afen"
    lab_path = features_dir / f"{split_name}_labels.csv"
    if not vec_path.is_file() or not lab_path.is_file():
        raise DataError(f"feature caches for split {split_name!r} missing; run the extract stage first")
    _, vectors = persist.read_feature_matrix(vec_path)
    clip_ids = []
    labels = []
    with lab_path.open(newline="") as fp:
        for row in csv.DictReader(fp):
            clip_ids.append(row["clip_id"])
            labels.append(int(row["label_index"]))
    if len(clip_ids) != vectors.shape[0]:
        raise DataError(f"{split_name}: label rows != vector rows")
    return vectors.astype(np.float64), np.asarray(labels, dtype=np.int64), clip_ids


def load_split_tensors(output_dir: Path, split_name: str) -> tuple[dict[str, np.ndarray], np.ndarray]:
    _, labels, clip_ids = load_split_vectors(output_dir, split_name)
    features_dir = Path(output_dir) / "features"
    batches: dict[str, list[np.ndarray]] = {k: [] for k in FEATURE_ORDER}
    for clip_id in clip_ids:
        for kind in FEATURE_ORDER:
            _, mat = persist.read_feature_matrix(features_dir / f"{clip_id}.{kind}.afen")
            batches[kind].append(mat[None, :, :, None])
    data = {
        kind: (np.concatenate(mats, axis=0) if mats else np.zeros((0, 1, 1, 1), np.float32))
        for kind, mats in batches.items()
    }
    return data, labels


def _test_manifest_hash(output_dir: Path) -> str:
    features_dir = Path(output_dir) / "features"
    return persist.sha256_text(
        persist.sha256_file(features_dir / "test_vectors.afen")
        + persist.sha256_file(features_dir / "test_labels.csv")
    )


def _emit_report(output_dir: Path, report: EvalReport) -> Path:
    reports_dir = Path(output_dir) / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    path = reports_dir / f"{report.model}.json"
    persist.write_json(path, report.to_json_dict())
    return path


def train_cnn(config: RunConfig, manifest: Manifest) -> tuple[Path, ...]:
    out = Path(config.output_dir)
    train_data, train_labels = load_split_tensors(out, "train")
    val_data, val_labels = load_split_tensors(out, "val")
    model = CnnModel(seed=config.seed, dropout=config.cnn_dropout)
    tc = TrainConfig(
        epochs=config.cnn_epochs,
        batch_size=config.cnn_batch_size,
        learning_rate=config.cnn_learning_rate,
        dropout=config.cnn_dropout,
        seed=config.seed,
        validation_fraction=config.val_fraction,
    )
    history = fit_cnn(model, train_data, train_labels,
                      val_data if len(val_labels) else None,
                      val_labels if len(val_labels) else None, tc)
    models_dir = out / "models"
    history_dir = out / "history"
    models_dir.mkdir(parents=True, exist_ok=True)
    history_dir.mkdir(parents=True, exist_ok=True)
    model_path = models_dir / "cnn.afenmodl"
    persist.save_cnn_model(model_path, model)
    hist_path = history_dir / "cnn_history.csv"
    persist.write_history_csv(hist_path, history,
                              ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
    return model_path, hist_path


def train_gbdt(config: RunConfig, manifest: Manifest) -> tuple[Path, ...]:
    out = Path(config.output_dir)
    vectors, labels, _ = load_split_vectors(out, "train")
    bc = BoostConfig(
        n_rounds=config.gbdt_rounds,
        learning_rate=config.gbdt_learning_rate,
        max_depth=config.gbdt_max_depth,
        min_child_weight=config.gbdt_min_child_weight,
        reg_lambda=config.gbdt_reg_lambda,
        gamma=config.gbdt_gamma,
        class_count=len(DIAGNOSIS_CLASSES),
        seed=config.seed,
    )
    model, history = fit_gbdt(vectors, labels, bc)
    models_dir = out / "models"
    history_dir = out / "history"
    models_dir.mkdir(parents=True, exist_ok=True)
    history_dir.mkdir(parents=True, exist_ok=True)
    model_path = models_dir / "gbdt.afengbdt"
    persist.save_gbdt_model(model_path, model)
    hist_path = history_dir / "gbdt_history.csv"
    persist.write_history_csv(hist_path, history, ["round", "train_mlogloss"])
    return model_path, hist_path


def _cnn_probs(output_dir: Path, split_name: str) -> tuple[np.ndarray, np.ndarray]:
    model = persist.load_cnn_model(Path(output_dir) / "models" / "cnn.afenmodl")
    data, labels = load_split_tensors(output_dir, split_name)
    return predict_probs(model, data), labels


def _gbdt_probs(output_dir: Path, split_name: str) -> tuple[np.ndarray, np.ndarray]:
    model = persist.load_gbdt_model(Path(output_dir) / "models" / "gbdt.afengbdt")
    vectors, labels, _ = load_split_vectors(output_dir, split_name)
    return predict_gbdt(model, vectors), labels


def cmd_train(config: RunConfig, which: str) -> list[Path]:
    """Train the requested model(s), then emit history, model, and report files.

    ``ensemble`` trains whichever of the two is not already on disk, resolves
    the mixing weight (fixed or calibrated on the validation split), and
    writes all three reports against the identical test manifest.
    """
    if which not in ("cnn", "gbdt", "ensemble"):
        raise ConfigError(f"train target must be cnn, gbdt, or ensemble, got {which!r}")
    out = Path(config.output_dir)
    manifest = Manifest(out, config)
    manifest.stage_key("extract")  # hard requirement with a clear message
    t0 = time.time()
    written: list[Path] = []
    test_hash = _test_manifest_hash(out)

    def report_for(name: str, probs: np.ndarray, labels: np.ndarray, extra: dict | None = None) -> Path:
        meta = {"test_manifest": test_hash, "seed": config.seed}
        meta.update(extra or {})
        return _emit_report(out, evaluate(probs, labels, model_name=name, metadata=meta))

    if which in ("cnn", "ensemble"):
        cnn_path = out / "models" / "cnn.afenmodl"
        if which == "cnn" or not cnn_path.is_file():
            written.extend(train_cnn(config, manifest))
    if which in ("gbdt", "ensemble"):
        gbdt_path = out / "models" / "gbdt.afengbdt"
        if which == "gbdt" or not gbdt_path.is_file():
            written.extend(train_gbdt(config, manifest))

    if which == "cnn":
        probs, labels = _cnn_probs(out, "test")
        written.append(report_for("cnn", probs, labels))
    elif which == "gbdt":
        probs, labels = _gbdt_probs(out, "test")
        written.append(report_for("gbdt", probs, labels))
    else:
        p_cnn, labels = _cnn_probs(out, "test")
        p_gbdt, _ = _gbdt_probs(out, "test")
        if config.ensemble_mode == "calibrated":
            vc, val_labels = _cnn_probs(out, "val")
            vg, _ = _gbdt_probs(out, "val")
            if len(val_labels) == 0:
                raise ConfigError("calibrated ensemble mode needs a nonempty validation split")
            weight = calibrate_weight(vc, vg, val_labels)
        else:
            weight = config.ensemble_weight
        spec = EnsembleSpec(weight)
        fused = soft_vote(p_cnn, p_gbdt, spec)
        ens_meta = {"weight_cnn": weight, "mode": config.ensemble_mode}
        models_dir = out / "models"
        models_dir.mkdir(parents=True, exist_ok=True)
        ens_path = models_dir / "ensemble.json"
        persist.write_json(ens_path, ens_meta)
        written.append(ens_path)
        written.append(report_for("cnn", p_cnn, labels))
        written.append(report_for("gbdt", p_gbdt, labels))
        written.append(report_for("ensemble", fused, labels, ens_meta))

    key = persist.sha256_text(
        f"train:{which}:" + manifest.stage_key("extract") + _config_slice(
            config,
            ["seed", "cnn_epochs", "cnn_batch_size", "cnn_learning_rate", "cnn_dropout",
             "gbdt_rounds", "gbdt_learning_rate", "gbdt_max_depth",
             "gbdt_min_child_weight", "gbdt_reg_lambda", "gbdt_gamma",
             "ensemble_mode", "ensemble_weight"],
        )
    )
    manifest.record_stage(f"train-{which}", key, written, time.time() - t0)
    return written


def cmd_evaluate(config: RunConfig) -> list[Path]:
    """Recompute the reports for every trained model on the test split."""
    out = Path(config.output_dir)
    manifest = Manifest(out, config)
    test_hash = _test_manifest_hash(out)
    written = []
    have_cnn = (out / "models" / "cnn.afenmodl").is_file()
    have_gbdt = (out / "models" / "gbdt.afengbdt").is_file()
    if not have_cnn and not have_gbdt:
        raise DataError("no trained models found; run the train stage first")
    p_cnn = p_gbdt = None
    labels = None
    if have_cnn:
        p_cnn, labels = _cnn_probs(out, "test")
        written.append(_emit_report(out, evaluate(
            p_cnn, labels, model_name="cnn", metadata={"test_manifest": test_hash})))
    if have_gbdt:
        p_gbdt, labels = _gbdt_probs(out, "test")
        written.append(_emit_report(out, evaluate(
            p_gbdt, labels, model_name="gbdt", metadata={"test_manifest": test_hash})))
    ens_meta_path = out / "models" / "ensemble.json"
    if have_cnn and have_gbdt and ens_meta_path.is_file():
        meta = json.loads(ens_meta_path.read_text())
        fused = soft_vote(p_cnn, p_gbdt, EnsembleSpec(meta["weight_cnn"]))
        meta["test_manifest"] = test_hash
        written.append(_emit_report(out, evaluate(fused, labels, model_name="ensemble", metadata=meta)))
    manifest.save()
    return written


def bundle_to_batch(bundles: list) -> dict[str, np.ndarray]:
    """Stack feature bundles into the per-branch tensors the network expects."""
    return {
        kind: np.stack([np.asarray(getattr(b, kind), dtype=np.float32)[:, :, None] for b in bundles])
        for kind in FEATURE_ORDER
    }


def cmd_predict(model_dir: str | Path, wav_path: str | Path, which: str = "ensemble",
                top_k: int = 3) -> list[dict]:
    """Classify one WAV: standardize, extract, forward; returns the top-k list."""
    model_dir = Path(model_dir)
    clip = standardize_clip(read_wav(wav_path))
    bundle = extract_bundle(clip)
    p_cnn = p_gbdt = None
    if which in ("cnn", "ensemble"):
        cnn = persist.load_cnn_model(model_dir / "cnn.afenmodl")
        p_cnn = cnn.forward(bundle_to_batch([bundle]))
    if which in ("gbdt", "ensemble"):
        gbdt_model = persist.load_gbdt_model(model_dir / "gbdt.afengbdt")
        p_gbdt = predict_gbdt(gbdt_model, bundle.gbdt_vector[None, :])
    if which == "cnn":
        probs = p_cnn
    elif which == "gbdt":
        probs = p_gbdt
    elif which == "ensemble":
        meta_path = model_dir / "ensemble.json"
        weight = json.loads(meta_path.read_text())["weight_cnn"] if meta_path.is_file() else 0.5
        probs = soft_vote(p_cnn, p_gbdt, EnsembleSpec(weight))
    else:
        raise ConfigError(f"unknown model {which!r}")
    row = probs[0]
    order = np.argsort(-row, kind="stable")[:top_k]
    return [{"label": DIAGNOSIS_CLASSES[i], "probability": float(row[i])} for i in order]
