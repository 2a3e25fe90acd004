"""Corpus ingestion: recording-name metadata, the patient diagnosis table,
and seeded stratified train/validation/test splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    DuplicatePatient,
    EmptyCorpus,
    MalformedName,
    UnknownLabel,
)
from .metrics import DIAGNOSIS_CLASSES
from .rng import RandomStream

CHEST_LOCATIONS = ("Tc", "Al", "Ar", "Pl", "Pr", "Ll", "Lr")
ACQUISITION_MODES = ("sc", "mc")

LABEL_TO_INDEX = {name: i for i, name in enumerate(DIAGNOSIS_CLASSES)}
_CANONICAL = {name.lower(): name for name in DIAGNOSIS_CLASSES}


@dataclass(frozen=True)
class RecordingMeta:
    """Fields encoded in a recording's file name:
    patientID_recordingIndex_chestLocation_acquisitionMode_equipment."""

    patient_id: int
    recording_index: str
    chest_location: str
    acquisition_mode: str
    equipment: str
    path: Path | None = None

    def stem(self) -> str:
        return "_".join(
            [
                str(self.patient_id),
                self.recording_index,
                self.chest_location,
                self.acquisition_mode,
                self.equipment,
            ]
        )


def parse_icbhi_filename(name: str) -> RecordingMeta:
    """Parse a corpus file name; unknown location or mode codes are rejected."""
    stem = Path(name).stem
    parts = stem.split("_")
    if len(parts) != 5:
        raise MalformedName(f"{name!r}: expected 5 underscore-separated fields, got {len(parts)}")
    pid_text, rec_index, location, mode, equipment = parts
    if not pid_text.isdigit():
        raise MalformedName(f"{name!r}: patient id {pid_text!r} is not an integer")
    if location not in CHEST_LOCATIONS:
        raise MalformedName(f"{name!r}: unknown chest location {location!r}")
    if mode not in ACQUISITION_MODES:
        raise MalformedName(f"{name!r}: unknown acquisition mode {mode!r}")
    if not rec_index or not equipment:
        raise MalformedName(f"{name!r}: empty field")
    return RecordingMeta(int(pid_text), rec_index, location, mode, equipment)


def normalize_label(text: str) -> str:
    key = text.strip().lower()
    if key not in _CANONICAL:
        raise UnknownLabel(f"unknown diagnosis label {text!r}")
    return _CANONICAL[key]


def load_diagnosis_table(path: str | Path) -> dict[int, str]:
    """patient id -> canonical diagnosis from a two-column CSV."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"diagnosis table not found at expected path {path}")
    table: dict[int, str] = {}
    with path.open(newline="") as fp:
        for row in csv.reader(fp):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise UnknownLabel(f"diagnosis row {row!r} needs patient id and label")
            pid_text = row[0].strip()
            if not pid_text.isdigit():
                raise UnknownLabel(f"bad patient id {pid_text!r} in diagnosis table")
            pid = int(pid_text)
            label = normalize_label(row[1])
            if pid in table and table[pid] != label:
                raise DuplicatePatient(f"patient {pid} has conflicting labels {table[pid]} / {label}")
            table[pid] = label
    return table


@dataclass(frozen=True)
class Recording:
    meta: RecordingMeta
    label: str

    @property
    def label_index(self) -> int:
        return LABEL_TO_INDEX[self.label]


def scan_corpus(corpus_dir: str | Path) -> list[Recording]:
    """All WAV recordings under a corpus directory joined with their diagnoses."""
    corpus_dir = Path(corpus_dir)
    diagnosis = load_diagnosis_table(corpus_dir / "patient_diagnosis.csv")
    recordings = []
    for wav in sorted(corpus_dir.rglob("*.wav")):
        meta = parse_icbhi_filename(wav.name)
        meta = RecordingMeta(
            meta.patient_id, meta.recording_index, meta.chest_location,
            meta.acquisition_mode, meta.equipment, path=wav,
        )
        if meta.patient_id not in diagnosis:
            raise DataError(f"no diagnosis for patient {meta.patient_id} ({wav.name})")
        recordings.append(Recording(meta=meta, label=diagnosis[meta.patient_id]))
    if not recordings:
        raise EmptyCorpus(f"no WAV recordings under {corpus_dir}")
    return recordings


@dataclass
class DatasetSplit:
    train: list[Recording]
    validation: list[Recording]
    test: list[Recording]
    test_fraction: float
    val_fraction: float
    seed: int

    def assert_partition(self, corpus: list[Recording]) -> None:
        def keys(items):
            return {str(r.meta.path) for r in items}

        tr, va, te = keys(self.train), keys(self.validation), keys(self.test)
        if tr & va or tr & te or va & te:
            raise DataError("split subsets overlap")
        if tr | va | te != keys(corpus):
            raise DataError("split subsets do not cover the corpus")


def stratified_split(
    corpus: list[Recording],
    test_fraction: float = 0.2,
    val_fraction: float = 0.1,
    seed: int = 0,
    by_patient: bool = False,
) -> DatasetSplit:
    """Per-class shuffled proportional allocation, deterministic in ``seed``.

    ``val_fraction`` is carved out of the train portion. Classes with a single
    recording (or patient, with ``by_patient``) go entirely to train.
    """
    if not corpus:
        raise EmptyCorpus("cannot split an empty corpus")
    stream = RandomStream(seed).substream("split")
    by_class: dict[str, list] = {}
    if by_patient:
        groups: dict[tuple[str, int], list[Recording]] = {}
        for rec in corpus:
            groups.setdefault((rec.label, rec.meta.patient_id), []).append(rec)
        for (label, _pid), members in sorted(groups.items()):
            by_class.setdefault(label, []).append(members)
    else:
        for rec in sorted(corpus, key=lambda r: str(r.meta.path)):
            by_class.setdefault(rec.label, []).append([rec])
    train: list[Recording] = []
    validation: list[Recording] = []
    test: list[Recording] = []
    for label in sorted(by_class):
        units = by_class[label]
        order = stream.substream(label).permutation(len(units))
        units = [units[i] for i in order]
        if len(units) == 1:
            train.extend(units[0])
            continue
        n_test = int(round(test_fraction * len(units)))
        n_test = min(n_test, len(units) - 1)
        test_units = units[:n_test]
        pool = units[n_test:]
        n_val = int(round(val_fraction * len(pool)))
        n_val = min(n_val, max(len(pool) - 1, 0))
        val_units = pool[:n_val]
        train_units = pool[n_val:]
        for u in test_units:
            test.extend(u)
        for u in val_units:
            validation.extend(u)
        for u in train_units:
            train.extend(u)
    split = DatasetSplit(
        train=train,
        validation=validation,
        test=test,
        test_fraction=test_fraction,
        val_fraction=val_fraction,
        seed=seed,
    )
    split.assert_partition(corpus)
    return split
