"""Run configuration: JSON file keys, CLI overrides, and validation.

Precedence: built-in defaults < config file < CLI flags < (seed only)
the AFEN_SEED environment variable when nothing else set it.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError

SEED_ENV_VAR = "AFEN_SEED"


@dataclass
class RunConfig:
    corpus_dir: str = ""
    output_dir: str = ""
    seed: int = 0
    # augmentation (training split only)
    augment_snr_db: float = 20.0
    augment_band_lo_hz: float = 100.0
    augment_band_hi_hz: float = 2000.0
    augment_band_order: int = 4
    augment_shift_fraction: float = 0.2
    augment_pitch_semitones: float = 2.0
    class_balanced_augment: bool = False
    # splits
    test_fraction: float = 0.2
    val_fraction: float = 0.1
    split_by: str = "recording"  # or "patient"
    # network training
    cnn_epochs: int = 100
    cnn_batch_size: int = 32
    cnn_learning_rate: float = 1e-3
    cnn_dropout: float = 0.3
    # boosting
    gbdt_rounds: int = 400
    gbdt_learning_rate: float = 0.3
    gbdt_max_depth: int = 6
    gbdt_min_child_weight: float = 1.0
    gbdt_reg_lambda: float = 1.0
    gbdt_gamma: float = 0.0
    # ensemble
    ensemble_mode: str = "fixed"  # or "calibrated"
    ensemble_weight: float = 0.5

    def validate(self, need_corpus: bool = True) -> None:
        if not self.output_dir:
            raise ConfigError("output_dir is required")
        if need_corpus:
            if not self.corpus_dir:
                raise ConfigError("corpus_dir is required")
            if not Path(self.corpus_dir).is_dir():
                raise ConfigError(f"corpus_dir {self.corpus_dir} does not exist")
        if self.split_by not in ("recording", "patient"):
            raise ConfigError(f"split_by must be 'recording' or 'patient', got {self.split_by!r}")
        if self.ensemble_mode not in ("fixed", "calibrated"):
            raise ConfigError(f"ensemble_mode must be 'fixed' or 'calibrated', got {self.ensemble_mode!r}")
        if not 0.0 <= self.ensemble_weight <= 1.0:
            raise ConfigError("ensemble_weight must be in [0, 1]")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must be in (0, 1)")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Assemble the effective config from file values and explicit overrides."""
    values: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} not found")
        try:
            loaded = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {p} must hold a JSON object")
        for key, value in loaded.items():
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = value
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = value
    if "seed" not in values:
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            try:
                values["seed"] = int(env_seed)
            except ValueError as exc:
                raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from exc
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
