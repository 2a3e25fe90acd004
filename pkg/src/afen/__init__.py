"""Audio feature ensemble toolkit.

Respiratory-sound classification with a five-feature CNN and a boosted-tree
model fused by soft voting; augmentation, feature extraction, both models,
and the evaluation suite are implemented from first principles on numpy.
"""

__version__ = "0.1.0"

from .audio_io import AudioClip, decode_wav, read_wav, standardize_clip, write_wav  # noqa: E402
from .features import FeatureBundle, extract_bundle  # noqa: E402

__all__ = [
    "AudioClip",
    "FeatureBundle",
    "decode_wav",
    "extract_bundle",
    "read_wav",
    "standardize_clip",
    "write_wav",
]
