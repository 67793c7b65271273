"""Run configuration shared by the CLI commands.

Every numeric default is the pipeline's documented operating point: cut
threshold 27, gradual thresholds 0.45 / 0.50, stitch thresholds alpha 0.9,
beta 0.7, gamma 0.8, 50 histogram bins with 1e-9 smoothing.  The resolved
config is echoed into output artifacts for provenance.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .curation import DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_GAMMA
from .detect import (
    DEFAULT_ALL_THRESHOLD,
    DEFAULT_CUT_THRESHOLD,
    DEFAULT_SIGNIFICANCE_FLOOR,
    DEFAULT_SINGLE_THRESHOLD,
)
from .errors import ValidationError
from .metrics import DEFAULT_BINS, DEFAULT_EPSILON


@dataclass(frozen=True)
class RunConfig:
    cut_threshold: float = DEFAULT_CUT_THRESHOLD
    single_threshold: float = DEFAULT_SINGLE_THRESHOLD
    all_threshold: float = DEFAULT_ALL_THRESHOLD
    significance_floor: float = DEFAULT_SIGNIFICANCE_FLOOR
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA
    shot_extractor: str = "builtin-v1"
    subject_extractor: str = "builtin-center"
    background_extractor: str = "builtin-border"
    layer_policy: str = "all"
    bins: int = DEFAULT_BINS
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0

    def to_json_obj(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**obj)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid config JSON: {exc}") from exc
        return cls.from_json_obj(obj)
