"""Run configuration: one JSON document fully determines a pipeline run."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

from .features import GlcmSpec
from .slic import SlicParams

CONFIG_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    version: int = CONFIG_VERSION
    # preprocessing
    denoise_radius: int = 1
    unsharp_amount: float = 0.0
    unsharp_radius: int = 1
    # superpixels
    n_segments: int = 50
    compactness: float = 10.0
    slic_max_iters: int = 10
    slic_conv_eps: float = 0.25
    # region growing; None = 0.15 x intensity range of the preprocessed image
    grow_threshold: float | None = None
    # features
    glcm_levels: int = 32
    glcm_distance: int = 1
    glcm_angles: tuple[int, ...] = (0, 45, 90, 135)
    posterior_fraction: float = 0.5
    # classifier / evaluation
    kernel: str = "rbf"
    svm_c: float = 1.0
    svm_gamma: float = 1.0
    svm_coef0: float = 0.0
    svm_tol: float = 1e-3
    svm_max_passes: int = 200
    folds: int = 5
    seed: int = 0
    c_exponents: tuple[float, float, float] = (-8.0, 8.0, 0.4)
    g_exponents: tuple[float, float, float] = (-8.0, 8.0, 0.4)

    def slic_params(self) -> SlicParams:
        return SlicParams(
            n_segments=self.n_segments,
            compactness=self.compactness,
            max_iters=self.slic_max_iters,
            conv_eps=self.slic_conv_eps,
        )

    def glcm_spec(self) -> GlcmSpec:
        return GlcmSpec(
            levels=self.glcm_levels,
            distance=self.glcm_distance,
            angles=tuple(self.glcm_angles),
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        data = json.loads(text)
        if data.get("version") != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {data.get('version')!r}")
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config fields {sorted(extra)}")
        for key in ("glcm_angles", "c_exponents", "g_exponents"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def override(self, **kwargs) -> "PipelineConfig":
        """Copy with the given fields replaced (flag-over-file precedence)."""
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})
