"""
Data models for datasets, metrics and training logs.
"""
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

IGNORE_ID = 255


# ============ Domain Models ============

class ClassStyle(BaseModel):
    """How one semantic class is drawn by the scene generator."""
    name: str
    shape: Literal["sky", "ground", "rectangle", "disc", "triangle", "hexagon"]
    color: Tuple[float, float, float]
    private: bool = False              # target-only class, labeled as unknown
    max_instances: int = Field(4, ge=0)


def default_palette() -> List[ClassStyle]:
    return [
        ClassStyle(name="sky", shape="sky", color=(0.55, 0.75, 0.95), max_instances=0),
        ClassStyle(name="road", shape="ground", color=(0.35, 0.33, 0.32), max_instances=0),
        ClassStyle(name="building", shape="rectangle", color=(0.70, 0.45, 0.35)),
        ClassStyle(name="car", shape="disc", color=(0.15, 0.25, 0.75)),
        ClassStyle(name="vegetation", shape="triangle", color=(0.20, 0.60, 0.20)),
        ClassStyle(name="obstacle", shape="hexagon", color=(0.90, 0.80, 0.10), private=True, max_instances=2),
    ]


class DomainSpec(BaseModel):
    """Parameters of one domain of the synthetic benchmark."""
    domain: Literal["source", "target"]
    palette: List[ClassStyle] = Field(default_factory=default_palette)
    warp_amplitude: float = Field(0.0, ge=0.0, le=0.25)   # fraction of image height
    brightness_offset: float = Field(0.0, ge=-0.5, le=0.5)
    fog_weight: float = Field(0.0, ge=0.0, le=1.0)
    hue_rotation: float = 0.0                             # degrees
    private_enabled: bool = False
    min_private_instances: int = Field(1, ge=0)

    @model_validator(mode="after")
    def _check_label_space(self) -> "DomainSpec":
        if self.domain == "source" and self.private_enabled:
            raise ValueError("private classes can only be enabled on the target domain")
        kinds = [c.shape for c in self.palette]
        if kinds.count("sky") != 1 or kinds.count("ground") != 1:
            raise ValueError("palette needs exactly one sky and one ground class")
        seen_private = False
        for style in self.palette:
            if style.private:
                seen_private = True
            elif seen_private:
                raise ValueError("base classes must precede private classes in the palette")
        return self

    @property
    def base_classes(self) -> List[ClassStyle]:
        return [c for c in self.palette if not c.private]

    @property
    def num_base(self) -> int:
        return len(self.base_classes)

    @property
    def unknown_id(self) -> int:
        return self.num_base

    @property
    def class_names(self) -> List[str]:
        return [c.name for c in self.base_classes] + ["unknown"]


WEATHER_PRESETS: Dict[str, Dict[str, float]] = {
    "clear": {"brightness_offset": 0.0, "fog_weight": 0.0, "hue_rotation": 0.0},
    "fog": {"brightness_offset": 0.05, "fog_weight": 0.35, "hue_rotation": 0.0},
    "dusk": {"brightness_offset": -0.2, "fog_weight": 0.0, "hue_rotation": 20.0},
}


def source_spec() -> DomainSpec:
    """Perspective source domain: no distortion, no private class."""
    return DomainSpec(domain="source")


def target_spec(weather: str = "fog", warp_amplitude: float = 0.1, private: bool = True) -> DomainSpec:
    """Distorted target domain with weather shift and the private class enabled."""
    if weather not in WEATHER_PRESETS:
        raise ValueError(f"Unknown weather preset {weather!r}; choose from {sorted(WEATHER_PRESETS)}")
    return DomainSpec(
        domain="target",
        warp_amplitude=warp_amplitude,
        private_enabled=private,
        **WEATHER_PRESETS[weather],
    )


class DatasetMeta(BaseModel):
    """Contents of `meta.json` next to a dataset split."""
    class_names: List[str]
    num_base: int = Field(..., ge=1)
    unknown_id: int
    ignore_id: int = IGNORE_ID
    spec: Dict[str, Any]
    split: str
    count: int = Field(..., ge=0)
    seed: int = 0
    height: int
    width: int

    @model_validator(mode="after")
    def _check_ids(self) -> "DatasetMeta":
        if self.unknown_id != self.num_base:
            raise ValueError(f"unknown_id ({self.unknown_id}) must equal num_base ({self.num_base})")
        if len(self.class_names) != self.num_base + 1:
            raise ValueError(
                f"class_names has {len(self.class_names)} entries, expected num_base + 1 = {self.num_base + 1}"
            )
        return self

    @property
    def domain(self) -> str:
        return self.spec.get("domain", "target")


# ============ Result Models ============

class MetricsReport(BaseModel):
    """Open-set segmentation metrics, all in percent."""
    per_class_iou: Dict[str, Optional[float]]
    common: float = Field(..., ge=0.0, le=100.0)
    private: float = Field(..., ge=0.0, le=100.0)
    h_score: float = Field(..., ge=0.0, le=100.0)
    miou: float = Field(0.0, ge=0.0, le=100.0)
    pixels: int = Field(..., ge=0)
    step: int = 0
    config_hash: str = ""
    common_defined: bool = True
    excluded_classes: List[str] = Field(default_factory=list)

    @field_validator("per_class_iou")
    @classmethod
    def validate_iou(cls, v):
        for name, value in v.items():
            if value is not None and not 0.0 <= value <= 100.0:
                raise ValueError(f"IoU for {name} out of range: {value}")
        return v


class LossBreakdown(BaseModel):
    """Per-step loss components as written to the metric log."""
    step: int
    lr: float
    seg: float
    mixup: float
    graph_match: float = 0.0
    graph_edge: float = 0.0
    graph_unknown: float = 0.0
    graph: float = 0.0
    total: float
    skipped: bool = False
