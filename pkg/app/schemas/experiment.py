from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Task(str, Enum):
    DESCRIPTOR = "descriptor"
    CORRESPONDENCE = "correspondence"
    RETRIEVAL = "retrieval"


class InputKind(str, Enum):
    GEOVEC = "geovec"
    HKS = "hks"


class Split(str, Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ShapeEntry(StrictModel):
    name: str
    mesh: str
    ground_truth: Optional[str] = None  # one 0-based reference index per line
    label: Optional[str] = None  # class label for retrieval
    split: Split = Split.TRAIN


class DatasetSettings(StrictModel):
    shapes: List[ShapeEntry] = Field(default_factory=list)
    reference: Optional[str] = None  # shape name used as correspondence reference

    @model_validator(mode="after")
    def _unique_names(self) -> "DatasetSettings":
        names = [s.name for s in self.shapes]
        if len(set(names)) != len(names):
            raise ValueError("shape names must be unique")
        if self.reference is not None and self.reference not in names:
            raise ValueError(f"reference shape {self.reference!r} is not listed in shapes")
        return self


class SpectralSettings(StrictModel):
    k: int = Field(300, ge=2)
    m: int = Field(150, ge=1)
    degree: int = Field(3, ge=0)
    hks_count: int = Field(16, ge=1)
    normalize_diameter: bool = True
    diameter_samples: int = Field(16, ge=1)
    dense_limit: int = Field(1500, ge=1)


class ChartSettings(StrictModel):
    rho0_fraction: float = Field(0.01, gt=0.0)
    n_rho: int = Field(5, ge=2)
    n_theta: int = Field(16, ge=2)
    sigma_rho: Optional[float] = Field(None, gt=0.0)  # default: rho0 / n_rho
    sigma_theta: Optional[float] = Field(None, gt=0.0)  # default: 2 pi / n_theta
    area_weighted: bool = False


class ModelSettings(StrictModel):
    preset: Optional[str] = "gcnn1"
    layers: Optional[List[str]] = None  # explicit layer tokens, overrides preset
    input: InputKind = InputKind.GEOVEC
    bias: bool = False

    @model_validator(mode="after")
    def _preset_or_layers(self) -> "ModelSettings":
        if self.preset is None and self.layers is None:
            raise ValueError("either model.preset or model.layers must be given")
        return self


class TrainConfig(StrictModel):
    task: Task = Task.DESCRIPTOR
    gamma: float = Field(0.5, ge=0.0, le=1.0)
    margin: float = Field(1.0, ge=0.0)
    max_updates: int = Field(2500, ge=0)
    batch_positives: int = Field(32, ge=1)
    batch_negatives: int = Field(32, ge=1)
    batch_vertices: int = Field(256, ge=1)
    decay: float = Field(0.95, gt=0.0, lt=1.0)
    epsilon: float = Field(1e-6, gt=0.0)
    validation_interval: int = Field(100, ge=1)
    log_interval: int = Field(100, ge=1)
    seed: int = Field(0, ge=0)


class ExperimentConfig(StrictModel):
    dataset: DatasetSettings = Field(default_factory=DatasetSettings)
    spectral: SpectralSettings = Field(default_factory=SpectralSettings)
    charting: ChartSettings = Field(default_factory=ChartSettings)
    model: ModelSettings = Field(default_factory=ModelSettings)
    train: TrainConfig = Field(default_factory=TrainConfig)
    output_dir: str = "storage"
    seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)
