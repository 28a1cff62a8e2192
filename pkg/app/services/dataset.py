"""
Dataset plumbing between the experiment file, the cache and the training / evaluation code.
"""
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from app.core.errors import ConfigError, InsufficientDataError
from app.db.cache import atomic_write_text
from app.models.learning import ShapeSample
from app.models.spectral import Provenance
from app.schemas.experiment import ExperimentConfig, InputKind, ShapeEntry, Split
from app.services.cache_storage import CacheStorage
from app.services.mesh_io import load_mesh

logger = logging.getLogger(__name__)

INPUT_PROVENANCE = {
    InputKind.GEOVEC: Provenance.GEOVEC,
    InputKind.HKS: Provenance.HKS,
}


def read_ground_truth(path: Union[str, Path], n_vertices: Optional[int] = None) -> np.ndarray:
    """One 0-based reference index per line; line i holds the match of vertex i."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise ConfigError(f"ground-truth file not found: {path}")
    values = []
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        try:
            values.append(int(text))
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: expected an integer vertex index, got {text!r}")
    gt = np.array(values, dtype=np.int64)
    if n_vertices is not None and len(gt) != n_vertices:
        raise ConfigError(f"{path}: {len(gt)} ground-truth entries for a {n_vertices}-vertex mesh")
    if len(gt) and gt.min() < 0:
        raise ConfigError(f"{path}: negative vertex index")
    return gt


def write_ground_truth(path: Union[str, Path], gt: Sequence[int]) -> None:
    atomic_write_text(path, "".join(f"{int(j)}\n" for j in gt))


def shapes_in(config: ExperimentConfig, splits: Sequence[Split]) -> List[ShapeEntry]:
    return [s for s in config.dataset.shapes if s.split in splits]


def reference_entry(config: ExperimentConfig) -> ShapeEntry:
    shapes = config.dataset.shapes
    if not shapes:
        raise InsufficientDataError("dataset lists no shapes")
    if config.dataset.reference is None:
        return shapes[0]
    return next(s for s in shapes if s.name == config.dataset.reference)


def load_sample(entry: ShapeEntry, storage: CacheStorage, input_kind: InputKind = InputKind.GEOVEC) -> ShapeSample:
    """Rebuild a ShapeSample from cached data; the mesh is rescaled as during precompute."""
    manifest = storage.require_manifest(entry.name)
    mesh = load_mesh(entry.mesh)
    scale = float(manifest.get("scale", 1.0))
    if scale != 1.0:
        mesh = mesh.scaled(scale)
    eig = storage.load_eigensystem(entry.name)
    features = storage.load_field(entry.name, INPUT_PROVENANCE[input_kind]).values
    gt = read_ground_truth(entry.ground_truth, mesh.n_vertices) if entry.ground_truth else None
    return ShapeSample(
        name=entry.name,
        mesh=mesh,
        features=features,
        patch_operator=storage.load_patch_operator(entry.name),
        areas=eig.mass.areas,
        rho0=float(manifest["rho0"]),
        ground_truth=gt,
        label=entry.label,
    )


def load_samples(
    config: ExperimentConfig, storage: CacheStorage, splits: Sequence[Split]
) -> List[ShapeSample]:
    return [load_sample(entry, storage, config.model.input) for entry in shapes_in(config, splits)]
