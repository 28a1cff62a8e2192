"""
Per-shape preprocessing: normalization, spectrum, descriptors, charts and patch operator.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from app.core.errors import GCNNError
from app.models.charting import PatchOperator
from app.models.learning import ShapeSample
from app.models.mesh import Mesh
from app.models.spectral import DescriptorField, Eigensystem
from app.schemas.experiment import ChartSettings, ExperimentConfig, InputKind, ShapeEntry, SpectralSettings
from app.services.cache_storage import CacheStorage, content_hash
from app.services.charting import chart_is_connected, compute_charts, patch_operator
from app.services.mesh_io import load_mesh
from app.services.mesh_ops import geodesic_diameter, normalize_diameter, vertex_areas
from app.services.spectral import compute_spectrum, default_hks_times, hks
from app.services.spline import geometry_vectors, spline_basis

logger = logging.getLogger(__name__)


@dataclass
class PrecomputeReport:
    computed: List[str] = field(default_factory=list)
    skipped: List[str] = field(default_factory=list)
    failed: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"computed": self.computed, "skipped": self.skipped, "failed": self.failed}


def cache_settings(config: ExperimentConfig) -> dict:
    """Settings that change the cached data of a shape."""
    return {
        "spectral": config.spectral.model_dump(mode="json"),
        "charting": config.charting.model_dump(mode="json"),
        "seed": config.seed,
    }


@dataclass
class PreparedShape:
    """In-memory result of preprocessing one mesh."""

    mesh: Mesh
    scale: float
    diameter: float
    rho0: float
    eigensystem: Eigensystem
    geovec: DescriptorField
    hks: DescriptorField
    patch_operator: PatchOperator

    def sample(
        self,
        name: str,
        input_kind: InputKind = InputKind.GEOVEC,
        ground_truth: Optional[np.ndarray] = None,
        label: Optional[str] = None,
    ) -> ShapeSample:
        features = self.geovec if input_kind is InputKind.GEOVEC else self.hks
        return ShapeSample(
            name=name,
            mesh=self.mesh,
            features=features.values,
            patch_operator=self.patch_operator,
            areas=self.eigensystem.mass.areas,
            rho0=self.rho0,
            ground_truth=ground_truth,
            label=label,
        )


def prepare_shape(
    mesh: Mesh,
    spectral: SpectralSettings,
    charting: ChartSettings,
    seed: int = 0,
    threads: int = 1,
    name: str = "mesh",
) -> PreparedShape:
    if spectral.normalize_diameter:
        mesh, diameter = normalize_diameter(mesh, spectral.diameter_samples, seed)
        scale = 1.0 / diameter
        rho0 = charting.rho0_fraction
    else:
        diameter = geodesic_diameter(mesh, spectral.diameter_samples, seed)
        scale = 1.0
        rho0 = charting.rho0_fraction * diameter

    areas = vertex_areas(mesh)
    eig = compute_spectrum(mesh, areas, spectral.k, spectral.dense_limit)
    geovec = geometry_vectors(eig, spline_basis(eig, spectral.m, spectral.degree))
    heat = hks(eig, default_hks_times(eig, spectral.hks_count))

    charts = compute_charts(mesh, rho0, threads)
    disconnected = [c.center for c in charts if not chart_is_connected(mesh, c)]
    if disconnected:
        logger.warning("%s: %d charts are not connected: %s", name, len(disconnected), disconnected[:10])
    op = patch_operator(
        mesh,
        charts,
        charting.n_rho,
        charting.n_theta,
        charting.sigma_rho,
        charting.sigma_theta,
        areas.areas if charting.area_weighted else None,
    )
    return PreparedShape(mesh, scale, diameter, rho0, eig, geovec, heat, op)


def precompute_shape(entry: ShapeEntry, config: ExperimentConfig, storage: CacheStorage, digest: str) -> None:
    started = time.monotonic()
    prepared = prepare_shape(
        load_mesh(entry.mesh), config.spectral, config.charting, config.seed, config.threads, entry.name
    )
    eig = prepared.eigensystem
    files = [
        storage.save_eigensystem(entry.name, eig),
        storage.save_field(entry.name, prepared.geovec),
        storage.save_field(entry.name, prepared.hks),
        storage.save_patch_operator(entry.name, prepared.patch_operator),
    ]
    storage.write_manifest(
        entry.name,
        digest,
        files,
        {
            "n_vertices": prepared.mesh.n_vertices,
            "k": eig.k,
            "scale": prepared.scale,
            "diameter": prepared.diameter,
            "rho0": prepared.rho0,
            "degenerate_charts": len(prepared.patch_operator.degenerate),
        },
    )
    logger.info(
        "Precomputed %s: %d vertices, K=%d, rho0=%.4g in %.2fs",
        entry.name,
        prepared.mesh.n_vertices,
        eig.k,
        prepared.rho0,
        time.monotonic() - started,
    )


def precompute_all(config: ExperimentConfig, storage: CacheStorage) -> PrecomputeReport:
    """Process every listed shape; up-to-date caches are skipped, failures do not stop the batch."""
    report = PrecomputeReport()
    settings = cache_settings(config)
    with storage.lock():
        for entry in config.dataset.shapes:
            try:
                digest = content_hash(entry.mesh, settings)
                if storage.is_fresh(entry.name, digest):
                    logger.info("Cache for %s is up to date", entry.name)
                    report.skipped.append(entry.name)
                    continue
                precompute_shape(entry, config, storage, digest)
                report.computed.append(entry.name)
            except (GCNNError, OSError, ValueError) as e:
                logger.error("Precompute failed for %s: %s", entry.name, e)
                report.failed[entry.name] = str(e)
    return report
