"""
Per-shape cache directories: eigensystem, descriptor fields and patch operator records,
plus a manifest carrying the content hash used to skip up-to-date shapes.
"""
import hashlib
import json
import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from app.core import paths
from app.core.errors import CacheFormatError, CacheLockedError, MissingCacheError
from app.db import cache
from app.models.charting import PatchOperator
from app.models.mesh import VertexAreas
from app.models.network import Model
from app.models.spectral import DescriptorField, Eigensystem, Provenance
from app.services.network import build_model

logger = logging.getLogger(__name__)

FEATURE_FILES = {
    Provenance.GEOVEC: paths.GEOVEC_FILE,
    Provenance.HKS: paths.HKS_FILE,
}


def content_hash(mesh_path: Union[str, Path], settings: Dict[str, Any]) -> str:
    """Hash of the mesh file bytes and the settings that shape the cached data."""
    digest = hashlib.blake2b(digest_size=20)
    digest.update(Path(mesh_path).read_bytes())
    digest.update(json.dumps(settings, sort_keys=True).encode("utf-8"))
    return digest.hexdigest()


class CacheStorage:
    """Reads and writes the cache tree below <output_dir>/cache."""

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)
        self.root = paths.cache_dir(self.output_dir)

    def shape_dir(self, name: str) -> Path:
        return paths.shape_cache_dir(self.output_dir, name)

    @contextmanager
    def lock(self):
        """Advisory exclusive lock on the cache directory."""
        self.root.mkdir(parents=True, exist_ok=True)
        lock_path = self.root / paths.LOCK_NAME
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise CacheLockedError(
                f"cache directory {self.root} is locked",
                hint=f"another command is running; remove {lock_path} if it crashed",
            )
        try:
            os.write(fd, str(os.getpid()).encode("ascii"))
            os.close(fd)
            yield
        finally:
            lock_path.unlink(missing_ok=True)

    # Manifest

    def manifest(self, name: str) -> Optional[Dict[str, Any]]:
        path = self.shape_dir(name) / paths.MANIFEST_FILE
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            logger.warning("Ignoring unreadable manifest %s: %s", path, e)
            return None

    def require_manifest(self, name: str) -> Dict[str, Any]:
        manifest = self.manifest(name)
        if manifest is None:
            raise MissingCacheError(f"no cache for shape {name!r} under {self.root}")
        return manifest

    def is_fresh(self, name: str, digest: str) -> bool:
        manifest = self.manifest(name)
        if manifest is None or manifest.get("hash") != digest:
            return False
        return all((self.shape_dir(name) / f).exists() for f in manifest.get("files", []))

    def write_manifest(self, name: str, digest: str, files, extra: Dict[str, Any]) -> None:
        body = {"hash": digest, "files": sorted(files), **extra}
        cache.atomic_write_text(self.shape_dir(name) / paths.MANIFEST_FILE, json.dumps(body, indent=2, sort_keys=True))

    def _path(self, name: str, filename: str) -> Path:
        path = self.shape_dir(name) / filename
        if not path.exists():
            raise MissingCacheError(f"missing cache file {path}")
        return path

    # Eigensystem

    def save_eigensystem(self, name: str, eig: Eigensystem) -> str:
        record = cache.eigensystem_record(
            eig.eigenvalues, eig.eigenfunctions, eig.mass.areas, {"total_area": eig.mass.total}
        )
        cache.write_record(self.shape_dir(name) / paths.EIGENSYSTEM_FILE, record)
        return paths.EIGENSYSTEM_FILE

    def load_eigensystem(self, name: str) -> Eigensystem:
        record = cache.read_record(self._path(name, paths.EIGENSYSTEM_FILE))
        eigenvalues, eigenfunctions, areas = cache.read_eigensystem(record)
        total = float(record.metadata.get("total_area", areas.sum()))
        return Eigensystem(eigenvalues, eigenfunctions, VertexAreas(areas=areas, total=total))

    # Descriptor fields

    def save_field(self, name: str, field: DescriptorField) -> str:
        filename = FEATURE_FILES[field.provenance]
        record = cache.dense_record(field.values, {"provenance": field.provenance.value})
        cache.write_record(self.shape_dir(name) / filename, record)
        return filename

    def load_field(self, name: str, provenance: Provenance) -> DescriptorField:
        record = cache.read_record(self._path(name, FEATURE_FILES[provenance]))
        values = cache.read_dense(record)
        stored = record.metadata.get("provenance", provenance.value)
        if stored != provenance.value:
            raise CacheFormatError(f"{name}: expected a {provenance.value} field, found {stored}")
        return DescriptorField(values, provenance)

    # Patch operator

    def save_patch_operator(self, name: str, op: PatchOperator) -> str:
        meta = {
            "n_rho": op.n_rho,
            "n_theta": op.n_theta,
            "disc_radius": op.disc_radius,
            "sigma_rho": op.sigma_rho,
            "sigma_theta": op.sigma_theta,
            "area_weighted": op.area_weighted,
            "degenerate": list(op.degenerate),
        }
        cache.write_record(self.shape_dir(name) / paths.PATCH_OPERATOR_FILE, cache.sparse_record(op.matrix, meta))
        return paths.PATCH_OPERATOR_FILE

    def load_patch_operator(self, name: str) -> PatchOperator:
        record = cache.read_record(self._path(name, paths.PATCH_OPERATOR_FILE))
        meta = record.metadata
        return PatchOperator(
            matrix=cache.read_sparse(record),
            n_rho=int(meta["n_rho"]),
            n_theta=int(meta["n_theta"]),
            disc_radius=float(meta["disc_radius"]),
            sigma_rho=float(meta["sigma_rho"]),
            sigma_theta=float(meta["sigma_theta"]),
            area_weighted=bool(meta.get("area_weighted", False)),
            degenerate=tuple(int(v) for v in meta.get("degenerate", [])),
        )


def model_metadata(model: Model) -> Dict[str, Any]:
    return {
        "architecture": list(model.architecture),
        "input_dim": model.input_dim,
        "n_rho": model.n_rho,
        "n_theta": model.n_theta,
        "n_reference": model.n_reference,
        "bias": any(spec.bias for spec in model.layers),
    }


def save_model(path: Union[str, Path], model: Model, extra: Optional[Dict[str, Any]] = None) -> Path:
    meta = {**model_metadata(model), **(extra or {})}
    return cache.write_record(path, cache.model_record(model.params.values, meta))


def load_model(path: Union[str, Path]) -> Model:
    path = Path(path)
    if not path.exists():
        raise MissingCacheError(f"missing checkpoint {path}", step="train")
    values, meta = cache.read_model(cache.read_record(path))
    try:
        model = build_model(
            meta["architecture"],
            int(meta["input_dim"]),
            int(meta["n_rho"]),
            int(meta["n_theta"]),
            meta.get("n_reference"),
            bool(meta.get("bias", False)),
        )
    except KeyError as e:
        raise CacheFormatError(f"{path}: checkpoint metadata lacks {e}")
    if model.params.size != len(values):
        raise CacheFormatError(f"{path}: {len(values)} parameters stored, architecture needs {model.params.size}")
    return model.with_params(model.params.with_values(np.array(values)))
