"""
OFF / OBJ reading and writing for triangle meshes.
Writers emit shortest round-tripping float text, so read(write(m)) is bit-identical.
"""
import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

from app.core.errors import MeshParseError
from app.db.cache import atomic_write_text
from app.models.mesh import Mesh

logger = logging.getLogger(__name__)

FORMATS = ("OFF", "OBJ")


def _infer_format(path: Path, fmt: Optional[str]) -> str:
    if fmt:
        fmt = fmt.upper()
    else:
        fmt = path.suffix.lstrip(".").upper()
    if fmt not in FORMATS:
        raise ValueError(f"Unsupported mesh format {fmt!r}; expected one of {FORMATS}")
    return fmt


def _tokens(text: str):
    """Yield (line_number, column, tokens) for non-empty, non-comment lines."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        stripped = line.strip()
        if not stripped:
            continue
        column = len(line) - len(line.lstrip()) + 1
        yield lineno, column, stripped.split()


def _float(token: str, lineno: int, column: int, path: Optional[str]) -> float:
    try:
        return float(token)
    except ValueError:
        raise MeshParseError(f"expected a number, got {token!r}", lineno, column, path)


def _int(token: str, lineno: int, column: int, path: Optional[str]) -> int:
    try:
        return int(token)
    except ValueError:
        raise MeshParseError(f"expected an integer, got {token!r}", lineno, column, path)


def parse_off(text: str, path: Optional[str] = None) -> Tuple[List[List[float]], List[List[int]]]:
    lines = _tokens(text)
    try:
        lineno, column, head = next(lines)
    except StopIteration:
        raise MeshParseError("empty file", 1, 1, path)
    if head[0] != "OFF":
        raise MeshParseError(f"expected 'OFF' header, got {head[0]!r}", lineno, column, path)
    counts = head[1:]
    if not counts:
        try:
            lineno, column, counts = next(lines)
        except StopIteration:
            raise MeshParseError("missing vertex/face counts", lineno + 1, 1, path)
    if len(counts) < 2:
        raise MeshParseError("expected 'N F [E]' counts", lineno, column, path)
    n_vertices = _int(counts[0], lineno, column, path)
    n_faces = _int(counts[1], lineno, column, path)

    vertices: List[List[float]] = []
    faces: List[List[int]] = []
    for lineno, column, toks in lines:
        if len(vertices) < n_vertices:
            if len(toks) < 3:
                raise MeshParseError("vertex line needs 3 coordinates", lineno, column, path)
            vertices.append([_float(t, lineno, column, path) for t in toks[:3]])
        elif len(faces) < n_faces:
            k = _int(toks[0], lineno, column, path)
            if k != 3:
                raise MeshParseError(f"only triangles are supported, got a {k}-gon", lineno, column, path)
            if len(toks) < 4:
                raise MeshParseError("face line needs 3 indices", lineno, column, path)
            faces.append([_int(t, lineno, column, path) for t in toks[1:4]])
        else:
            raise MeshParseError("unexpected content after the declared faces", lineno, column, path)

    if len(vertices) != n_vertices or len(faces) != n_faces:
        raise MeshParseError(
            f"header declares {n_vertices} vertices / {n_faces} faces, "
            f"file contains {len(vertices)} / {len(faces)}",
            lineno,
            1,
            path,
        )
    return vertices, faces


def parse_obj(text: str, path: Optional[str] = None) -> Tuple[List[List[float]], List[List[int]]]:
    vertices: List[List[float]] = []
    faces: List[List[int]] = []
    for lineno, column, toks in _tokens(text):
        tag = toks[0]
        if tag == "v":
            if len(toks) < 4:
                raise MeshParseError("vertex record needs 3 coordinates", lineno, column, path)
            vertices.append([_float(t, lineno, column, path) for t in toks[1:4]])
        elif tag == "f":
            refs = toks[1:]
            if len(refs) != 3:
                raise MeshParseError(f"only triangles are supported, got {len(refs)} indices", lineno, column, path)
            face = []
            for ref in refs:
                # texture / normal sub-indices are ignored
                idx = _int(ref.split("/", 1)[0], lineno, column, path)
                if idx < 0:
                    idx = len(vertices) + idx + 1
                face.append(idx - 1)
            faces.append(face)
    return vertices, faces


def load_mesh(path: Union[str, Path], fmt: Optional[str] = None) -> Mesh:
    """Read and validate an OFF or OBJ triangle mesh."""
    path = Path(path)
    fmt = _infer_format(path, fmt)
    text = path.read_text(encoding="utf-8")
    parser = parse_off if fmt == "OFF" else parse_obj
    vertices, faces = parser(text, str(path))
    mesh = Mesh(vertices, faces)
    logger.debug("Loaded %s: %d vertices, %d faces", path.name, mesh.n_vertices, mesh.n_faces)
    return mesh


def format_off(mesh: Mesh) -> str:
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} 0"]
    lines += [" ".join(repr(float(c)) for c in row) for row in mesh.vertices.tolist()]
    lines += ["3 " + " ".join(str(i) for i in row) for row in mesh.faces.tolist()]
    return "\n".join(lines) + "\n"


def format_obj(mesh: Mesh) -> str:
    lines = ["v " + " ".join(repr(float(c)) for c in row) for row in mesh.vertices.tolist()]
    lines += ["f " + " ".join(str(i + 1) for i in row) for row in mesh.faces.tolist()]
    return "\n".join(lines) + "\n"


def write_mesh(mesh: Mesh, path: Union[str, Path], fmt: Optional[str] = None) -> Path:
    path = Path(path)
    fmt = _infer_format(path, fmt)
    text = format_off(mesh) if fmt == "OFF" else format_obj(mesh)
    atomic_write_text(path, text)
    return path
