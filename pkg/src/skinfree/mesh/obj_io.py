"""
Wavefront OBJ reading and writing.

Only `v`, `vn` and `f` records are honoured; other records are skipped with a
warning. Faces must be triangles.
"""

import logging
import os
from typing import List

import numpy as np

from ..errors import MeshFormatError
from .trimesh import TriMesh

logger = logging.getLogger(__name__)


def _parse_index(token: str, vertex_count: int, path: str, line_no: int) -> int:
    head = token.split("/")[0]
    try:
        index = int(head)
    except ValueError:
        raise MeshFormatError(f"bad face index '{token}'", path, line_no)
    # OBJ indices are 1-based; negative values count back from the last vertex.
    resolved = index - 1 if index > 0 else vertex_count + index
    if index == 0 or resolved < 0 or resolved >= vertex_count:
        raise MeshFormatError(
            f"face index {index} out of range for {vertex_count} vertices", path, line_no
        )
    return resolved


def load_obj(path: str, name: str = None) -> TriMesh:
    """
    Read a triangle mesh from an OBJ file.

    Args:
        path: Path to the OBJ file
        name: Mesh label (defaults to the file stem)

    Returns:
        TriMesh with vertices in file order

    Raises:
        FileNotFoundError: If the file doesn't exist
        MeshFormatError: On malformed records, non-triangle faces or bad indices
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"OBJ file not found: {path}")

    vertices: List[List[float]] = []
    faces: List[List[int]] = []
    skipped = set()

    with open(path, "r") as f:
        for line_no, line in enumerate(f, start=1):
            tokens = line.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            record = tokens[0]

            if record in ("v", "vn"):
                if len(tokens) < 4:
                    raise MeshFormatError(f"'{record}' needs 3 coordinates", path, line_no)
                try:
                    xyz = [float(t) for t in tokens[1:4]]
                except ValueError:
                    raise MeshFormatError(f"unparsable '{record}' record", path, line_no)
                if not np.all(np.isfinite(xyz)):
                    raise MeshFormatError(f"non-finite '{record}' value", path, line_no)
                # Normals are recomputed from geometry, so vn is only validated.
                if record == "v":
                    vertices.append(xyz)

            elif record == "f":
                if len(tokens) != 4:
                    raise MeshFormatError(
                        f"face with {len(tokens) - 1} vertices; only triangles are supported",
                        path, line_no,
                    )
                faces.append([_parse_index(t, len(vertices), path, line_no) for t in tokens[1:]])

            elif record not in skipped:
                skipped.add(record)
                logger.warning("%s:%d: ignoring '%s' records", path, line_no, record)

    stem = os.path.splitext(os.path.basename(path))[0]
    return TriMesh(
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
        name or stem,
    )


def save_obj(mesh: TriMesh, path: str):
    """
    Write a mesh as OBJ with 9 significant digits per coordinate.

    The output is a pure function of the mesh, so saving twice gives
    byte-identical files.

    Args:
        mesh: Mesh to write
        path: Output file path
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    lines = [f"# {mesh.name}: {mesh.num_vertices} vertices, {mesh.num_faces} faces"]
    lines.extend("v %.9g %.9g %.9g" % tuple(v) for v in mesh.vertices)
    lines.extend("f %d %d %d" % tuple(face + 1) for face in mesh.faces)

    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
