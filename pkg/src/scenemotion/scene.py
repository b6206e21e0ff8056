"""Scene geometry: mesh ingestion, surface sampling, exact nearest queries."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptySceneError, MeshFormatError, StateError

MIN_TRIANGLE_AREA = 1e-12  # m^2


@dataclass
class SceneMesh:
    vertices: np.ndarray  # (N, 3)
    faces: np.ndarray     # (F, 3) int
    dropped_faces: int = 0  # degenerate faces removed at load/construction

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(self.vertices) == 0 or len(self.faces) == 0:
            raise EmptySceneError("scene has no usable geometry")
        if not np.all(np.isfinite(self.vertices)):
            raise MeshFormatError("scene vertices contain non-finite coordinates")
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise MeshFormatError("face references an out-of-range vertex")

    def triangle_areas(self):
        tri = self.vertices[self.faces]
        return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass
class PointCloud:
    points: np.ndarray             # (M, 3)
    normals: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)

    def __len__(self):
        return len(self.points)


def make_mesh(vertices, faces):
    """Build a SceneMesh, dropping degenerate (area <= 1e-12) faces."""
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if len(faces):
        if faces.min() < 0 or faces.max() >= len(vertices):
            raise MeshFormatError("face references an out-of-range vertex")
        tri = vertices[faces]
        areas = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
        keep = areas > MIN_TRIANGLE_AREA
        dropped = int((~keep).sum())
        faces = faces[keep]
    else:
        dropped = 0
    return SceneMesh(vertices=vertices, faces=faces, dropped_faces=dropped)


# -- file readers -------------------------------------------------------------

def load_scene(path):
    """Load an OBJ or PLY mesh; degenerate faces are dropped and counted."""
    path = str(path)
    lower = path.lower()
    if lower.endswith(".obj"):
        return _load_obj(path)
    if lower.endswith(".ply"):
        return _load_ply(path)
    raise MeshFormatError(f"{path}: unsupported extension (expected .obj or .ply)")


def _load_obj(path):
    vertices, faces = [], []
    with open(path, "r") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "v":
                if len(parts) < 4:
                    raise MeshFormatError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError as e:
                    raise MeshFormatError(f"{path}:{lineno}: bad vertex coordinate ({e})") from None
            elif parts[0] == "f":
                if len(parts) < 4:
                    raise MeshFormatError(f"{path}:{lineno}: face needs at least 3 vertices")
                idx = []
                for tok in parts[1:]:
                    head = tok.split("/")[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise MeshFormatError(f"{path}:{lineno}: bad face index {tok!r}") from None
                    idx.append(i - 1 if i > 0 else len(vertices) + i)
                # fan-triangulate polygons
                for a, b in zip(idx[1:-1], idx[2:]):
                    faces.append([idx[0], a, b])
    if not vertices or not faces:
        raise EmptySceneError(f"{path}: no geometry found")
    return make_mesh(vertices, faces)


def _load_ply(path):
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"ply"):
        raise MeshFormatError(f"{path}: missing ply magic")
    header_end = data.find(b"end_header")
    if header_end < 0:
        raise MeshFormatError(f"{path}: unterminated header")
    header_end = data.find(b"\n", header_end) + 1
    header = data[:header_end].decode("ascii", errors="replace")
    body = data[header_end:]

    fmt = None
    elements = []  # (name, count, [(proptype, name) or ('list', counttype, itemtype, name)])
    for lineno, line in enumerate(header.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise MeshFormatError(f"{path}:{lineno}: property before element")
            if parts[1] == "list":
                elements[-1][2].append(("list", parts[2], parts[3], parts[4]))
            else:
                elements[-1][2].append((parts[1], parts[2]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise MeshFormatError(f"{path}: unsupported ply format {fmt!r}")

    vertices, faces = [], []
    if fmt == "ascii":
        tokens = body.decode("ascii").split()
        pos = 0
        for name, count, props in elements:
            for _ in range(count):
                values = {}
                for prop in props:
                    if prop[0] == "list":
                        n = int(tokens[pos]); pos += 1
                        values[prop[3]] = [int(float(tokens[pos + i])) for i in range(n)]
                        pos += n
                    else:
                        values[prop[1]] = float(tokens[pos]); pos += 1
                if name == "vertex":
                    vertices.append([values["x"], values["y"], values["z"]])
                elif name == "face":
                    idx = values.get("vertex_indices", values.get("vertex_index"))
                    for a, b in zip(idx[1:-1], idx[2:]):
                        faces.append([idx[0], a, b])
    else:
        pos = 0
        scalar = {"char": "b", "uchar": "B", "int8": "b", "uint8": "B",
                  "short": "h", "ushort": "H", "int16": "h", "uint16": "H",
                  "int": "i", "uint": "I", "int32": "i", "uint32": "I",
                  "float": "f", "float32": "f", "double": "d", "float64": "d"}
        for name, count, props in elements:
            for _ in range(count):
                values = {}
                for prop in props:
                    if prop[0] == "list":
                        cfmt, ifmt = scalar[prop[1]], scalar[prop[2]]
                        n = struct.unpack_from("<" + cfmt, body, pos)[0]
                        pos += struct.calcsize(cfmt)
                        items = struct.unpack_from("<" + ifmt * n, body, pos)
                        pos += struct.calcsize(ifmt) * n
                        values[prop[3]] = [int(v) for v in items]
                    else:
                        sfmt = scalar[prop[0]]
                        values[prop[1]] = struct.unpack_from("<" + sfmt, body, pos)[0]
                        pos += struct.calcsize(sfmt)
                if name == "vertex":
                    try:
                        vertices.append([values["x"], values["y"], values["z"]])
                    except KeyError:
                        raise MeshFormatError(f"{path}: vertex element lacks x/y/z at offset {pos}") from None
                elif name == "face":
                    idx = values.get("vertex_indices", values.get("vertex_index"))
                    if idx is None:
                        raise MeshFormatError(f"{path}: face element lacks vertex indices at offset {pos}")
                    for a, b in zip(idx[1:-1], idx[2:]):
                        faces.append([idx[0], a, b])
    if not vertices or not faces:
        raise EmptySceneError(f"{path}: no geometry found")
    return make_mesh(vertices, faces)


def save_obj(path, vertices, faces):
    with open(path, "w") as f:
        for v in np.asarray(vertices, dtype=np.float64):
            f.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for face in np.asarray(faces, dtype=np.int64):
            f.write(f"f {face[0] + 1} {face[1] + 1} {face[2] + 1}\n")


# -- surface sampling ----------------------------------------------------------

def sample_point_cloud(mesh, m, seed=0):
    """Area-weighted uniform surface samples; deterministic per seed."""
    if m < 1:
        raise ValueError(f"sample count must be >= 1, got {m}")
    areas = mesh.triangle_areas()
    total = areas.sum()
    if total <= 0.0:
        raise EmptySceneError("mesh has zero total surface area")
    rng = np.random.default_rng(seed)
    tri_idx = rng.choice(len(areas), size=m, p=areas / total)
    tri = mesh.vertices[mesh.faces[tri_idx]]
    r1 = np.sqrt(rng.random(m))
    r2 = rng.random(m)
    w0 = 1.0 - r1
    w1 = r1 * (1.0 - r2)
    w2 = r1 * r2
    points = w0[:, None] * tri[:, 0] + w1[:, None] * tri[:, 1] + w2[:, None] * tri[:, 2]
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    return PointCloud(points=points, normals=n)


# -- exact nearest-neighbor index ----------------------------------------------

class VertexIndex:
    """Exact nearest-neighbor queries over a fixed point set (k-d tree)."""

    def __init__(self, points):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if len(points) == 0:
            raise StateError("cannot build a nearest-vertex index over an empty set")
        self.points = points
        self._tree = cKDTree(points)

    def nearest(self, query):
        """Returns (indices, distances); accepts a single point or (Q, 3)."""
        q = np.asarray(query, dtype=np.float64)
        single = q.ndim == 1
        d, i = self._tree.query(q.reshape(-1, 3), k=1)
        if single:
            return int(i[0]), float(d[0])
        return i.astype(np.int64), d


def nearest_scene_vertex(index, point):
    """Exact nearest scene point to ``point``: (vertex xyz, distance)."""
    i, d = index.nearest(np.asarray(point, dtype=np.float64).reshape(3))
    return index.points[i], d
