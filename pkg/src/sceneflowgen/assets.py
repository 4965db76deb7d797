"""Mesh and texture assets: built-in primitives, OBJ/PPM ingestion and the
deterministic train/test asset split."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ParseError
from .formats import read_ppm

__all__ = [
    "Mesh", "Texture", "split_assets", "load_obj_mesh", "load_texture_image",
    "make_cuboid", "make_cylinder", "make_sphere", "make_torus", "PRIMITIVES",
]

_DEGENERATE_AREA = 1e-12

# documented train fraction of the 35,927-model reference pool
# (32,872 train / 3,055 test)
REFERENCE_SPLIT_RATIO = 32872 / 35927


def _triangle_areas(vertices, triangles):
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # (N, 3) object space
    triangles: np.ndarray  # (M, 3) vertex indices
    uv: np.ndarray  # (N, 2)
    asset_id: str

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        uv = np.asarray(self.uv, dtype=np.float64).reshape(-1, 2)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "uv", uv)
        if len(uv) != len(v):
            raise ConfigurationError(
                f"mesh {self.asset_id!r}: {len(uv)} uv entries for {len(v)} vertices"
            )
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise ConfigurationError(
                f"mesh {self.asset_id!r}: triangle index out of range"
            )
        if len(t) == 0:
            raise ConfigurationError(f"mesh {self.asset_id!r} has no triangles")
        if np.any(_triangle_areas(v, t) <= _DEGENERATE_AREA):
            raise ConfigurationError(
                f"mesh {self.asset_id!r} contains degenerate triangles"
            )


_TEXTURE_KINDS = ("checker", "noise", "gradient", "image")
_NOISE_LATTICE = 32


@dataclass(frozen=True)
class Texture:
    kind: str
    params: dict = field(default_factory=dict)
    pixels: np.ndarray | None = None  # (H, W, 3) uint8 for the image kind
    asset_id: str = ""

    def __post_init__(self):
        if self.kind not in _TEXTURE_KINDS:
            raise ConfigurationError(f"unknown texture kind {self.kind!r}")
        if self.kind == "image":
            if self.pixels is None or self.pixels.size == 0:
                raise ConfigurationError("image texture needs a non-empty raster")
        elif self.pixels is not None:
            raise ConfigurationError(f"{self.kind} texture must not carry a raster")

    def sample(self, uv):
        """Evaluate the texture at uv coordinates (..., 2) -> RGB in [0, 1]."""
        uv = np.asarray(uv, dtype=np.float64)
        u = uv[..., 0]
        v = uv[..., 1]
        if self.kind == "checker":
            scale = self.params.get("scale", 4.0)
            ca = np.asarray(self.params.get("color_a", (0.9, 0.9, 0.9)))
            cb = np.asarray(self.params.get("color_b", (0.1, 0.1, 0.1)))
            parity = (np.floor(u * scale) + np.floor(v * scale)) % 2
            return np.where(parity[..., None] < 0.5, ca, cb)
        if self.kind == "gradient":
            c0 = np.asarray(self.params.get("color0", (0.0, 0.0, 0.0)))
            c1 = np.asarray(self.params.get("color1", (1.0, 1.0, 1.0)))
            axis = self.params.get("axis", "u")
            t = np.clip(u if axis == "u" else v, 0.0, 1.0)
            return c0 + (c1 - c0) * t[..., None]
        if self.kind == "noise":
            lattice = self._noise_lattice()
            freq = self.params.get("frequency", 4.0)
            x = (u * freq) % _NOISE_LATTICE
            y = (v * freq) % _NOISE_LATTICE
            x0 = np.floor(x).astype(int) % _NOISE_LATTICE
            y0 = np.floor(y).astype(int) % _NOISE_LATTICE
            x1 = (x0 + 1) % _NOISE_LATTICE
            y1 = (y0 + 1) % _NOISE_LATTICE
            fx = (x - np.floor(x))[..., None]
            fy = (y - np.floor(y))[..., None]
            top = lattice[y0, x0] * (1 - fx) + lattice[y0, x1] * fx
            bot = lattice[y1, x0] * (1 - fx) + lattice[y1, x1] * fx
            return top * (1 - fy) + bot * fy
        # image kind, nearest lookup with wraparound
        h, w = self.pixels.shape[:2]
        xi = np.clip((u % 1.0) * w, 0, w - 1).astype(int)
        yi = np.clip((v % 1.0) * h, 0, h - 1).astype(int)
        return self.pixels[yi, xi].astype(np.float64) / 255.0

    def _noise_lattice(self):
        seed = int(self.params.get("seed", 0))
        rng = np.random.Generator(np.random.Philox(key=seed))
        return rng.random((_NOISE_LATTICE, _NOISE_LATTICE, 3))


def split_assets(asset_ids, split_ratio):
    """Partition asset ids into (train, test) by a stable hash of each id.

    The side an id lands on depends only on the id and the ratio, never on
    the order or contents of the input list.
    """
    ids = list(asset_ids)
    if not ids:
        raise ConfigurationError("cannot split an empty asset pool")
    if not 0.0 < split_ratio < 1.0:
        raise ConfigurationError(f"split ratio must be in (0, 1), got {split_ratio}")
    train, test = [], []
    for asset_id in ids:
        digest = hashlib.sha256(asset_id.encode("utf-8")).digest()
        frac = int.from_bytes(digest[:8], "big") / 2**64
        (train if frac < split_ratio else test).append(asset_id)
    return train, test


# ---------------------------------------------------------------------------
# Primitive meshes (unit-scale, centered at the origin)

def make_cuboid(asset_id="primitive:cuboid"):
    """Axis-aligned unit cube; 4 vertices per face so each face maps the
    full [0,1]^2 uv square."""
    verts, uvs, tris = [], [], []
    # (axis, sign) for each of the 6 faces
    for axis in range(3):
        for sign in (-1.0, 1.0):
            a1, a2 = [i for i in range(3) if i != axis]
            base = len(verts)
            for cu, cv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                p = np.zeros(3)
                p[axis] = 0.5 * sign
                p[a1] = cu - 0.5
                p[a2] = cv - 0.5
                verts.append(p)
                uvs.append((cu, cv))
            tris.append((base, base + 1, base + 2))
            tris.append((base, base + 2, base + 3))
    return Mesh(np.array(verts), np.array(tris), np.array(uvs), asset_id)


def make_cylinder(segments=16, asset_id="primitive:cylinder"):
    """Unit-height, unit-diameter cylinder along Y with caps."""
    verts, uvs, tris = [], [], []
    # side wall, duplicated seam vertex for clean uv wrap
    for i in range(segments + 1):
        ang = 2 * np.pi * i / segments
        x, z = 0.5 * np.cos(ang), 0.5 * np.sin(ang)
        u = i / segments
        verts.append((x, -0.5, z)); uvs.append((u, 0.0))
        verts.append((x, 0.5, z)); uvs.append((u, 1.0))
    for i in range(segments):
        b = 2 * i
        tris.append((b, b + 2, b + 3))
        tris.append((b, b + 3, b + 1))
    # caps
    for sign in (-1.0, 1.0):
        center = len(verts)
        verts.append((0.0, 0.5 * sign, 0.0)); uvs.append((0.5, 0.5))
        ring = len(verts)
        for i in range(segments):
            ang = 2 * np.pi * i / segments
            x, z = 0.5 * np.cos(ang), 0.5 * np.sin(ang)
            verts.append((x, 0.5 * sign, z))
            uvs.append((0.5 + x, 0.5 + z))
        for i in range(segments):
            j = ring + i
            k = ring + (i + 1) % segments
            if sign > 0:
                tris.append((center, j, k))
            else:
                tris.append((center, k, j))
    return Mesh(np.array(verts), np.array(tris), np.array(uvs), asset_id)


def make_sphere(rings=8, segments=12, asset_id="primitive:sphere"):
    """Unit-diameter lat/long sphere."""
    verts, uvs, tris = [], [], []
    for r in range(rings + 1):
        theta = np.pi * r / rings
        for s in range(segments + 1):
            phi = 2 * np.pi * s / segments
            verts.append((
                0.5 * np.sin(theta) * np.cos(phi),
                -0.5 * np.cos(theta),
                0.5 * np.sin(theta) * np.sin(phi),
            ))
            uvs.append((s / segments, r / rings))
    stride = segments + 1
    for r in range(rings):
        for s in range(segments):
            a = r * stride + s
            b = a + stride
            if r > 0:
                tris.append((a, b, a + 1))
            if r < rings - 1:
                tris.append((a + 1, b, b + 1))
    return Mesh(np.array(verts), np.array(tris), np.array(uvs), asset_id)


def make_torus(major=0.35, minor=0.15, segments=12, sides=8,
               asset_id="primitive:torus"):
    verts, uvs, tris = [], [], []
    for i in range(segments + 1):
        a = 2 * np.pi * i / segments
        for j in range(sides + 1):
            b = 2 * np.pi * j / sides
            r = major + minor * np.cos(b)
            verts.append((r * np.cos(a), minor * np.sin(b), r * np.sin(a)))
            uvs.append((i / segments, j / sides))
    stride = sides + 1
    for i in range(segments):
        for j in range(sides):
            a = i * stride + j
            b = a + stride
            tris.append((a, b, a + 1))
            tris.append((a + 1, b, b + 1))
    return Mesh(np.array(verts), np.array(tris), np.array(uvs), asset_id)


PRIMITIVES = {
    "cuboid": make_cuboid,
    "cylinder": make_cylinder,
    "sphere": make_sphere,
    "torus": make_torus,
}


# ---------------------------------------------------------------------------
# OBJ ingestion

def load_obj_mesh(path) -> Mesh:
    """Load a v/vt/f subset of Wavefront OBJ, fan-triangulating polygons.

    OBJ indexes positions and uvs independently; vertices are split per
    (position, uv) pair. Files without vt records get a planar-projection
    uv along the object-space axis of largest extent.
    """
    positions, texcoords, faces = [], [], []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            try:
                if tag == "v":
                    positions.append([float(x) for x in parts[1:4]])
                    if len(parts) < 4:
                        raise ValueError("vertex needs 3 coordinates")
                elif tag == "vt":
                    if len(parts) < 3:
                        raise ValueError("texcoord needs 2 coordinates")
                    texcoords.append([float(parts[1]), float(parts[2])])
                elif tag == "f":
                    if len(parts) < 4:
                        raise ValueError("face needs at least 3 vertices")
                    corners = []
                    for spec_part in parts[1:]:
                        fields = spec_part.split("/")
                        vi = int(fields[0])
                        ti = None
                        if len(fields) > 1 and fields[1]:
                            ti = int(fields[1])
                        corners.append((vi, ti))
                    faces.append(corners)
                # vn, o, g, s, usemtl, mtllib: ignored
            except (ValueError, IndexError) as e:
                raise ParseError(f"{path}:{lineno}: malformed {tag!r} record: {e}") from None
    if not positions or not faces:
        raise ParseError(f"{path}: no geometry found")
    positions = np.asarray(positions, dtype=np.float64)

    def resolve(idx, n, lineno_hint="face"):
        # OBJ indices are 1-based; negatives count from the end
        j = idx - 1 if idx > 0 else n + idx
        if not 0 <= j < n:
            raise ParseError(f"{path}: {lineno_hint} index {idx} out of range")
        return j

    vertex_map = {}
    verts, uvs, tris = [], [], []

    def vertex_key(vi, ti):
        key = (vi, ti)
        if key not in vertex_map:
            vertex_map[key] = len(verts)
            verts.append(positions[vi])
            uvs.append(texcoords[ti] if ti is not None else (0.0, 0.0))
        return vertex_map[key]

    for corners in faces:
        resolved = [
            vertex_key(
                resolve(vi, len(positions)),
                resolve(ti, len(texcoords), "texcoord") if ti is not None else None,
            )
            for vi, ti in corners
        ]
        for i in range(1, len(resolved) - 1):
            tris.append((resolved[0], resolved[i], resolved[i + 1]))

    verts = np.asarray(verts)
    uvs = np.asarray(uvs, dtype=np.float64)
    if not texcoords:
        uvs = _planar_uv(verts)
    tris = np.asarray(tris, dtype=np.int64)
    areas = _triangle_areas(verts, tris)
    tris = tris[areas > _DEGENERATE_AREA]
    if len(tris) == 0:
        raise ParseError(f"{path}: all faces are degenerate")
    return Mesh(verts, tris, uvs, asset_id=f"obj:{path}")


def _planar_uv(verts):
    extent = verts.max(axis=0) - verts.min(axis=0)
    drop = int(np.argmax(extent))
    keep = [i for i in range(3) if i != drop]
    uv = verts[:, keep] - verts[:, keep].min(axis=0)
    span = np.maximum(uv.max(axis=0), 1e-12)
    return uv / span


def load_texture_image(path) -> Texture:
    """Load a PPM P6 file as an image-kind texture."""
    with open(path, "rb") as fh:
        pixels = read_ppm(fh.read())
    return Texture(kind="image", pixels=pixels, asset_id=f"ppm:{path}")
