"""Cloud file formats and run outputs.

Readable inputs: whitespace-separated ASCII ("x y z" or "x y z nx ny nz",
"x y [nx ny]" in 2D, '#' comments) and PLY, ascii or binary little
endian, with float x/y/z and optional nx/ny/nz vertex properties.
Outputs of a run: planes.txt, labels.txt, report.json and a per-plane
colored PLY for inspection.
"""

from __future__ import annotations

import os

import numpy as np

from .geometry import PointCloud, canonicalize_rows
from .planes import OUTLIER, Hyperplane, LabeledCloud


class CloudFormatError(ValueError):
    """Raised for unreadable or inconsistent cloud files."""


_PLY_DTYPES = {
    "float": "<f4", "float32": "<f4",
    "double": "<f8", "float64": "<f8",
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "<i2", "int16": "<i2",
    "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4",
    "uint": "<u4", "uint32": "<u4",
}

# Distinct plane colors for the inspection PLY; cycled when there are
# more planes than entries. Outliers are gray.
_PALETTE = np.array([
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 212), (0, 128, 128), (220, 190, 255),
    (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
    (128, 128, 0), (255, 215, 180), (0, 0, 128), (128, 128, 128),
], dtype=np.uint8)
_OUTLIER_COLOR = np.array((160, 160, 160), dtype=np.uint8)


def read_cloud(path, dim: int = 3) -> PointCloud:
    """Load a point cloud; the format is picked from the extension.

    Normals, when present, are canonicalized on load.
    """
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    path = os.fspath(path)
    if path.lower().endswith(".ply"):
        return _read_ply(path, dim)
    return _read_ascii(path, dim)


def _read_ascii(path: str, dim: int) -> PointCloud:
    rows = []
    lines = []
    ncol = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if ncol is None:
                ncol = len(parts)
                if ncol not in (dim, 2 * dim):
                    raise CloudFormatError(
                        f"{path}:{lineno}: expected {dim} or {2 * dim} columns "
                        f"for dim={dim}, found {ncol}")
            elif len(parts) != ncol:
                raise CloudFormatError(
                    f"{path}:{lineno}: expected {ncol} columns, found {len(parts)}")
            try:
                rows.append([float(x) for x in parts])
            except ValueError:
                raise CloudFormatError(
                    f"{path}:{lineno}: non-numeric value") from None
            lines.append(lineno)
    if not rows:
        raise CloudFormatError(f"{path}: no points found")
    data = np.array(rows)
    points = data[:, :dim]
    normals = None
    if ncol == 2 * dim:
        normals = _canonical_or_report(data[:, dim:], path, lines)
    return PointCloud(points, normals)


def _canonical_or_report(raw: np.ndarray, path: str, lines=None) -> np.ndarray:
    norms = np.linalg.norm(raw, axis=1)
    bad = np.flatnonzero((norms <= 0.0) | ~np.isfinite(norms))
    if len(bad):
        where = f"line {lines[bad[0]]}" if lines is not None else f"row {bad[0]}"
        raise CloudFormatError(f"{path}: zero or non-finite normal at {where}")
    return canonicalize_rows(raw)


def _read_ply(path: str, dim: int) -> PointCloud:
    with open(path, "rb") as fh:
        blob = fh.read()
    end = blob.find(b"end_header\n")
    if not blob.startswith(b"ply") or end < 0:
        raise CloudFormatError(f"{path}: not a PLY file")
    header = blob[:end].decode("ascii", errors="replace").splitlines()
    body = blob[end + len(b"end_header\n"):]

    fmt = None
    elements = []  # (name, count, [(prop, dtype_str)])
    for lineno, line in enumerate(header, 1):
        parts = line.split()
        if not parts or parts[0] in ("ply", "comment", "obj_info"):
            continue
        if parts[0] == "format":
            if parts[1] not in ("ascii", "binary_little_endian"):
                raise CloudFormatError(
                    f"{path}:{lineno}: unsupported format {parts[1]!r}")
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise CloudFormatError(f"{path}:{lineno}: property before element")
            if parts[1] == "list":
                elements[-1][2].append((parts[-1], "list"))
            else:
                if parts[1] not in _PLY_DTYPES:
                    raise CloudFormatError(
                        f"{path}:{lineno}: unknown property type {parts[1]!r}")
                elements[-1][2].append((parts[-1], _PLY_DTYPES[parts[1]]))
    if fmt is None or not elements:
        raise CloudFormatError(f"{path}: incomplete PLY header")
    name, count, props = elements[0]
    if name != "vertex":
        raise CloudFormatError(f"{path}: first element must be vertex, got {name!r}")
    if any(dt == "list" for _, dt in props):
        raise CloudFormatError(f"{path}: list properties on vertices unsupported")

    if fmt == "ascii":
        rows = body.decode("ascii", errors="replace").splitlines()
        data_rows = [r.split() for r in rows if r.strip()][:count]
        if len(data_rows) < count:
            raise CloudFormatError(
                f"{path}: vertex element promises {count} rows, "
                f"found {len(data_rows)}")
        try:
            table = {p: np.array([float(r[i]) for r in data_rows])
                     for i, (p, _) in enumerate(props)}
        except (ValueError, IndexError):
            raise CloudFormatError(f"{path}: malformed ascii vertex data") from None
    else:
        dtype = np.dtype([(p, dt) for p, dt in props])
        if len(body) < count * dtype.itemsize:
            raise CloudFormatError(f"{path}: truncated binary vertex data")
        rec = np.frombuffer(body, dtype=dtype, count=count)
        table = {p: rec[p].astype(float) for p, _ in props}

    axes = ("x", "y", "z")[:dim]
    if any(a not in table for a in axes):
        raise CloudFormatError(f"{path}: vertex element lacks {'/'.join(axes)}")
    points = np.column_stack([table[a] for a in axes])
    normal_axes = tuple("n" + a for a in axes)
    normals = None
    if all(a in table for a in normal_axes):
        normals = _canonical_or_report(
            np.column_stack([table[a] for a in normal_axes]), path)
    return PointCloud(points, normals)


def write_cloud_xyz(path, cloud: PointCloud) -> None:
    """ASCII dump, 17 significant digits so values round-trip exactly."""
    arrays = [cloud.points]
    if cloud.normals is not None:
        arrays.append(cloud.normals)
    data = np.hstack(arrays)
    with open(path, "w", encoding="utf-8") as fh:
        for row in data:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def write_ply(path, cloud: PointCloud, colors: np.ndarray | None = None,
              binary: bool = True) -> None:
    """Write positions, optional normals and optional uint8 colors.

    2D clouds are embedded at z = 0 (and nz = 0) so viewers accept them.
    """
    pts = cloud.points
    nrm = cloud.normals
    if cloud.dimension == 2:
        pts = np.column_stack([pts, np.zeros(len(pts))])
        if nrm is not None:
            nrm = np.column_stack([nrm, np.zeros(len(nrm))])
    fields = [("x", "<f8"), ("y", "<f8"), ("z", "<f8")]
    if nrm is not None:
        fields += [("nx", "<f8"), ("ny", "<f8"), ("nz", "<f8")]
    if colors is not None:
        fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    rec = np.empty(len(pts), dtype=np.dtype(fields))
    rec["x"], rec["y"], rec["z"] = pts[:, 0], pts[:, 1], pts[:, 2]
    if nrm is not None:
        rec["nx"], rec["ny"], rec["nz"] = nrm[:, 0], nrm[:, 1], nrm[:, 2]
    if colors is not None:
        colors = np.asarray(colors, dtype=np.uint8)
        rec["red"], rec["green"], rec["blue"] = (colors[:, 0], colors[:, 1],
                                                 colors[:, 2])
    type_names = {"<f8": "double", "u1": "uchar"}
    header = ["ply",
              "format binary_little_endian 1.0" if binary else "format ascii 1.0",
              f"element vertex {len(pts)}"]
    header += [f"property {type_names[dt]} {name}" for name, dt in fields]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(rec.tobytes())
        else:
            for row in rec:
                cells = [f"{row[name]:.17g}" if dt != "u1" else str(int(row[name]))
                         for name, dt in fields]
                fh.write((" ".join(cells) + "\n").encode("ascii"))


def grid_downsample(cloud: PointCloud, cell: float) -> tuple[PointCloud, np.ndarray]:
    """Keep one point per occupied grid cell of the given size.

    The representative is the lowest-index point of each cell; the kept
    indices come back sorted ascending so downstream outputs stay aligned
    with a deterministic subset of the input.
    """
    if cell <= 0:
        raise ValueError("cell size must be positive")
    keys = np.floor(cloud.points / cell).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    kept = np.sort(first)
    normals = None if cloud.normals is None else cloud.normals[kept]
    return PointCloud(cloud.points[kept], normals), kept


def write_planes_txt(path, planes: list[Hyperplane]) -> None:
    """One plane per line: id, normal components, offset, support count."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in planes:
            comps = " ".join(f"{v:.17g}" for v in p.normal)
            fh.write(f"{p.id} {comps} {p.offset:.17g} {len(p.support)}\n")


def read_planes_txt(path, dim: int = 3) -> list[Hyperplane]:
    planes = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            text = raw.strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != dim + 3:
                raise CloudFormatError(
                    f"{path}:{lineno}: expected {dim + 3} columns, "
                    f"found {len(parts)}")
            pid = int(parts[0])
            normal = np.array([float(x) for x in parts[1:1 + dim]])
            offset = float(parts[1 + dim])
            count = int(parts[2 + dim])
            planes.append(Hyperplane(normal=normal, offset=offset,
                                     support=np.empty(count, dtype=np.int64),
                                     id=pid))
    return planes


def write_labels_txt(path, labels: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(str(int(v)) for v in labels))
        if len(labels):
            fh.write("\n")


def read_labels_txt(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        values = [int(line) for line in fh.read().split()]
    return np.array(values, dtype=np.int64)


def write_outputs(planes: list[Hyperplane], labeled: LabeledCloud,
                  report, out_dir) -> None:
    """Write the full result set of a reconstruction run into a directory.

    Produces planes.txt, labels.txt (OUTLIER as -1), report.json and
    reconstruction.ply carrying positions, reconstructed normals and a
    per-plane color (outliers gray).
    """
    os.makedirs(out_dir, exist_ok=True)
    write_planes_txt(os.path.join(out_dir, "planes.txt"), planes)
    write_labels_txt(os.path.join(out_dir, "labels.txt"), labeled.labels)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    colors = np.empty((len(labeled.labels), 3), dtype=np.uint8)
    colors[:] = _OUTLIER_COLOR
    assigned = labeled.labels != OUTLIER
    colors[assigned] = _PALETTE[labeled.labels[assigned] % len(_PALETTE)]
    write_ply(os.path.join(out_dir, "reconstruction.ply"), labeled.cloud,
              colors=colors, binary=True)
