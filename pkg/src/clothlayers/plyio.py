"""PLY interchange: generic reader/writer plus the labeled-scan schema.

Scans are stored with per-vertex properties
``x y z nx ny nz body visible_class hidden_class view`` where ``body`` is
0/1, the class columns hold the canonical garment codes (-1 = none,
0..5 = long-shirt, t-shirt, top, long-pants, shorts, skirt) and ``view`` is
the source viewpoint. The scanner configuration rides along as a JSON header
comment so scans round-trip exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .geometry import PointCloud
from .layering import CanonicalLabels
from .scanner import LabeledScan, ScanConfig

_TYPES = {
    "char": "i1", "uchar": "u1", "short": "i2", "ushort": "u2",
    "int": "i4", "uint": "u4", "float": "f4", "double": "f8",
}
_INV_TYPES = {v: k for k, v in _TYPES.items()}


def write_ply(path, props: list[tuple[str, str, np.ndarray]],
              comments: list[str] | None = None, binary: bool = True) -> None:
    """Write one vertex element with the given (name, ply_type, column) list."""
    if not props:
        raise InvalidArgumentError("no properties to write")
    n = len(props[0][2])
    for name, ptype, col in props:
        if ptype not in _TYPES:
            raise InvalidArgumentError(f"unknown PLY type {ptype!r}")
        if len(col) != n:
            raise InvalidArgumentError(f"property {name} has wrong length")
    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0"]
    for c in comments or ():
        header.append(f"comment {c}")
    header.append(f"element vertex {n}")
    for name, ptype, _ in props:
        header.append(f"property {ptype} {name}")
    header.append("end_header")
    path = Path(path)
    if binary:
        rec = np.dtype([(name, "<" + _TYPES[ptype]) for name, ptype, _ in props])
        data = np.empty(n, dtype=rec)
        for name, ptype, col in props:
            data[name] = np.asarray(col).astype("<" + _TYPES[ptype])
        with open(path, "wb") as f:
            f.write(("\n".join(header) + "\n").encode("ascii"))
            f.write(data.tobytes())
    else:
        cols = []
        for name, ptype, col in props:
            arr = np.asarray(col).astype(_TYPES[ptype])
            if ptype in ("float", "double"):
                cols.append([repr(float(v)) for v in arr])
            else:
                cols.append([str(int(v)) for v in arr])
        with open(path, "w") as f:
            f.write("\n".join(header) + "\n")
            for i in range(n):
                f.write(" ".join(c[i] for c in cols) + "\n")


def read_ply(path):
    """Read a single-element PLY written by this module (or compatible).

    Returns (props dict name -> array, comments list).
    """
    path = Path(path)
    with open(path, "rb") as f:
        raw = f.read()
    end = raw.find(b"end_header")
    if end < 0:
        raise InvalidArgumentError(f"{path} is not a PLY file")
    end_line = raw.find(b"\n", end) + 1
    header = raw[:end_line].decode("ascii").splitlines()
    if not header or header[0].strip() != "ply":
        raise InvalidArgumentError(f"{path} is not a PLY file")
    fmt = None
    n = None
    names: list[str] = []
    types: list[str] = []
    comments: list[str] = []
    for line in header[1:]:
        parts = line.strip().split(None, 2)
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "comment":
            comments.append(line.strip()[8:])
        elif parts[0] == "element":
            if parts[1] != "vertex":
                raise InvalidArgumentError("only vertex elements supported")
            n = int(parts[2])
        elif parts[0] == "property":
            ptype, name = parts[1], parts[2]
            if ptype == "list":
                raise InvalidArgumentError("list properties not supported")
            names.append(name)
            types.append(ptype)
    if fmt not in ("binary_little_endian", "ascii") or n is None:
        raise InvalidArgumentError(f"unsupported PLY header in {path}")
    if fmt == "binary_little_endian":
        rec = np.dtype([(nm, "<" + _TYPES[tp]) for nm, tp in zip(names, types)])
        data = np.frombuffer(raw[end_line:end_line + rec.itemsize * n],
                             dtype=rec, count=n)
        return {nm: np.array(data[nm]) for nm in names}, comments
    body = raw[end_line:].decode("ascii").split()
    table = np.array(body, dtype=object).reshape(n, len(names))
    out = {}
    for j, (nm, tp) in enumerate(zip(names, types)):
        out[nm] = table[:, j].astype(_TYPES[tp])
    return out, comments


_CONFIG_TAG = "clothlayers_scan_config "


def write_labeled_scan(path, scan: LabeledScan,
                       comments: list[str] | None = None,
                       binary: bool = True) -> None:
    cloud, labels = scan.cloud, scan.labels
    view = cloud.source_view
    if view is None:
        view = np.zeros(len(cloud), dtype=np.int64)
    props = [
        ("x", "float", cloud.positions[:, 0]),
        ("y", "float", cloud.positions[:, 1]),
        ("z", "float", cloud.positions[:, 2]),
        ("nx", "float", cloud.normals[:, 0]),
        ("ny", "float", cloud.normals[:, 1]),
        ("nz", "float", cloud.normals[:, 2]),
        ("body", "uchar", labels.is_body.astype(np.uint8)),
        ("visible_class", "char", labels.visible),
        ("hidden_class", "char", labels.hidden),
        ("view", "ushort", view),
    ]
    all_comments = [_CONFIG_TAG + scan.config.to_json()]
    all_comments.extend(comments or ())
    write_ply(path, props, comments=all_comments, binary=binary)


def read_labeled_scan(path) -> LabeledScan:
    props, comments = read_ply(path)
    for need in ("x", "y", "z", "nx", "ny", "nz",
                 "body", "visible_class", "hidden_class"):
        if need not in props:
            raise InvalidArgumentError(f"{path} misses property {need!r}")
    config = ScanConfig()
    for c in comments:
        if c.startswith(_CONFIG_TAG):
            config = ScanConfig.from_json(c[len(_CONFIG_TAG):])
    pos = np.stack([props["x"], props["y"], props["z"]], axis=1).astype(np.float64)
    nrm = np.stack([props["nx"], props["ny"], props["nz"]], axis=1).astype(np.float64)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)  # f4 storage round-off
    view = props.get("view")
    cloud = PointCloud(pos, nrm, None if view is None else view.astype(np.int64))
    labels = CanonicalLabels(props["body"].astype(bool),
                             props["visible_class"].astype(np.int8),
                             props["hidden_class"].astype(np.int8))
    return LabeledScan(cloud=cloud, labels=labels, config=config)
