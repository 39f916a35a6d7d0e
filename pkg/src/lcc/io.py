"""File formats: images, lifted volumes, point clouds, labels and manifests.

Volume files (``.lccv``) are little-endian::

    b"LCCV1"                      magic
    u32 nx, u32 ny, u32 ntheta    dims
    f64 sx, f64 sy                spatial spacing
    u8  periodicity               0 = pi, 1 = 2pi
    f32 data                      x fastest, then y, then theta

Point-cloud CSVs have the header ``x,y,theta`` (SE(2)) or ``r11,...,r33``
(SO(3), row-major rotation matrix), one element per row. An optional last
column ``value`` carries a data term for affinity runs.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .components import ComponentLabeling
from .errors import InvalidArgumentError
from .geometry import TWO_PI
from .morphology import LiftedVolume

MAGIC = b"LCCV1"
_HEADER = struct.Struct("<5sIIIddB")

SE2_HEADER = ["x", "y", "theta"]
SO3_HEADER = [f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)]
VALUE_COLUMN = "value"


# ---------------------------------------------------------------------------
# Volumes
# ---------------------------------------------------------------------------


def write_volume(path, vol: LiftedVolume) -> None:
    data = np.ascontiguousarray(vol.data, dtype="<f4")
    nth, ny, nx = data.shape
    flag = 0 if abs(vol.period - np.pi) < 1e-12 else 1
    head = _HEADER.pack(MAGIC, nx, ny, nth, float(vol.spacing[0]), float(vol.spacing[1]), flag)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(data.tobytes(order="C"))


def read_volume(path) -> LiftedVolume:
    """Read an ``.lccv`` file; values come back as float32."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read volume {path}: {exc}") from exc
    if len(raw) < _HEADER.size or raw[:5] != MAGIC:
        raise InvalidArgumentError(f"{path} is not an LCCV1 volume")
    _, nx, ny, nth, sx, sy, flag = _HEADER.unpack_from(raw)
    if flag not in (0, 1):
        raise InvalidArgumentError(f"{path}: bad periodicity flag {flag}")
    n = nx * ny * nth
    body = raw[_HEADER.size :]
    if len(body) != 4 * n:
        raise InvalidArgumentError(f"{path}: expected {4 * n} data bytes, found {len(body)}")
    data = np.frombuffer(body, dtype="<f4").reshape(nth, ny, nx).astype(np.float32)
    return LiftedVolume(data, (sx, sy), np.pi if flag == 0 else TWO_PI)


# ---------------------------------------------------------------------------
# Images
# ---------------------------------------------------------------------------


def read_image(path) -> np.ndarray:
    """Grayscale PNG or PGM as a float array (colour input is averaged)."""
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("RGB", "RGBA", "P", "LA", "CMYK"):
                im = im.convert("RGB")
            a = np.asarray(im, dtype=float)
    except FileNotFoundError as exc:
        raise InvalidArgumentError(f"no such image: {path}") from exc
    except (OSError, UnidentifiedImageError) as exc:
        raise InvalidArgumentError(f"cannot read image {path}: {exc}") from exc
    if a.ndim == 3:
        a = a.mean(axis=-1)
    return a


def write_image(path, img: np.ndarray) -> None:
    """Save a float image in [0, 1] as 8-bit grayscale."""
    a = np.clip(np.asarray(img, dtype=float), 0.0, 1.0)
    Image.fromarray(np.round(a * 255).astype(np.uint8), mode="L").save(path)


def label_palette(n: int) -> np.ndarray:
    """``(n, 3)`` uint8 colours; entry 0 is black and entry ``i`` depends on ``i`` only."""
    pal = np.zeros((n, 3), dtype=np.uint8)
    for i in range(1, n):
        pal[i] = np.random.default_rng(i).integers(48, 256, size=3)
    return pal


def write_label_png(path, labels: np.ndarray) -> None:
    """Indexed PNG with background 0.

    More than 255 labels do not fit a palette; those images are written as
    16-bit grayscale instead.
    """
    lab = np.asarray(labels)
    if lab.ndim != 2 or lab.min(initial=0) < 0:
        raise InvalidArgumentError("label image must be 2D and non-negative")
    top = int(lab.max(initial=0))
    if top <= 255:
        im = Image.fromarray(lab.astype(np.uint8), mode="P")
        im.putpalette(label_palette(256).ravel().tolist())
    elif top <= 65535:
        im = Image.fromarray(lab.astype(np.uint16))
    else:
        raise InvalidArgumentError("too many labels for a PNG")
    im.save(path, optimize=False)


def read_label_png(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.asarray(im).astype(np.int32)
    except (OSError, UnidentifiedImageError) as exc:
        raise InvalidArgumentError(f"cannot read label image {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Point clouds
# ---------------------------------------------------------------------------


def read_cloud_csv(path):
    """Return ``(points, values)``; ``values`` is None without a value column.

    ``points`` is ``(N, 3)`` for SE(2) and ``(N, 3, 3)`` for SO(3).
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read cloud {path}: {exc}") from exc
    if not rows:
        raise InvalidArgumentError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    has_value = bool(header) and header[-1] == VALUE_COLUMN
    cols = header[:-1] if has_value else header
    if cols == SE2_HEADER:
        group = "SE2"
    elif cols == SO3_HEADER:
        group = "SO3"
    else:
        raise InvalidArgumentError(f"{path}: header must be x,y,theta or r11..r33, got {','.join(header)}")
    body = [r for r in rows[1:] if r and any(c.strip() for c in r)]
    try:
        arr = np.array([[float(c) for c in r] for r in body], dtype=float)
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: non-numeric entry ({exc})") from exc
    if arr.size == 0:
        raise InvalidArgumentError(f"{path} has no points")
    if arr.ndim != 2 or arr.shape[1] != len(header):
        raise InvalidArgumentError(f"{path}: every row needs {len(header)} values")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{path}: non-finite entry")
    values = arr[:, -1].copy() if has_value else None
    pts = arr[:, : len(cols)]
    if group == "SO3":
        pts = pts.reshape(-1, 3, 3)
    return pts, values


def write_cloud_csv(path, points, values: Optional[np.ndarray] = None) -> None:
    pts = np.asarray(points, dtype=float)
    header = list(SE2_HEADER if pts.ndim == 2 else SO3_HEADER)
    flat = pts.reshape(len(pts), -1)
    if values is not None:
        header.append(VALUE_COLUMN)
        flat = np.c_[flat, np.asarray(values, dtype=float)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in flat:
            wr.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# Labels, matrices and manifests
# ---------------------------------------------------------------------------


def write_label_csv(path, labeling: ComponentLabeling, vol: LiftedVolume) -> None:
    """Rows ``label,size,seed_x,seed_y,seed_theta`` for a grid labeling."""
    nx, ny, _ = vol.dims
    sizes = labeling.sizes()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["label", "size", "seed_x", "seed_y", "seed_theta"])
        for lab, (seed, size) in enumerate(zip(labeling.seeds, sizes), start=1):
            k, rem = divmod(int(seed), nx * ny)
            j, i = divmod(rem, nx)
            x, y, th = vol.cell_coords(k, j, i)
            wr.writerow([lab, int(size), repr(float(x)), repr(float(y)), repr(float(th))])


def write_cloud_labels_csv(path, labels: np.ndarray) -> None:
    """Rows ``index,label``; 0 marks points outside the indicator."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["index", "label"])
        for i, lab in enumerate(np.asarray(labels).ravel()):
            wr.writerow([i, int(lab)])


def read_cloud_labels_csv(path) -> np.ndarray:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read labels {path}: {exc}") from exc
    if not rows or [h.strip() for h in rows[0]] != ["index", "label"]:
        raise InvalidArgumentError(f"{path}: header must be index,label")
    try:
        pairs = sorted((int(r[0]), int(r[1])) for r in rows[1:] if r)
    except (ValueError, IndexError) as exc:
        raise InvalidArgumentError(f"{path}: bad row ({exc})") from exc
    if [p[0] for p in pairs] != list(range(len(pairs))):
        raise InvalidArgumentError(f"{path}: indices must run 0..N-1")
    return np.array([p[1] for p in pairs], dtype=np.int32)


def write_matrix_csv(path, a: np.ndarray, ids) -> None:
    """Square matrix with the component ids as header row and first column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["component"] + [int(i) for i in ids])
        for i, row in zip(ids, np.asarray(a)):
            wr.writerow([int(i)] + [repr(float(v)) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_manifest(path, manifest: dict) -> None:
    """JSON with sorted keys, so equal runs give equal bytes."""
    text = json.dumps(_jsonable(manifest), sort_keys=True, indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")
