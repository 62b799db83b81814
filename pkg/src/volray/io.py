"""Ingestion and persistence: raw volumes with text headers, slice stacks,
image output, and transfer-function presets."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from PIL import Image

from .engine import FrameImage
from .transfer import ControlPoint, TransferFunction
from .volume import ScalarVolume, normalize_scalars

__all__ = [
    "CorruptDataError",
    "InconsistentStackError",
    "InvalidHeaderError",
    "InvalidPresetError",
    "TfPreset",
    "UnsupportedFormatError",
    "VolumeHeader",
    "VolumeIoError",
    "bundled_preset",
    "bundled_preset_names",
    "load_slice_stack",
    "load_tf_preset",
    "load_volume",
    "resolve_tf_preset",
    "save_image",
    "save_slice_stack",
    "save_tf_preset",
    "save_volume",
]

PathLike = Union[str, Path]


class VolumeIoError(Exception):
    """Base class for ingestion/persistence failures."""


class InvalidHeaderError(VolumeIoError):
    pass


class UnsupportedFormatError(VolumeIoError):
    pass


class CorruptDataError(VolumeIoError):
    pass


class InconsistentStackError(VolumeIoError):
    pass


class InvalidPresetError(VolumeIoError):
    pass


_ELEMENT_TYPES = {
    "MET_UCHAR": ("uint8", 1),
    "MET_USHORT": ("uint16", 2),
    "MET_FLOAT": ("float32", 4),
}
_ELEMENT_NAMES = {"uint8": "MET_UCHAR", "uint16": "MET_USHORT", "float32": "MET_FLOAT"}


@dataclass(frozen=True)
class VolumeHeader:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    element_type: str
    byte_order: str
    data_file: str
    window: Optional[tuple[float, float]] = None


def _parse_header_text(text: str, where: str) -> VolumeHeader:
    fields: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidHeaderError(f"{where}:{lineno}: expected 'Key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        fields[key] = value

    known = {"NDims", "DimSize", "ElementSpacing", "ElementType",
             "ElementByteOrderMSB", "ElementDataFile", "Window"}
    for key in fields:
        if key not in known:
            warnings.warn(f"{where}: ignoring unknown header key {key!r}")

    for required in ("NDims", "DimSize", "ElementType", "ElementDataFile"):
        if required not in fields:
            raise InvalidHeaderError(f"{where}: missing required key {required}")
    if fields["NDims"].strip() != "3":
        raise InvalidHeaderError(f"{where}: NDims must be 3, got {fields['NDims']!r}")

    try:
        dims = tuple(int(tok) for tok in fields["DimSize"].split())
    except ValueError:
        raise InvalidHeaderError(f"{where}: DimSize must be three integers, got {fields['DimSize']!r}")
    if len(dims) != 3 or any(n < 2 for n in dims):
        raise InvalidHeaderError(f"{where}: DimSize must be three counts >= 2, got {dims}")

    spacing = (1.0, 1.0, 1.0)
    if "ElementSpacing" in fields:
        try:
            spacing = tuple(float(tok) for tok in fields["ElementSpacing"].split())
        except ValueError:
            raise InvalidHeaderError(
                f"{where}: ElementSpacing must be three reals, got {fields['ElementSpacing']!r}")
        if len(spacing) != 3 or any(not math.isfinite(s) or s <= 0.0 for s in spacing):
            raise InvalidHeaderError(f"{where}: ElementSpacing must be positive, got {spacing}")

    etype = fields["ElementType"]
    if etype not in _ELEMENT_TYPES:
        raise UnsupportedFormatError(
            f"{where}: unsupported ElementType {etype!r}; supported: {sorted(_ELEMENT_TYPES)}")

    msb = fields.get("ElementByteOrderMSB", "False").strip().lower()
    if msb not in ("true", "false"):
        raise InvalidHeaderError(f"{where}: ElementByteOrderMSB must be True or False, got {msb!r}")

    data_file = fields["ElementDataFile"].strip()
    if not data_file:
        raise InvalidHeaderError(f"{where}: ElementDataFile must not be empty")

    window = None
    if "Window" in fields:
        try:
            lo, hi = (float(tok) for tok in fields["Window"].split())
        except ValueError:
            raise InvalidHeaderError(f"{where}: Window must be two reals, got {fields['Window']!r}")
        if not lo < hi:
            raise InvalidHeaderError(f"{where}: Window must satisfy lo < hi, got ({lo}, {hi})")
        window = (lo, hi)

    return VolumeHeader(
        dims=dims,
        spacing=spacing,
        element_type=_ELEMENT_TYPES[etype][0],
        byte_order="big" if msb == "true" else "little",
        data_file=data_file,
        window=window,
    )


def _element_dtype(element_type: str, byte_order: str) -> np.dtype:
    if element_type == "uint8":
        return np.dtype(np.uint8)
    prefix = ">" if byte_order == "big" else "<"
    return np.dtype(prefix + ("u2" if element_type == "uint16" else "f4"))


def load_volume(header_path: PathLike) -> ScalarVolume:
    """Load a raw volume described by its text header.

    The header names the element type, dimensions, spacing and raw data
    file; elements are x-fastest.  Values are normalized onto [0, 1] with
    the header's optional window.
    """
    header_path = Path(header_path)
    header = _parse_header_text(header_path.read_text(), header_path.name)
    data_path = header_path.parent / header.data_file
    dtype = _element_dtype(header.element_type, header.byte_order)
    count = header.dims[0] * header.dims[1] * header.dims[2]
    expected = count * dtype.itemsize
    try:
        blob = data_path.read_bytes()
    except FileNotFoundError:
        raise CorruptDataError(
            f"{data_path.name}: expected {expected} bytes ({count} {header.element_type} "
            f"elements), but the file is missing")
    if len(blob) != expected:
        raise CorruptDataError(
            f"{data_path.name}: expected {expected} bytes ({count} {header.element_type} "
            f"elements), got {len(blob)}")
    raw = np.frombuffer(blob, dtype=dtype)
    samples, source_range = normalize_scalars(raw, header.window)
    return ScalarVolume(
        dims=header.dims,
        spacing=header.spacing,
        samples=samples,
        source_range=source_range,
    )


def save_volume(
    volume: ScalarVolume,
    header_path: PathLike,
    element_type: str = "uint8",
    byte_order: str = "little",
) -> None:
    """Write a volume as header + raw payload.

    Integer types quantize the normalized samples onto the full type range
    and record it as the window, so loading restores the same samples (up to
    the quantization grid).
    """
    if element_type not in _ELEMENT_NAMES:
        raise UnsupportedFormatError(
            f"unsupported element type {element_type!r}; supported: {sorted(_ELEMENT_NAMES)}")
    header_path = Path(header_path)
    data_name = header_path.stem + ".raw"
    dtype = _element_dtype(element_type, byte_order)
    if element_type == "uint8":
        raw = np.floor(volume.samples * 255.0 + 0.5).astype(dtype)
        window = (0.0, 255.0)
    elif element_type == "uint16":
        raw = np.floor(volume.samples * 65535.0 + 0.5).astype(dtype)
        window = (0.0, 65535.0)
    else:
        raw = volume.samples.astype(dtype)
        window = (0.0, 1.0)
    (header_path.parent / data_name).write_bytes(raw.tobytes())
    dx, dy, dz = volume.spacing
    lines = [
        "NDims = 3",
        f"DimSize = {volume.dims[0]} {volume.dims[1]} {volume.dims[2]}",
        f"ElementSpacing = {dx!r} {dy!r} {dz!r}",
        f"ElementType = {_ELEMENT_NAMES[element_type]}",
        f"ElementByteOrderMSB = {'True' if byte_order == 'big' else 'False'}",
        f"Window = {window[0]!r} {window[1]!r}",
        f"ElementDataFile = {data_name}",
    ]
    header_path.write_text("\n".join(lines) + "\n")


_SLICE_EXTENSIONS = {".png", ".pgm", ".bmp", ".jpg", ".jpeg", ".tif", ".tiff"}


def _natural_key(name: str):
    parts = []
    num = ""
    for ch in name:
        if ch.isdigit():
            num += ch
        else:
            if num:
                parts.append((1, int(num)))
                num = ""
            parts.append((0, ch))
    if num:
        parts.append((1, int(num)))
    return parts


def _slice_array(path: Path) -> np.ndarray:
    img = Image.open(path)
    if img.mode not in ("L", "I", "I;16", "F"):
        img = img.convert("L")
    return np.asarray(img, dtype=np.float64)


def load_slice_stack(
    directory: PathLike,
    spacing: Sequence[float] = (1.0, 1.0, 1.0),
    numeric_sort: bool = False,
) -> ScalarVolume:
    """Stack 2-D grayscale slices into a volume.

    Slice order is lexicographic by filename (so s10 precedes s2) unless
    ``numeric_sort`` is set, which orders embedded integers numerically.
    Values are normalized over the global (min, max) across all slices.
    """
    directory = Path(directory)
    files = sorted(
        (p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in _SLICE_EXTENSIONS),
        key=(lambda p: _natural_key(p.name)) if numeric_sort else (lambda p: p.name),
    )
    if len(files) < 2:
        raise ValueError(f"{directory}: a slice stack needs >= 2 images, found {len(files)}")
    slices = []
    shape = None
    for path in files:
        arr = _slice_array(path)
        if arr.ndim != 2:
            raise InconsistentStackError(f"{path.name}: not a single-channel image")
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise InconsistentStackError(
                f"{path.name}: slice is {arr.shape[1]}x{arr.shape[0]}, "
                f"expected {shape[1]}x{shape[0]}")
        slices.append(arr)
    stacked = np.stack(slices, axis=0)  # (nz, ny, nx): ravel order is x-fastest
    samples, source_range = normalize_scalars(stacked.ravel())
    ny, nx = shape
    return ScalarVolume(
        dims=(nx, ny, len(files)),
        spacing=tuple(float(s) for s in spacing),
        samples=samples,
        source_range=source_range,
    )


def save_slice_stack(volume: ScalarVolume, directory: PathLike, prefix: str = "slice") -> list[Path]:
    """Export the volume as 8-bit grayscale PNG slices along z."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    grid = volume.grid
    written = []
    for k in range(volume.dims[2]):
        arr = np.floor(grid[:, :, k].T * 255.0 + 0.5).astype(np.uint8)
        path = directory / f"{prefix}_{k:04d}.png"
        Image.fromarray(arr, mode="L").save(path)
        written.append(path)
    return written


def save_image(image: FrameImage, path: PathLike) -> None:
    """Write a rendered frame as binary PPM (.ppm, alpha dropped) or PNG (.png)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
        path.write_bytes(header + image.pixels[..., :3].tobytes())
    elif suffix == ".png":
        Image.fromarray(image.pixels, mode="RGBA").save(path)
    else:
        raise UnsupportedFormatError(f"{path.name}: unsupported image extension {suffix!r}")


@dataclass(frozen=True)
class TfPreset:
    name: str
    points: tuple[ControlPoint, ...]
    reference_step: float = 1.0

    def __post_init__(self):
        if self.reference_step <= 0.0:
            raise InvalidPresetError(
                f"{self.name}: reference_step must be positive, got {self.reference_step}")
        object.__setattr__(self, "points", tuple(self.points))
        _validate_points(self.points, self.name)

    def to_transfer_function(self) -> TransferFunction:
        return TransferFunction(points=self.points, name=self.name)


def _validate_points(points, name):
    if len(points) < 2:
        raise InvalidPresetError(f"{name}: needs >= 2 control points, got {len(points)}")
    for i, p in enumerate(points):
        if not isinstance(p, ControlPoint):
            raise InvalidPresetError(f"{name}: point {i} is not a control point")
        if i > 0 and p.scalar <= points[i - 1].scalar:
            raise InvalidPresetError(
                f"{name}: point {i} at scalar {p.scalar} is not after {points[i - 1].scalar}")


def _control_point(entry: dict, index: int, name: str) -> ControlPoint:
    try:
        return ControlPoint(
            scalar=float(entry["scalar"]),
            color=tuple(float(c) for c in entry["color"]),
            opacity=float(entry["opacity"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidPresetError(f"{name}: point {index}: {exc}") from exc


def _sorted_table(entries, name, what, value_key):
    if not entries:
        raise InvalidPresetError(f"{name}: {what} table is empty")
    scalars = []
    for i, entry in enumerate(entries):
        try:
            s = float(entry["scalar"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidPresetError(f"{name}: {what} point {i}: {exc}") from exc
        if not 0.0 <= s <= 1.0:
            raise InvalidPresetError(f"{name}: {what} point {i}: scalar {s} outside [0, 1]")
        if scalars and s <= scalars[-1]:
            raise InvalidPresetError(
                f"{name}: {what} point {i} at scalar {s} is not after {scalars[-1]}")
        scalars.append(s)
    values = []
    for i, entry in enumerate(entries):
        try:
            values.append(entry[value_key])
        except KeyError as exc:
            raise InvalidPresetError(f"{name}: {what} point {i}: missing {value_key}") from exc
    return np.array(scalars), values


def _preset_from_dict(data: dict, where: str) -> TfPreset:
    if not isinstance(data, dict):
        raise InvalidPresetError(f"{where}: preset must be a JSON object")
    name = str(data.get("name", where))
    reference_step = float(data.get("reference_step", 1.0))
    if "points" in data:
        points = tuple(
            _control_point(entry, i, name) for i, entry in enumerate(data["points"])
        )
        return TfPreset(name=name, points=points, reference_step=reference_step)
    if "color_points" in data and "opacity_points" in data:
        # independent tables: merge over the union of scalar positions
        c_s, c_vals = _sorted_table(data["color_points"], name, "color", "color")
        o_s, o_vals = _sorted_table(data["opacity_points"], name, "opacity", "opacity")
        colors = np.array([[float(c) for c in v] for v in c_vals])
        opacities = np.array([float(v) for v in o_vals])
        union = np.union1d(c_s, o_s)
        points = []
        for i, s in enumerate(union):
            color = tuple(np.interp(s, c_s, colors[:, ch]) for ch in range(3))
            opacity = float(np.interp(s, o_s, opacities))
            points.append(_control_point(
                {"scalar": float(s), "color": color, "opacity": opacity}, i, name))
        return TfPreset(name=name, points=tuple(points), reference_step=reference_step)
    raise InvalidPresetError(
        f"{where}: preset needs either 'points' or both 'color_points' and 'opacity_points'")


def load_tf_preset(path: PathLike) -> TfPreset:
    """Load a transfer-function preset from its JSON file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidPresetError(f"{path.name}: not valid JSON: {exc}") from exc
    return _preset_from_dict(data, path.name)


def save_tf_preset(preset: TfPreset, path: PathLike) -> None:
    data = {
        "name": preset.name,
        "reference_step": preset.reference_step,
        "points": [
            {"scalar": p.scalar, "color": list(p.color), "opacity": p.opacity}
            for p in preset.points
        ],
    }
    Path(path).write_text(json.dumps(data, indent=2) + "\n")


def bundled_preset_names() -> list[str]:
    root = resources.files("volray") / "presets"
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_preset(name: str) -> TfPreset:
    root = resources.files("volray") / "presets"
    entry = root / f"{name}.json"
    if not entry.is_file():
        raise InvalidPresetError(
            f"no bundled preset {name!r}; available: {', '.join(bundled_preset_names())}")
    data = json.loads(entry.read_text())
    return _preset_from_dict(data, name)


def resolve_tf_preset(name_or_path: str) -> TfPreset:
    """CLI-style lookup: bundled preset name first, then a JSON file path."""
    if name_or_path in bundled_preset_names():
        return bundled_preset(name_or_path)
    path = Path(name_or_path)
    if path.is_file():
        return load_tf_preset(path)
    raise InvalidPresetError(
        f"{name_or_path!r} is neither a bundled preset "
        f"({', '.join(bundled_preset_names())}) nor a preset file")
