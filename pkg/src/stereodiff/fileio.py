"""Disparity and image file formats.

PFM follows the Middlebury grayscale convention: a "Pf" magic line, the
dimensions, then a scale line whose sign encodes endianness, with rows
stored bottom-up as 32-bit floats. Round trips are bit-exact. PGM covers
binary 8/16-bit grayscale; PNG goes through Pillow. Color inputs are
rejected everywhere.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "FileFormatError",
    "read_pfm",
    "write_pfm",
    "read_pgm",
    "write_pgm",
    "read_png",
    "write_png",
    "read_intensity",
    "read_disparity",
    "write_disparity_png",
]


class FileFormatError(ValueError):
    """Malformed or unsupported image file."""


def read_pfm(path: str | Path) -> np.ndarray:
    """Read a grayscale PFM file into a (H, W) float32 array.

    Raises:
        FileFormatError: for color "PF" files, malformed headers or a
            truncated payload.
    """
    with open(path, "rb") as handle:
        magic = handle.readline().strip()
        if magic == b"PF":
            raise FileFormatError("color PFM (PF) is not supported, expected grayscale Pf")
        if magic != b"Pf":
            raise FileFormatError(f"not a PFM file: bad magic {magic!r}")
        dims = handle.readline().split()
        if len(dims) != 2:
            raise FileFormatError("malformed PFM dimension line")
        try:
            width, height = int(dims[0]), int(dims[1])
        except ValueError as exc:
            raise FileFormatError("malformed PFM dimensions") from exc
        if width <= 0 or height <= 0:
            raise FileFormatError("PFM dimensions must be positive")
        try:
            scale = float(handle.readline().strip())
        except ValueError as exc:
            raise FileFormatError("malformed PFM scale line") from exc
        dtype = "<f4" if scale < 0 else ">f4"
        payload = handle.read(width * height * 4)
        if len(payload) != width * height * 4:
            raise FileFormatError("truncated PFM payload")
        grid = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return np.flipud(grid).astype(np.float32)


def write_pfm(path: str | Path, grid: np.ndarray) -> None:
    """Write a (H, W) array as little-endian grayscale PFM."""
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError("PFM payload must be 2-D")
    data = np.flipud(grid.astype(np.float32)).astype("<f4")
    with open(path, "wb") as handle:
        handle.write(b"Pf\n")
        handle.write(f"{grid.shape[1]} {grid.shape[0]}\n".encode("ascii"))
        handle.write(b"-1.0\n")
        handle.write(data.tobytes())


def _read_pgm_header(handle) -> tuple[int, int, int]:
    tokens: list[bytes] = []
    while len(tokens) < 4:
        line = handle.readline()
        if not line:
            raise FileFormatError("truncated PGM header")
        line = line.split(b"#", 1)[0]
        tokens.extend(line.split())
    magic, width, height, maxval = tokens[:4]
    if magic in (b"P3", b"P6"):
        raise FileFormatError("color PPM is not supported")
    if magic != b"P5":
        raise FileFormatError(f"not a binary PGM file: bad magic {magic!r}")
    try:
        return int(width), int(height), int(maxval)
    except ValueError as exc:
        raise FileFormatError("malformed PGM header") from exc


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary PGM into a (H, W) float array normalized to [0, 1].

    Raises:
        FileFormatError: for color files or maxval outside 8/16-bit range.
    """
    with open(path, "rb") as handle:
        width, height, maxval = _read_pgm_header(handle)
        if not 0 < maxval < 65536:
            raise FileFormatError(f"unsupported PGM maxval {maxval}")
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        payload = handle.read(width * height * dtype.itemsize)
        if len(payload) != width * height * dtype.itemsize:
            raise FileFormatError("truncated PGM payload")
        grid = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return grid.astype(np.float64) / maxval


def write_pgm(path: str | Path, grid: np.ndarray, maxval: int = 255) -> None:
    """Quantize a [0, 1] intensity grid into a binary PGM."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ValueError("PGM payload must be 2-D")
    if not 0 < maxval < 65536:
        raise ValueError(f"unsupported PGM maxval {maxval}")
    raw = np.clip(np.rint(grid * maxval), 0, maxval)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    with open(path, "wb") as handle:
        handle.write(f"P5\n{grid.shape[1]} {grid.shape[0]}\n{maxval}\n".encode("ascii"))
        handle.write(raw.astype(dtype).tobytes())


def read_png(path: str | Path) -> np.ndarray:
    """Read an 8/16-bit grayscale PNG normalized to [0, 1].

    Raises:
        FileFormatError: for color or palette images.
    """
    with Image.open(path) as img:
        if img.mode == "L":
            return np.asarray(img, dtype=np.float64) / 255.0
        if img.mode in ("I;16", "I;16B", "I"):
            data = np.asarray(img, dtype=np.float64)
            if data.max() > 65535:
                raise FileFormatError("unsupported PNG bit depth")
            return data / 65535.0
        raise FileFormatError(f"unsupported PNG mode {img.mode!r}, need 8/16-bit grayscale")


def write_png(path: str | Path, grid: np.ndarray) -> None:
    """Write a [0, 1] intensity grid as an 8-bit grayscale PNG."""
    raw = np.clip(np.rint(np.asarray(grid, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(raw, mode="L").save(path)


def read_intensity(path: str | Path) -> np.ndarray:
    """Dispatch on extension to load a grayscale image in [0, 1]."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path)
    if suffix == ".png":
        return read_png(path)
    if suffix == ".pfm":
        return np.clip(read_pfm(path).astype(np.float64), 0.0, 1.0)
    raise FileFormatError(f"unsupported image format {suffix!r}")


def read_disparity(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Load a disparity file; returns (values, validity mask).

    PFM is the native format; non-finite entries mark invalid pixels.
    """
    suffix = Path(path).suffix.lower()
    if suffix != ".pfm":
        raise FileFormatError(f"disparity files must be PFM, got {suffix!r}")
    values = read_pfm(path).astype(np.float64)
    return values, np.isfinite(values)


def write_disparity_png(
    path: str | Path,
    disparity: np.ndarray,
    max_disparity: float,
    mask: np.ndarray | None = None,
    colormap: str = "turbo",
) -> None:
    """Render a disparity map to a colormapped PNG.

    Values are scaled by ``max_disparity`` into the matplotlib ``turbo``
    colormap (near = red, far = blue); masked-out pixels are black.
    """
    import matplotlib

    disparity = np.asarray(disparity, dtype=np.float64)
    cmap = matplotlib.colormaps[colormap]
    normalized = np.clip(disparity / max(max_disparity, 1e-9), 0.0, 1.0)
    rgb = (cmap(normalized)[..., :3] * 255.0).astype(np.uint8)
    if mask is not None:
        rgb[~np.asarray(mask, dtype=bool)] = 0
    Image.fromarray(rgb, mode="RGB").save(path)
