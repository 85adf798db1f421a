"""Synthetic random-dot stereo pairs with exact ground truth.

Scenes are piecewise-planar disparity fields over a seeded dot texture.
The ground truth is referenced to the left image: a left pixel at column x
with disparity d matches the right image at column x - d. The right image
is synthesized by sampling the left image at analytically inverted source
positions, so the correspondence holds exactly (up to the linear
interpolation used for fractional disparities). Pixels occluded in the
right view are masked out of the ground truth; right-image pixels with no
left source are filled with fresh seeded texture.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .matcher import ImagePair
from .volume import DisparityMap

__all__ = [
    "PlaneRegion",
    "SceneSpec",
    "disparity_field",
    "warp_with_disparity",
    "gen_stereogram",
    "default_suite",
]

# Max slope along x; keeps the left-to-right column mapping invertible.
MAX_X_SLOPE = 0.5


@dataclass(frozen=True)
class PlaneRegion:
    """Axis-aligned rectangle [x0, x1) x [y0, y1) carrying d = a*x + b*y + c."""

    x0: int
    y0: int
    x1: int
    y1: int
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0

    def __post_init__(self) -> None:
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValueError("region rectangle must be non-empty")
        if abs(self.a) > MAX_X_SLOPE:
            raise ValueError(f"|x slope| must be <= {MAX_X_SLOPE}")

    def disparity(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.a * np.asarray(x, dtype=np.float64) + self.b * np.asarray(y, dtype=np.float64) + self.c

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        y = np.asarray(y)
        return (x >= self.x0) & (x < self.x1) & (y >= self.y0) & (y < self.y1)


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for one synthetic stereo scene.

    Either ``constant`` holds a single disparity for the whole frame, or
    ``planes`` lists regions: the first must cover the frame (background)
    and later ones are pairwise disjoint foreground rectangles painted on
    top. ``density`` is the fraction of pixels carrying a random dot, the
    rest are mid-gray.
    """

    width: int = 64
    height: int = 64
    max_disparity: int = 32
    constant: float | None = None
    planes: tuple[PlaneRegion, ...] = ()
    density: float = 1.0
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.width < 2 or self.height < 2:
            raise ValueError("scene must be at least 2x2")
        if self.max_disparity < 2:
            raise ValueError("max_disparity must be >= 2")
        if not 0.0 < self.density <= 1.0:
            raise ValueError("texture density must lie in (0, 1]")
        if self.noise_sigma < 0.0:
            raise ValueError("noise sigma must be non-negative")
        if (self.constant is None) == (len(self.planes) == 0):
            raise ValueError("specify exactly one of constant or planes")
        for region in self._regions():
            for corner_x in (region.x0, region.x1 - 1):
                for corner_y in (region.y0, region.y1 - 1):
                    d = region.disparity(corner_x, corner_y)
                    if not 0.0 <= d <= self.max_disparity - 1:
                        raise ValueError(
                            f"plane disparity {d:.3f} at ({corner_x}, {corner_y}) "
                            f"outside [0, {self.max_disparity - 1}]"
                        )
        if self.planes:
            bg = self.planes[0]
            if bg.x0 > 0 or bg.y0 > 0 or bg.x1 < self.width or bg.y1 < self.height:
                raise ValueError("first region must cover the full frame")
            fg = self.planes[1:]
            for i in range(len(fg)):
                for j in range(i + 1, len(fg)):
                    if (
                        fg[i].x0 < fg[j].x1
                        and fg[j].x0 < fg[i].x1
                        and fg[i].y0 < fg[j].y1
                        and fg[j].y0 < fg[i].y1
                    ):
                        raise ValueError("foreground regions must be disjoint")

    def _regions(self) -> tuple[PlaneRegion, ...]:
        if self.constant is not None:
            return (
                PlaneRegion(0, 0, self.width, self.height, 0.0, 0.0, float(self.constant)),
            )
        return self.planes

    def to_dict(self) -> dict:
        data = asdict(self)
        data["planes"] = [asdict(p) for p in self.planes]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SceneSpec":
        planes = tuple(PlaneRegion(**p) for p in data.get("planes", ()))
        fields = {k: v for k, v in data.items() if k != "planes"}
        return cls(planes=planes, **fields)


def _owner_index(regions: tuple[PlaneRegion, ...], x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Region index visible at real position (x, y); foreground wins."""
    owner = np.zeros(np.broadcast(x, y).shape, dtype=np.int64)
    for i, region in enumerate(regions[1:], start=1):
        owner[region.contains(x, y)] = i
    return owner


def disparity_field(spec: SceneSpec) -> np.ndarray:
    """Left-referenced analytic disparity at every pixel."""
    regions = spec._regions()
    rows, cols = np.indices((spec.height, spec.width))
    owner = _owner_index(regions, cols, rows)
    d = np.empty((spec.height, spec.width), dtype=np.float64)
    for i, region in enumerate(regions):
        sel = owner == i
        d[sel] = region.disparity(cols[sel], rows[sel])
    return d


def _right_source_disparity(
    spec: SceneSpec, u: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Disparity of the surface visible at right-image position (u, y).

    For each region the left source column solving u = x - d(x, y) is
    x = (u + b*y + c) / (1 - a); the candidate is valid when that column
    actually belongs to the region and lies inside the frame. Among valid
    candidates the largest disparity (nearest surface) wins.

    Returns:
        (disparity, has_source) arrays; disparity is NaN where nothing maps.
    """
    regions = spec._regions()
    u = np.asarray(u, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    best = np.full(np.broadcast(u, y).shape, -np.inf)
    for i, region in enumerate(regions):
        x = (u + region.b * y + region.c) / (1.0 - region.a)
        valid = (x >= 0.0) & (x <= spec.width - 1)
        if i == 0:
            owned = np.ones_like(valid)
            for fg in regions[1:]:
                owned &= ~fg.contains(x, y)
        else:
            owned = region.contains(x, y)
        valid &= owned
        d = region.disparity(x, y)
        best = np.where(valid & (d > best), d, best)
    has_source = np.isfinite(best)
    return np.where(has_source, best, np.nan), has_source


def warp_with_disparity(
    left: np.ndarray,
    disparity: np.ndarray,
    rng: np.random.Generator | None = None,
    fill: np.ndarray | None = None,
) -> np.ndarray:
    """Synthesize the right image: right(x, y) = left(x + d(x, y), y).

    Fractional source positions are linearly interpolated. Pixels whose
    source falls outside the frame (or whose disparity is NaN) are filled
    with fresh seeded texture: ``fill`` if given, otherwise uniform noise
    from ``rng``.
    """
    left = np.asarray(left, dtype=np.float64)
    disparity = np.asarray(disparity, dtype=np.float64)
    if left.shape != disparity.shape or left.ndim != 2:
        raise ValueError("image and disparity must be 2-D arrays of equal shape")
    h, w = left.shape
    rows, cols = np.indices((h, w))
    src = cols + disparity
    valid = np.isfinite(src) & (src >= 0.0) & (src <= w - 1)
    src_safe = np.where(valid, src, 0.0)
    lo = np.floor(src_safe).astype(np.int64)
    lo = np.minimum(lo, w - 1)
    hi = np.minimum(lo + 1, w - 1)
    frac = src_safe - lo
    warped = (1.0 - frac) * left[rows, lo] + frac * left[rows, hi]
    if fill is None:
        if rng is None:
            rng = np.random.Generator(np.random.Philox(0))
        fill = rng.random((h, w))
    return np.where(valid, warped, fill)


def _texture(height: int, width: int, density: float, rng: np.random.Generator) -> np.ndarray:
    dots = rng.random((height, width)) < density
    values = rng.random((height, width))
    return np.where(dots, values, 0.5)


def gen_stereogram(spec: SceneSpec) -> tuple[ImagePair, DisparityMap]:
    """Generate one stereo pair with its exact ground truth.

    The left image is a seeded dot texture, the right image an exact warp
    of it, and the ground truth mask marks pixels whose right-view match
    exists and is unoccluded. Identical specs (including the seed) produce
    bit-identical outputs.
    """
    rng = np.random.Generator(np.random.Philox(spec.seed))
    h, w = spec.height, spec.width
    left = _texture(h, w, spec.density, rng)

    gt = disparity_field(spec)
    rows, cols = np.indices((h, w))
    source_d, _ = _right_source_disparity(spec, cols.astype(np.float64), rows.astype(np.float64))
    fill = _texture(h, w, spec.density, rng)
    right = warp_with_disparity(left, source_d, fill=fill)

    match_u = cols - gt
    visible_d, has_source = _right_source_disparity(spec, match_u, rows.astype(np.float64))
    mask = (match_u >= 0.0) & has_source & (np.abs(np.where(has_source, visible_d, np.inf) - gt) <= 1e-6)

    if spec.noise_sigma > 0.0:
        left = np.clip(left + spec.noise_sigma * rng.standard_normal((h, w)), 0.0, 1.0)
        right = np.clip(right + spec.noise_sigma * rng.standard_normal((h, w)), 0.0, 1.0)

    return ImagePair(left, right), DisparityMap(gt, mask)


def default_suite() -> list[SceneSpec]:
    """The standard 20-scene desk-scale benchmark.

    64x64 frames with a 32-level search range, mixing constant, sloped and
    box-on-background disparity fields at dot densities 1.0, 0.5 and 0.1;
    the sparse scenes stress the low-texture failure mode.
    """

    def plane(a: float, b: float, c: float) -> tuple[PlaneRegion, ...]:
        return (PlaneRegion(0, 0, 64, 64, a, b, c),)

    def box(bg: tuple[float, float, float], *fgs: tuple[int, int, int, int, float]) -> tuple[PlaneRegion, ...]:
        regions = [PlaneRegion(0, 0, 64, 64, *bg)]
        for x0, y0, x1, y1, c in fgs:
            regions.append(PlaneRegion(x0, y0, x1, y1, 0.0, 0.0, c))
        return tuple(regions)

    scenes = [
        SceneSpec(constant=5.0, density=1.0, seed=101),
        SceneSpec(constant=12.5, density=1.0, seed=102),
        SceneSpec(constant=8.25, density=1.0, noise_sigma=0.01, seed=103),
        SceneSpec(constant=16.0, density=0.5, seed=104),
        SceneSpec(constant=3.75, density=0.5, noise_sigma=0.01, seed=105),
        SceneSpec(constant=10.0, density=0.1, seed=106),
        SceneSpec(constant=6.5, density=0.1, noise_sigma=0.01, seed=107),
        SceneSpec(constant=14.0, density=0.1, seed=108),
        SceneSpec(planes=plane(0.15, 0.0, 2.0), density=1.0, seed=109),
        SceneSpec(planes=plane(0.0, 0.2, 4.0), density=1.0, noise_sigma=0.01, seed=110),
        SceneSpec(planes=plane(0.1, 0.1, 3.0), density=0.5, seed=111),
        SceneSpec(planes=plane(-0.12, 0.0, 12.0), density=0.5, seed=112),
        SceneSpec(planes=plane(0.08, -0.05, 8.0), density=0.1, seed=113),
        SceneSpec(planes=plane(0.05, 0.12, 2.0), density=0.1, noise_sigma=0.01, seed=114),
        SceneSpec(planes=box((0.0, 0.0, 4.0), (16, 16, 48, 48, 12.0)), density=1.0, seed=115),
        SceneSpec(
            planes=box((0.0, 0.0, 6.0), (8, 8, 32, 32, 14.0), (40, 36, 56, 56, 10.0)),
            density=0.5,
            seed=116,
        ),
        SceneSpec(planes=box((0.0, 0.0, 3.0), (20, 12, 44, 52, 18.0)), density=0.1, seed=117),
        SceneSpec(
            planes=box((0.05, 0.0, 3.0), (24, 24, 48, 48, 15.0)),
            density=1.0,
            noise_sigma=0.01,
            seed=118,
        ),
        SceneSpec(
            planes=box((0.0, 0.0, 8.0), (12, 28, 52, 48, 16.0)),
            density=0.5,
            noise_sigma=0.02,
            seed=119,
        ),
        SceneSpec(planes=box((0.0, 0.0, 5.0), (16, 16, 48, 48, 11.5)), density=0.1, seed=120),
    ]
    return scenes
