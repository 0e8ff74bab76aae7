"""LOS/NLOS propagation-condition identification (Stage II).

Given a detected surface, every in-FOV map cell is labeled by whether the
straight radar-to-cell path crosses the estimated finite segment thickened
by a +/- guard offset of the support-line intercept: crossing cells are
occluded (NLOS region), non-crossing cells are visible (LOS region), and
cells lying inside the guard band itself are excluded from both masks so
the wall's own ridge cannot win the peak search.

The hypothesis decision takes the magnitude argmax over the union of the
two regions; the region containing the winner decides LOS (I0) versus
NLOS (I1).  Without a detected surface the whole field of view is searched
and the decision is I0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ramap import MAP_SIZE, RangeAngleMap, refine_peak_quadratic
from .surface import SurfaceEstimate


class Hypothesis(str, Enum):
    LOS = "I0"
    NLOS = "I1"


@dataclass
class FovMasks:
    los: np.ndarray          # (512, 512) bool
    nlos: np.ndarray         # (512, 512) bool
    guard_m: float

    @property
    def union(self) -> np.ndarray:
        return self.los | self.nlos


@dataclass
class HypothesisDecision:
    hypothesis: Hypothesis
    peak_angle_deg: float
    peak_range_m: float
    peak_magnitude: float
    peak_range_bin: int
    peak_angle_bin: int


def _interval(a: np.ndarray, b: float, m: float):
    """Alpha interval where |a*alpha + b| <= m, as (lo, hi) arrays."""
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.where(a > 0, (-m - b) / a, np.where(a < 0, (m - b) / a, -np.inf))
        hi = np.where(a > 0, (m - b) / a, np.where(a < 0, (-m - b) / a, np.inf))
    if abs(b) > m:                      # a == 0 cells never enter the band
        lo = np.where(a == 0, np.inf, lo)
        hi = np.where(a == 0, -np.inf, hi)
    return lo, hi


def build_masks(estimate: SurfaceEstimate, ra_map: RangeAngleMap,
                guard_m: float = 1.0) -> FovMasks:
    """Segment the field of view into visible and occluded regions.

    Requires a detected estimate (an undetected surface routes to I0 before
    any mask is needed).  The occluder is the finite estimated segment
    extended into a band of +/- ``guard_m`` in support-line intercept and
    lengthened by 2.5 * ``guard_m`` past each end (the estimated extent is
    biased short, since faded end cells drop out of the consensus, so the
    endpoint allowance exceeds the lateral one); a cell is NLOS when the
    segment from the radar to the cell meets that band, LOS when it does
    not, and neither when the cell itself lies inside the band.
    """
    if not estimate.detected:
        raise ValueError("masks require a detected surface estimate")

    r = ra_map.range_axis_m[:, None]
    ang = np.radians(ra_map.angle_axis_deg[None, :])
    with np.errstate(invalid="ignore"):
        x = r * np.sin(ang)
        y = r * np.cos(ang)
    in_fov = ra_map.fov_mask() & (r > 0)

    theta = math.radians(estimate.orientation_deg)
    slope = math.tan(theta)
    ux, uy = math.cos(theta), math.sin(theta)
    c_along = estimate.center_x * ux + estimate.center_y * uy
    half = estimate.length / 2.0 + 2.5 * guard_m

    # strip coordinate (intercept offset) and along-segment coordinate
    g = y - x * slope - estimate.intercept
    s = x * ux + y * uy - c_along
    in_band = (np.abs(g) <= guard_m) & (np.abs(s) <= half)

    # does alpha * (x, y), alpha in [0, 1], enter the band?
    lo1, hi1 = _interval(y - x * slope, -estimate.intercept, guard_m)
    lo2, hi2 = _interval(x * ux + y * uy, -c_along, half)
    lo = np.maximum(np.maximum(lo1, lo2), 0.0)
    hi = np.minimum(np.minimum(hi1, hi2), 1.0)
    crosses = lo <= hi

    nlos = in_fov & crosses & ~in_band
    los = in_fov & ~crosses & ~in_band
    return FovMasks(los=los, nlos=nlos, guard_m=guard_m)


def masked_argmax(ra_map: RangeAngleMap,
                  masks: FovMasks) -> tuple[float, float, float, Hypothesis]:
    """Strongest cell over the union of the two regions.

    Returns (angle_deg, range_m, magnitude, region) where region labels the
    mask containing the winner.  Raises ValueError on an empty union.
    """
    union = masks.union
    if not union.any():
        raise ValueError("mask union is empty")
    flat = int(np.argmax(np.where(union, ra_map.magnitude, -1.0)))
    i, j = divmod(flat, MAP_SIZE)
    region = Hypothesis.NLOS if masks.nlos[i, j] else Hypothesis.LOS
    return (float(ra_map.angle_axis_deg[j]), float(ra_map.range_axis_m[i]),
            float(ra_map.magnitude[i, j]), region)


def decide(estimate: SurfaceEstimate, ra_map: RangeAngleMap,
           guard_m: float = 1.0, refine: bool = False) -> HypothesisDecision:
    """Hypothesis decision:

        no surface detected  ->  I0, peak = whole-FOV argmax
        surface detected     ->  masked argmax; NLOS-region winner -> I1,
                                 LOS-region winner -> I0
    """
    if not estimate.detected:
        valid = ra_map.fov_mask()
        flat = int(np.argmax(np.where(valid, ra_map.magnitude, -1.0)))
        i, j = divmod(flat, MAP_SIZE)
        hyp = Hypothesis.LOS
    else:
        masks = build_masks(estimate, ra_map, guard_m)
        union = masks.union
        if not union.any():
            raise ValueError("mask union is empty")
        flat = int(np.argmax(np.where(union, ra_map.magnitude, -1.0)))
        i, j = divmod(flat, MAP_SIZE)
        hyp = Hypothesis.NLOS if masks.nlos[i, j] else Hypothesis.LOS

    range_m = float(ra_map.range_axis_m[i])
    angle_deg = float(ra_map.angle_axis_deg[j])
    if refine:
        range_m, angle_deg = refine_peak_quadratic(ra_map, i, j)
    return HypothesisDecision(hypothesis=hyp, peak_angle_deg=angle_deg,
                              peak_range_m=range_m,
                              peak_magnitude=float(ra_map.magnitude[i, j]),
                              peak_range_bin=i, peak_angle_bin=j)


def write_masks_pgm(masks: FovMasks, path) -> None:
    """Binary PGM: 0 = excluded, 128 = LOS region, 255 = NLOS region.

    Row 0 is range bin 0; columns follow the angle axis.
    """
    img = np.zeros((MAP_SIZE, MAP_SIZE), dtype=np.uint8)
    img[masks.los] = 128
    img[masks.nlos] = 255
    with open(path, "wb") as f:
        f.write(f"P5\n{MAP_SIZE} {MAP_SIZE}\n255\n".encode("ascii"))
        f.write(img.tobytes())
