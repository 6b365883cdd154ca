"""Gaze-ray resolution against the scene and perceptual metrics.

Avatars are bounding spheres; the nearest positive-distance hit wins. Floor
hits are reported in plane coordinates ``(u, v)`` measured from the plane
origin, which sits at the centre of the ``extent_u x extent_v`` rectangle.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ZeroTotalDwell
from .model import FloorPlane, GazeFrame, SceneLayout, Vec3

DEFAULT_DISPERSION_DEG = 1.0
DEFAULT_MIN_FIXATION_MS = 100
DEFAULT_CELL_SIZE_M = 0.5
DEFAULT_SIGMA_M = 0.0


@dataclass(frozen=True)
class GazeSample:
    t_ms: int
    target: Optional[str] = None
    hit_point: Optional[Vec3] = None
    distance: Optional[float] = None
    floor_hit: Optional[Tuple[float, float]] = None


@dataclass(frozen=True)
class FixationEvent:
    t_start_ms: int
    t_end_ms: int
    centroid_dir: Vec3
    dispersion_deg: float
    target: Optional[str] = None
    n_frames: int = 0

    @property
    def duration_ms(self) -> int:
        return self.t_end_ms - self.t_start_ms

    def to_dict(self) -> dict:
        return {
            "t_start_ms": self.t_start_ms,
            "t_end_ms": self.t_end_ms,
            "centroid_dir": list(self.centroid_dir),
            "dispersion_deg": self.dispersion_deg,
            "target": self.target,
        }


@dataclass(frozen=True)
class SaccadeEvent:
    t_start_ms: int
    t_end_ms: int
    amplitude_deg: float

    def to_dict(self) -> dict:
        return {"t_start_ms": self.t_start_ms, "t_end_ms": self.t_end_ms, "amplitude_deg": self.amplitude_deg}


@dataclass
class Heatmap:
    grid: np.ndarray  # rows index v, cols index u
    cell_size_m: float
    u0: float
    v0: float
    total_mass: float
    n_samples: int

    def to_dict(self) -> dict:
        rows, cols = self.grid.shape
        return {
            "rows": rows,
            "cols": cols,
            "cell_size_m": self.cell_size_m,
            "u0": self.u0,
            "v0": self.v0,
            "total_mass": self.total_mass,
            "n_samples": self.n_samples,
            "grid": self.grid.tolist(),
        }


@dataclass
class DwellSummary:
    dwell_ms: Dict[str, int]
    off_target_ms: int
    span_ms: int
    entropy_norm: Optional[float] = None
    gini: Optional[float] = None


# ------------------------------------------------------------- geometry

def plane_basis(normal: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orthonormal ``(u, v, n)``; ``u`` is world x projected onto the plane
    (world z when the normal is parallel to x)."""
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
    u = ref - np.dot(ref, n) * n
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return u, v, n


def _ray_spheres(origins: np.ndarray, dirs: np.ndarray, centers: np.ndarray, radii: np.ndarray):
    """Nearest positive hit distance per ray (``inf`` on miss) and sphere index."""
    m = origins.shape[0]
    if centers.shape[0] == 0:
        return np.full(m, np.inf), np.full(m, -1)
    oc = origins[:, None, :] - centers[None, :, :]           # (m, k, 3)
    b = np.einsum("mkd,md->mk", oc, dirs)
    c = np.einsum("mkd,mkd->mk", oc, oc) - radii[None, :] ** 2
    disc = b * b - c
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t_near = -b - sq
    t_far = -b + sq
    t = np.where(t_near > 0, t_near, np.where(t_far > 0, t_far, np.inf))
    t = np.where(ok, t, np.inf)
    best = np.argmin(t, axis=1)
    dist = t[np.arange(m), best]
    best = np.where(np.isfinite(dist), best, -1)
    return dist, best


def resolve_many(frames: Sequence[GazeFrame], scene: SceneLayout) -> List[GazeSample]:
    if not frames:
        return []
    origins = np.array([f.head_pos for f in frames], dtype=float)
    dirs = np.array([f.gaze_dir for f in frames], dtype=float)
    centers = np.array([s.center for s in scene.students], dtype=float).reshape(-1, 3)
    radii = np.array([s.radius for s in scene.students], dtype=float)
    dist, idx = _ray_spheres(origins, dirs, centers, radii)

    fp = scene.floor_plane
    u_ax, v_ax, n = plane_basis(fp.normal)
    p0 = np.asarray(fp.origin, dtype=float)
    denom = dirs @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        t_plane = ((p0 - origins) @ n) / denom
        rel = origins + t_plane[:, None] * dirs - p0
        uu = rel @ u_ax
        vv = rel @ v_ax
        floor_ok = (
            (np.abs(denom) > 1e-12) & (t_plane > 0)
            & (np.abs(uu) <= fp.extent_u / 2) & (np.abs(vv) <= fp.extent_v / 2)
        )

    ids = scene.student_ids
    out = []
    for i, f in enumerate(frames):
        target = hit = d = None
        if idx[i] >= 0:
            d = float(dist[i])
            target = ids[idx[i]]
            hit = tuple(float(x) for x in origins[i] + d * dirs[i])
        floor = (float(uu[i]), float(vv[i])) if floor_ok[i] else None
        out.append(GazeSample(f.t_ms, target, hit, d, floor))
    return out


def resolve_gaze(frame: GazeFrame, scene: SceneLayout) -> GazeSample:
    return resolve_many([frame], scene)[0]


# ----------------------------------------------------------------- dwell

def dwell_per_target(samples: Sequence[GazeSample], student_ids: Sequence[str] = ()) -> DwellSummary:
    """Each inter-sample interval belongs to the earlier sample's target."""
    dwell = {sid: 0 for sid in student_ids}
    off = 0
    for a, b in zip(samples, samples[1:]):
        dt = b.t_ms - a.t_ms
        if a.target is None:
            off += dt
        else:
            dwell[a.target] = dwell.get(a.target, 0) + dt
    span = samples[-1].t_ms - samples[0].t_ms if samples else 0
    return DwellSummary(dwell, off, span)


def attention_entropy(dwell: Dict[str, float]) -> float:
    """Shannon entropy of dwell shares normalised by log(#students)."""
    if len(dwell) < 2:
        raise ValueError("attention entropy needs at least 2 students")
    x = np.array(list(dwell.values()), dtype=float)
    total = x.sum()
    if total <= 0:
        return 0.0
    p = x[x > 0] / total
    h = float(-np.sum(p * np.log(p)))
    return min(1.0, max(0.0, h / math.log(len(x))))


def gaze_gini(dwell: Dict[str, float]) -> float:
    """Population Gini: sum_ij |x_i - x_j| / (2 n^2 mean)."""
    if len(dwell) < 2:
        raise ValueError("Gini needs at least 2 students")
    x = np.array(list(dwell.values()), dtype=float)
    if x.sum() <= 0:
        raise ZeroTotalDwell("total dwell is zero")
    n = len(x)
    return float(np.abs(x[:, None] - x[None, :]).sum() / (2.0 * n * n * x.mean()))


def summarize_dwell(samples: Sequence[GazeSample], student_ids: Sequence[str]) -> DwellSummary:
    s = dwell_per_target(samples, student_ids)
    if len(student_ids) >= 2:
        s.entropy_norm = attention_entropy(s.dwell_ms)
        if sum(s.dwell_ms.values()) > 0:
            s.gini = gaze_gini(s.dwell_ms)
    return s


# ------------------------------------------------------------- fixations

def _unit_dirs(frames: Sequence[GazeFrame]) -> np.ndarray:
    d = np.array([f.gaze_dir for f in frames], dtype=float).reshape(-1, 3)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _angle_deg(a: np.ndarray, b: np.ndarray) -> float:
    # atan2 form stays accurate for tiny angles
    return math.degrees(math.atan2(np.linalg.norm(np.cross(a, b)), float(np.dot(a, b))))


def _dispersion(dirs: np.ndarray) -> Tuple[float, np.ndarray]:
    """Max angular deviation (deg) of ``dirs`` from their normalised mean."""
    mean = dirs.sum(axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0:
        return 180.0, mean
    mean = mean / norm
    cross = np.linalg.norm(np.cross(dirs, mean), axis=1)
    dots = dirs @ mean
    return float(np.degrees(np.arctan2(cross, dots)).max()), mean


def _min_cos(dirs: np.ndarray, total: np.ndarray) -> float:
    """Smallest cosine between ``dirs`` and the direction of ``total``."""
    norm = math.sqrt(float(total @ total))
    if norm == 0.0:
        return -1.0
    return float((dirs @ total).min()) / norm


def idt_fixations(
    frames: Sequence[GazeFrame],
    dispersion_threshold_deg: float = DEFAULT_DISPERSION_DEG,
    min_duration_ms: int = DEFAULT_MIN_FIXATION_MS,
    scene: Optional[SceneLayout] = None,
    targets: Optional[Sequence[Optional[str]]] = None,
) -> Tuple[List[FixationEvent], List[SaccadeEvent]]:
    """Dispersion-threshold (I-DT) fixation detection on gaze directions.

    A window opens at the first frame, is grown until it spans
    ``min_duration_ms`` and is accepted if every direction lies within
    ``dispersion_threshold_deg`` of the window mean; it then keeps absorbing
    frames while that holds. Rejected windows slide forward one frame.
    Saccades connect consecutive fixations: they run from the last frame of
    one to the first frame of the next, with amplitude the angle between the
    two centroids.

    Each fixation records its modal target (ties go to the target seen first
    in the window) when ``targets`` (one per frame) or ``scene`` is given.
    """
    if dispersion_threshold_deg <= 0:
        raise ValueError("dispersion threshold must be positive")
    n = len(frames)
    if n == 0:
        return [], []
    t = np.array([f.t_ms for f in frames], dtype=np.int64)
    dirs = _unit_dirs(frames)
    if targets is None and scene is not None:
        targets = [s.target for s in resolve_many(frames, scene)]
    cos_thr = math.cos(math.radians(dispersion_threshold_deg))

    fixations: List[FixationEvent] = []
    i = 0
    while i < n:
        j = int(np.searchsorted(t, t[i] + min_duration_ms, side="left"))
        if j >= n:
            break
        total = dirs[i:j + 1].sum(axis=0)
        if _min_cos(dirs[i:j + 1], total) < cos_thr:
            i += 1
            continue
        while j + 1 < n:
            grown = total + dirs[j + 1]
            if _min_cos(dirs[i:j + 2], grown) < cos_thr:
                break
            j, total = j + 1, grown
        disp, mean = _dispersion(dirs[i:j + 1])
        # the cosine test and the exact angle can disagree in the last ulp
        disp = min(disp, dispersion_threshold_deg)
        target = None
        if targets is not None:
            window = list(targets[i:j + 1])
            counts = Counter(window)
            best = max(counts.values())
            target = next(x for x in window if counts[x] == best)
        fixations.append(FixationEvent(
            int(t[i]), int(t[j]), tuple(float(x) for x in mean), disp, target, j - i + 1
        ))
        i = j + 1

    saccades = [
        SaccadeEvent(a.t_end_ms, b.t_start_ms,
                     _angle_deg(np.array(a.centroid_dir), np.array(b.centroid_dir)))
        for a, b in zip(fixations, fixations[1:])
    ]
    return fixations, saccades


# --------------------------------------------------------------- heatmap

def grid_shape(plane: FloorPlane, cell_size_m: float) -> Tuple[int, int]:
    return (max(1, math.ceil(plane.extent_v / cell_size_m - 1e-9)),
            max(1, math.ceil(plane.extent_u / cell_size_m - 1e-9)))


def heatmap(
    samples: Sequence[GazeSample],
    plane: FloorPlane,
    cell_size_m: float = DEFAULT_CELL_SIZE_M,
    sigma_m: float = DEFAULT_SIGMA_M,
    windows: Optional[Sequence[Tuple[int, int]]] = None,
) -> Heatmap:
    """Rasterise floor hits, one unit of mass per in-extent sample.

    The grid is centred on the plane origin and covers the full extent. With
    ``sigma_m > 0`` each sample is spread as a Gaussian truncated at 3 sigma
    and renormalised over in-grid cells so it still contributes exactly 1.
    Passing ``windows`` (e.g. fixation intervals) keeps only samples whose
    timestamps fall inside one of them.
    """
    if cell_size_m <= 0 or sigma_m < 0:
        raise ValueError("cell size must be positive and sigma non-negative")
    rows, cols = grid_shape(plane, cell_size_m)
    u0 = -cols * cell_size_m / 2
    v0 = -rows * cell_size_m / 2
    grid = np.zeros((rows, cols))
    cu = u0 + (np.arange(cols) + 0.5) * cell_size_m
    cv = v0 + (np.arange(rows) + 0.5) * cell_size_m

    def in_windows(ts: int) -> bool:
        return any(a <= ts <= b for a, b in windows)

    n = 0
    for s in samples:
        if s.floor_hit is None or (windows is not None and not in_windows(s.t_ms)):
            continue
        u, v = s.floor_hit
        n += 1
        ci = min(cols - 1, max(0, int(math.floor((u - u0) / cell_size_m))))
        ri = min(rows - 1, max(0, int(math.floor((v - v0) / cell_size_m))))
        if sigma_m == 0:
            grid[ri, ci] += 1.0
            continue
        d2 = (cv[:, None] - v) ** 2 + (cu[None, :] - u) ** 2
        w = np.where(d2 <= (3 * sigma_m) ** 2, np.exp(-d2 / (2 * sigma_m ** 2)), 0.0)
        total = w.sum()
        if total > 0:
            grid += w / total
        else:
            grid[ri, ci] += 1.0
    return Heatmap(grid, cell_size_m, u0, v0, float(grid.sum()), n)
