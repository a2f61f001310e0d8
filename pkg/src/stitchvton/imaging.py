"""Pixel-space types and mask/pose algebra.

Masks use keep-polarity throughout: 1 marks preserved context, 0 marks
the editable (inpainted) region. The single-channel mask plane handed
to the network is the inverted edit indicator; that conversion lives in
the conditioning module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import EmptyMaskError, ShapeError

__all__ = [
    "Image",
    "BinaryMask",
    "SkeletonPose",
    "PoseMap",
    "JOINT_NAMES",
    "SKELETON_EDGES",
    "JOINT_COLORS",
    "EDGE_COLORS",
    "POSE_PART_NAMES",
    "POSE_PART_COLORS",
    "LUMA_WEIGHTS",
    "to_grayscale",
    "stitch_pose_into_mask",
    "derive_bbox_mask",
    "rasterize_skeleton",
    "colorize_pose_map",
    "downsample_mask",
    "load_image",
    "save_image",
    "load_mask",
    "save_mask",
    "load_skeleton",
    "save_skeleton",
    "load_pose_map",
    "save_pose_map",
]

PATCH = 8  # latent patch size; image dims must divide by it

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float32)  # BT.601

# 18-joint body model with the standard 17-edge connectivity.
JOINT_NAMES = (
    "nose", "neck",
    "right_shoulder", "right_elbow", "right_wrist",
    "left_shoulder", "left_elbow", "left_wrist",
    "right_hip", "right_knee", "right_ankle",
    "left_hip", "left_knee", "left_ankle",
    "right_eye", "left_eye", "right_ear", "left_ear",
)

SKELETON_EDGES = (
    (0, 1), (1, 2), (2, 3), (3, 4), (1, 5), (5, 6), (6, 7),
    (1, 8), (8, 9), (9, 10), (1, 11), (11, 12), (12, 13),
    (0, 14), (14, 16), (0, 15), (15, 17),
)

# Joint/edge palette as used by the usual skeleton visualizers.
JOINT_COLORS = np.array([
    [255, 0, 0], [255, 85, 0], [255, 170, 0], [255, 255, 0], [170, 255, 0],
    [85, 255, 0], [0, 255, 0], [0, 255, 85], [0, 255, 170], [0, 255, 255],
    [0, 170, 255], [0, 85, 255], [0, 0, 255], [85, 0, 255], [170, 0, 255],
    [255, 0, 255], [255, 0, 170], [255, 0, 85],
], dtype=np.float32) / 255.0

EDGE_COLORS = JOINT_COLORS[:17]

# Dense pose-map parts for the synthetic figures (P = 8). Colors are
# saturated and spread out in luma so the grayscale rendering keeps
# the parts distinguishable.
POSE_PART_NAMES = (
    "background", "head", "torso",
    "upper_arm_left", "lower_arm_left",
    "upper_arm_right", "lower_arm_right",
    "leg_left", "leg_right",
)

POSE_PART_COLORS = np.array([
    [0.00, 0.00, 0.00],   # background
    [1.00, 0.85, 0.55],   # head        luma ~0.86
    [0.95, 0.75, 0.05],   # torso       luma ~0.73
    [0.25, 0.95, 0.35],   # u-arm left  luma ~0.67
    [0.10, 0.75, 0.85],   # l-arm left  luma ~0.57
    [0.95, 0.30, 0.30],   # u-arm right luma ~0.50
    [0.75, 0.15, 0.75],   # l-arm right luma ~0.40
    [0.20, 0.30, 0.95],   # leg left    luma ~0.34
    [0.45, 0.10, 0.20],   # leg right   luma ~0.22
], dtype=np.float32)


# ---------------------------------------------------------------------------
# domain types

@dataclass
class Image:
    """RGB image, float32 values in [0,1], dims divisible by 8."""

    rgb: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.rgb, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ShapeError("Image needs (H, W, 3), got %s" % (arr.shape,))
        if arr.shape[0] % PATCH or arr.shape[1] % PATCH:
            raise ShapeError("Image dims %s not divisible by %d"
                             % (arr.shape[:2], PATCH))
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ShapeError("Image values outside [0,1]")
        self.rgb = arr

    @property
    def height(self):
        return self.rgb.shape[0]

    @property
    def width(self):
        return self.rgb.shape[1]

    def luma(self):
        return self.rgb @ LUMA_WEIGHTS


@dataclass
class BinaryMask:
    """Strictly binary plane; 1 = preserved context, 0 = editable."""

    keep: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.keep)
        if arr.ndim != 2:
            raise ShapeError("BinaryMask needs (H, W), got %s" % (arr.shape,))
        vals = np.unique(arr)
        if not np.all(np.isin(vals, (0, 1))):
            raise ShapeError("BinaryMask must be strictly binary")
        self.keep = arr.astype(np.uint8)

    @property
    def height(self):
        return self.keep.shape[0]

    @property
    def width(self):
        return self.keep.shape[1]

    def edit(self):
        """Inverted polarity: 1 where editable."""
        return (1 - self.keep).astype(np.uint8)

    def editable_count(self):
        return int((self.keep == 0).sum())


@dataclass
class Joint:
    name: str
    x: float
    y: float
    visible: bool = True


@dataclass
class SkeletonPose:
    """18 named joints plus the fixed 17-edge connectivity."""

    joints: list
    edges: tuple = field(default=SKELETON_EDGES)

    def __post_init__(self):
        if len(self.joints) != len(JOINT_NAMES):
            raise ShapeError("SkeletonPose needs %d joints, got %d"
                             % (len(JOINT_NAMES), len(self.joints)))
        n = len(self.joints)
        for a, b in self.edges:
            if not (0 <= a < n and 0 <= b < n):
                raise ShapeError("skeleton edge (%d,%d) out of range" % (a, b))


@dataclass
class PoseMap:
    """Per-pixel body-part labels, 0 = background, 1..P parts."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ShapeError("PoseMap needs (H, W), got %s" % (arr.shape,))
        if arr.min() < 0 or arr.max() >= len(POSE_PART_COLORS):
            raise ShapeError("PoseMap labels outside [0, %d]"
                             % (len(POSE_PART_COLORS) - 1))
        self.labels = arr.astype(np.uint8)


# ---------------------------------------------------------------------------
# operations

def to_grayscale(img):
    """BT.601 luma replicated to all three channels."""
    y = img.luma()
    return Image(np.repeat(y[:, :, None], 3, axis=2))


def stitch_pose_into_mask(person, pose, keep):
    """Per-pixel select: person where keep=1, pose where keep=0."""
    if person.rgb.shape != pose.rgb.shape:
        raise ShapeError("stitch: person %s vs pose %s"
                         % (person.rgb.shape, pose.rgb.shape))
    if keep.keep.shape != person.rgb.shape[:2]:
        raise ShapeError("stitch: mask %s vs image %s"
                         % (keep.keep.shape, person.rgb.shape[:2]))
    k = keep.keep[:, :, None].astype(np.float32)
    return Image(person.rgb * k + pose.rgb * (1.0 - k))


def derive_bbox_mask(fine):
    """Minimal axis-aligned rectangle covering all editable pixels."""
    edit = fine.keep == 0
    if not edit.any():
        raise EmptyMaskError("mask has no editable pixel")
    rows = np.where(edit.any(axis=1))[0]
    cols = np.where(edit.any(axis=0))[0]
    out = np.ones_like(fine.keep)
    out[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1] = 0
    return BinaryMask(out)


def _paint_segment(rgb, p0, p1, radius, color):
    # lit iff pixel center within `radius` of the segment
    h, w = rgb.shape[:2]
    x0, y0 = p0
    x1, y1 = p1
    lo_x = max(0, int(np.floor(min(x0, x1) - radius - 1)))
    hi_x = min(w, int(np.ceil(max(x0, x1) + radius + 2)))
    lo_y = max(0, int(np.floor(min(y0, y1) - radius - 1)))
    hi_y = min(h, int(np.ceil(max(y0, y1) + radius + 2)))
    if lo_x >= hi_x or lo_y >= hi_y:
        return
    ys, xs = np.mgrid[lo_y:hi_y, lo_x:hi_x]
    dx, dy = x1 - x0, y1 - y0
    denom = dx * dx + dy * dy
    if denom == 0:
        t = np.zeros_like(xs, dtype=np.float64)
    else:
        t = np.clip(((xs - x0) * dx + (ys - y0) * dy) / denom, 0.0, 1.0)
    dist2 = (xs - (x0 + t * dx)) ** 2 + (ys - (y0 + t * dy)) ** 2
    hit = dist2 <= radius * radius
    region = rgb[lo_y:hi_y, lo_x:hi_x]
    region[hit] = color


def rasterize_skeleton(pose, h, w, color=True):
    """Stick-figure render: 3-px-wide edges plus radius-4 joint discs.

    Color mode uses the fixed edge/joint palettes; gray mode draws
    white strokes. Invisible joints (and edges touching them) are
    skipped. Background is black.
    """
    rgb = np.zeros((h, w, 3), dtype=np.float32)
    white = np.array([1.0, 1.0, 1.0], dtype=np.float32)
    for e, (a, b) in enumerate(pose.edges):
        ja, jb = pose.joints[a], pose.joints[b]
        if not (ja.visible and jb.visible):
            continue
        c = EDGE_COLORS[e % len(EDGE_COLORS)] if color else white
        _paint_segment(rgb, (ja.x, ja.y), (jb.x, jb.y), 1.5, c)
    for j, joint in enumerate(pose.joints):
        if not joint.visible:
            continue
        c = JOINT_COLORS[j % len(JOINT_COLORS)] if color else white
        _paint_segment(rgb, (joint.x, joint.y), (joint.x, joint.y), 4.0, c)
    return Image(rgb)


def colorize_pose_map(pm):
    """Palette lookup: label 0 is black, label k gets its part color."""
    return Image(POSE_PART_COLORS[pm.labels])


def downsample_mask(keep, factor=PATCH):
    """Latent-resolution keep plane: a cell is editable iff any covered
    pixel is editable."""
    h, w = keep.keep.shape
    if h % factor or w % factor:
        raise ShapeError("mask dims %s not divisible by %d" % ((h, w), factor))
    edit = keep.edit().reshape(h // factor, factor, w // factor, factor)
    cell_edit = edit.max(axis=(1, 3))
    return BinaryMask((1 - cell_edit).astype(np.uint8))


# ---------------------------------------------------------------------------
# file formats

def save_image(img, path):
    """8-bit PNG, values quantized by round(v*255)."""
    q = np.round(img.rgb * 255.0).astype(np.uint8)
    PILImage.fromarray(q, mode="RGB").save(path, format="PNG")


def load_image(path):
    arr = np.asarray(PILImage.open(path).convert("RGB"), dtype=np.float32)
    return Image(arr / 255.0)


def save_mask(mask, path):
    q = (mask.keep * 255).astype(np.uint8)
    PILImage.fromarray(q, mode="L").save(path, format="PNG")


def load_mask(path):
    arr = np.asarray(PILImage.open(path).convert("L"))
    return BinaryMask((arr >= 128).astype(np.uint8))


def save_pose_map(pm, path):
    PILImage.fromarray(pm.labels, mode="L").save(path, format="PNG")


def load_pose_map(path):
    arr = np.asarray(PILImage.open(path).convert("L"))
    return PoseMap(arr)


def save_skeleton(pose, path):
    doc = {
        "joints": [{"name": j.name, "x": float(j.x), "y": float(j.y),
                    "v": 1 if j.visible else 0} for j in pose.joints],
        "edges": [[int(a), int(b)] for a, b in pose.edges],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_skeleton(path):
    doc = json.loads(Path(path).read_text())
    joints = [Joint(j["name"], float(j["x"]), float(j["y"]), bool(j["v"]))
              for j in doc["joints"]]
    edges = tuple((int(a), int(b)) for a, b in doc["edges"])
    return SkeletonPose(joints, edges)
