"""Procedural articulated-sprite try-on data.

Each sample pairs a figure wearing garment A (the person image) with
the same figure wearing garment B (the ground truth); the flat-lay
shows garment B alone. Within one sample both garments share class and
geometry so person and truth silhouettes are identical and the fine
mask covers the garment region of both. Backgrounds are pure white so
silhouettes can be extracted exactly with a luma threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.ndimage import binary_dilation

from .errors import ContractError
from .imaging import (
    BinaryMask,
    Image,
    Joint,
    JOINT_NAMES,
    PoseMap,
    SkeletonPose,
    derive_bbox_mask,
    load_image,
    load_mask,
    load_pose_map,
    load_skeleton,
    save_image,
    save_mask,
    save_pose_map,
    save_skeleton,
)

__all__ = [
    "ArticulatedFigure",
    "GarmentSpec",
    "SpriteSample",
    "GARMENT_CLASSES",
    "GARMENT_COLORS",
    "GARMENT_PATTERNS",
    "SILHOUETTE_THRESHOLD",
    "silhouette",
    "render_figure",
    "make_sample",
    "generate_dataset",
    "load_sample",
    "load_manifest",
    "sample_rng",
]

SILHOUETTE_THRESHOLD = 0.95  # luma below this counts as figure

SKIN = np.array([0.85, 0.65, 0.50], dtype=np.float32)

GARMENT_CLASSES = ("upper", "lower", "dress")
GARMENT_PATTERNS = ("solid", "stripes", "checker")

# Base colors, lumas spread out and all below the 0.9 white-background
# distinguishability bound.
GARMENT_COLORS = np.array([
    [0.12, 0.12, 0.16],   # near-black
    [0.55, 0.08, 0.10],   # dark red
    [0.20, 0.32, 0.85],   # blue
    [0.16, 0.58, 0.25],   # green
    [0.93, 0.52, 0.12],   # orange
    [0.76, 0.76, 0.80],   # light gray
], dtype=np.float32)

GARMENT_SCALES = (12, 16, 24)  # stripe/checker period in pixels

DILATION_RADIUS = 2  # fine mask = garment region dilated by a 5-px disc

ANGLE_RANGES = {
    "shoulder": (0.15, 1.35),
    "elbow": (-0.40, 1.10),
    "hip": (-0.30, 0.45),
    "knee": (0.00, 0.60),
}
ANGLE_LIMIT = 2.0  # anatomical bound, radians

_PART = {name: i for i, name in enumerate(
    ("background", "head", "torso", "upper_arm_left", "lower_arm_left",
     "upper_arm_right", "lower_arm_right", "leg_left", "leg_right"))}


@dataclass
class ArticulatedFigure:
    """Joint angles (radians) plus body dimensions in pixels.

    Shoulder/hip angles measure rotation away from straight-down,
    positive pointing outward from the torso; elbow/knee angles are
    relative bends of the lower limb.
    """

    shoulder_l: float = 0.0
    shoulder_r: float = 0.0
    elbow_l: float = 0.0
    elbow_r: float = 0.0
    hip_l: float = 0.0
    hip_r: float = 0.0
    knee_l: float = 0.0
    knee_r: float = 0.0
    torso_len: float = 16.0
    torso_width: float = 10.0
    upper_arm: float = 9.5
    lower_arm: float = 8.5
    upper_leg: float = 9.5
    lower_leg: float = 8.5
    anchor: tuple = (31.5, 39.0)

    def __post_init__(self):
        for a in self.angles():
            if not -ANGLE_LIMIT <= a <= ANGLE_LIMIT:
                raise ContractError("joint angle %.3f outside [-%.1f, %.1f]"
                                    % (a, ANGLE_LIMIT, ANGLE_LIMIT))

    def angles(self):
        return (self.shoulder_l, self.shoulder_r, self.elbow_l, self.elbow_r,
                self.hip_l, self.hip_r, self.knee_l, self.knee_r)


@dataclass
class GarmentSpec:
    """Garment class, base color, fill pattern and pattern period."""

    cls: str = "upper"
    color: np.ndarray = None
    pattern: str = "solid"
    scale: int = 16

    def __post_init__(self):
        if self.cls not in GARMENT_CLASSES:
            raise ContractError("unknown garment class %r" % self.cls)
        if self.pattern not in GARMENT_PATTERNS:
            raise ContractError("unknown pattern %r" % self.pattern)
        if self.color is None:
            self.color = GARMENT_COLORS[0]
        self.color = np.asarray(self.color, dtype=np.float32)
        luma = float(self.color @ np.array([0.299, 0.587, 0.114]))
        if luma >= 0.9:
            raise ContractError("garment color luma %.3f not distinguishable "
                                "from white background" % luma)

    def key(self):
        return (self.cls, tuple(np.round(self.color, 4)), self.pattern,
                self.scale)


@dataclass
class SpriteSample:
    """One training/eval record."""

    person: Image
    garment: Image
    posemap: PoseMap
    skeleton: SkeletonPose
    mask_fine: BinaryMask
    mask_bbox: BinaryMask
    truth: Image
    target_skeleton: SkeletonPose = None
    target_posemap: PoseMap = None
    target_truth: Image = None
    figure: ArticulatedFigure = None
    garment_spec: GarmentSpec = None


def silhouette(img):
    """Figure pixels against the white background."""
    return img.luma() < SILHOUETTE_THRESHOLD


# ---------------------------------------------------------------------------
# geometry

def _rot(angle):
    # direction of a limb rotated `angle` away from straight-down
    return np.array([np.sin(angle), np.cos(angle)])


def _joint_points(fig):
    ax, ay = fig.anchor
    pelvis = np.array([ax, ay])
    neck = pelvis - (0.0, fig.torso_len)
    head_center = neck - (0.0, 6.0 + 4.2 * fig.torso_len / 16.0)
    sho_off = fig.torso_width / 2.0 + 1.5
    hip_off = fig.torso_width / 2.0 - 1.0
    pts = {"pelvis": pelvis, "neck": neck, "head": head_center}
    for side, sgn, sho_a, elb_a, hip_a, knee_a in (
            ("left", +1.0, fig.shoulder_l, fig.elbow_l, fig.hip_l, fig.knee_l),
            ("right", -1.0, fig.shoulder_r, fig.elbow_r, fig.hip_r, fig.knee_r)):
        shoulder = neck + (sgn * sho_off, 0.0)
        elbow = shoulder + fig.upper_arm * _rot(sgn * sho_a) * (1, 1)
        wrist = elbow + fig.lower_arm * _rot(sgn * (sho_a + elb_a))
        hip = pelvis + (sgn * hip_off, 0.0)
        knee = hip + fig.upper_leg * _rot(sgn * hip_a)
        ankle = knee + fig.lower_leg * _rot(sgn * (hip_a - knee_a))
        pts.update({"shoulder_%s" % side: shoulder, "elbow_%s" % side: elbow,
                    "wrist_%s" % side: wrist, "hip_%s" % side: hip,
                    "knee_%s" % side: knee, "ankle_%s" % side: ankle})
    return pts


def _head_radius(fig):
    return 4.2 * fig.torso_len / 16.0


def _body_capsules(fig, pts):
    r_arm, r_leg = 2.0, 2.4
    caps = [
        (pts["hip_left"], pts["knee_left"], r_leg, _PART["leg_left"]),
        (pts["knee_left"], pts["ankle_left"], r_leg * 0.92, _PART["leg_left"]),
        (pts["hip_right"], pts["knee_right"], r_leg, _PART["leg_right"]),
        (pts["knee_right"], pts["ankle_right"], r_leg * 0.92, _PART["leg_right"]),
        (pts["neck"], pts["pelvis"], fig.torso_width / 2.0, _PART["torso"]),
        (pts["neck"], pts["neck"] - (0.0, 6.0), 1.8, _PART["torso"]),
        (pts["shoulder_left"], pts["elbow_left"], r_arm, _PART["upper_arm_left"]),
        (pts["shoulder_right"], pts["elbow_right"], r_arm, _PART["upper_arm_right"]),
        (pts["elbow_left"], pts["wrist_left"], r_arm * 0.9, _PART["lower_arm_left"]),
        (pts["elbow_right"], pts["wrist_right"], r_arm * 0.9, _PART["lower_arm_right"]),
        (pts["head"], pts["head"], _head_radius(fig), _PART["head"]),
    ]
    return caps


def _garment_capsules(fig, pts, cls):
    pelvis, neck = pts["pelvis"], pts["neck"]
    caps = []
    if cls in ("upper", "dress"):
        chest = neck + (0.0, 3.5)
        hem = pelvis + (0.0, 1.5) if cls == "upper" else pelvis - (0.0, 4.0)
        caps.append((chest, hem, fig.torso_width / 2.0 + 0.8, None))
        caps.append((pts["shoulder_left"], pts["elbow_left"], 3.0, None))
        caps.append((pts["shoulder_right"], pts["elbow_right"], 3.0, None))
    if cls == "lower":
        caps.append((pelvis - (0.0, 1.0), pelvis + (0.0, 3.0),
                     fig.torso_width / 2.0 + 0.4, None))
        caps.append((pts["hip_left"], pts["knee_left"], 3.2, None))
        caps.append((pts["hip_right"], pts["knee_right"], 3.2, None))
    return caps


def _capsule_mask(h, w, p0, p1, r):
    ys, xs = np.mgrid[0:h, 0:w]
    x0, y0 = p0
    x1, y1 = p1
    dx, dy = x1 - x0, y1 - y0
    denom = dx * dx + dy * dy
    if denom == 0:
        t = 0.0
    else:
        t = np.clip(((xs - x0) * dx + (ys - y0) * dy) / denom, 0.0, 1.0)
    dist2 = (xs - (x0 + t * dx)) ** 2 + (ys - (y0 + t * dy)) ** 2
    return dist2 <= r * r


def _dress_skirt(fig, pts, h, w):
    pelvis = pts["pelvis"]
    waist_y = pelvis[1] - 4.0
    hem_y = pelvis[1] + fig.upper_leg + 0.5
    waist_hw = fig.torso_width / 2.0 + 0.8
    hem_hw = fig.torso_width / 2.0 + 5.0
    ys, xs = np.mgrid[0:h, 0:w]
    frac = np.clip((ys - waist_y) / max(hem_y - waist_y, 1e-6), 0.0, 1.0)
    half = waist_hw + (hem_hw - waist_hw) * frac
    return (ys >= waist_y) & (ys <= hem_y) & (np.abs(xs - pelvis[0]) <= half)


def _garment_region(fig, pts, cls, h, w):
    region = np.zeros((h, w), dtype=bool)
    for p0, p1, r, _ in _garment_capsules(fig, pts, cls):
        region |= _capsule_mask(h, w, p0, p1, r)
    if cls == "dress":
        region |= _dress_skirt(fig, pts, h, w)
    return region


def _pattern_fill(spec, h, w):
    base = spec.color
    second = base * 0.55
    ys, xs = np.mgrid[0:h, 0:w]
    half = max(spec.scale // 2, 1)
    if spec.pattern == "solid":
        sel = np.zeros((h, w), dtype=bool)
    elif spec.pattern == "stripes":
        sel = (ys // half) % 2 == 1
    else:
        sel = ((xs // half) + (ys // half)) % 2 == 1
    fill = np.where(sel[:, :, None], second, base)
    return fill.astype(np.float32)


def _skeleton_from_points(fig, pts):
    joints = []
    coords = {
        "nose": pts["head"],
        "neck": pts["neck"],
        "right_shoulder": pts["shoulder_right"],
        "right_elbow": pts["elbow_right"],
        "right_wrist": pts["wrist_right"],
        "left_shoulder": pts["shoulder_left"],
        "left_elbow": pts["elbow_left"],
        "left_wrist": pts["wrist_left"],
        "right_hip": pts["hip_right"],
        "right_knee": pts["knee_right"],
        "right_ankle": pts["ankle_right"],
        "left_hip": pts["hip_left"],
        "left_knee": pts["knee_left"],
        "left_ankle": pts["ankle_left"],
    }
    for name in JOINT_NAMES:
        if name in coords:
            x, y = coords[name]
            joints.append(Joint(name, float(x), float(y), True))
        else:
            joints.append(Joint(name, 0.0, 0.0, False))  # eyes/ears unused
    return SkeletonPose(joints)


def _figure_extent(fig):
    pts = _joint_points(fig)
    xs, ys = [], []
    for p0, p1, r, _ in _body_capsules(fig, pts):
        for p in (p0, p1):
            xs += [p[0] - r, p[0] + r]
            ys += [p[1] - r, p[1] + r]
    return min(xs), max(xs), min(ys), max(ys)


def fit_figure(fig, h, w, margin=1.0, tries=10):
    """Shift the anchor until the rendered figure fits the bounds.

    Raises after ``tries`` re-anchorings.
    """
    for _ in range(tries):
        x0, x1, y0, y1 = _figure_extent(fig)
        dx = dy = 0.0
        if x0 < margin:
            dx = margin - x0
        elif x1 > w - 1 - margin:
            dx = (w - 1 - margin) - x1
        if y0 < margin:
            dy = margin - y0
        elif y1 > h - 1 - margin:
            dy = (h - 1 - margin) - y1
        if dx == 0.0 and dy == 0.0:
            return fig
        fig = replace(fig, anchor=(fig.anchor[0] + dx, fig.anchor[1] + dy))
    raise ContractError("figure does not fit %dx%d after %d re-anchorings"
                        % (h, w, tries))


# ---------------------------------------------------------------------------
# rendering

def _render(fig, garment, h, w):
    fig = fit_figure(fig, h, w)
    pts = _joint_points(fig)
    labels = np.zeros((h, w), dtype=np.uint8)
    rgb = np.ones((h, w, 3), dtype=np.float32)

    for p0, p1, r, part in _body_capsules(fig, pts):
        m = _capsule_mask(h, w, p0, p1, r)
        labels[m] = part
        rgb[m] = SKIN

    gmask = _garment_region(fig, pts, garment.cls, h, w)
    fill = _pattern_fill(garment, h, w)
    rgb[gmask] = fill[gmask]

    # lower arms read over the garment, the head over everything
    for p0, p1, r, part in _body_capsules(fig, pts):
        if part in (_PART["lower_arm_left"], _PART["lower_arm_right"],
                    _PART["head"]):
            m = _capsule_mask(h, w, p0, p1, r)
            rgb[m] = SKIN
            labels[m] = part

    skel = _skeleton_from_points(fig, pts)
    return Image(rgb), PoseMap(labels), skel, gmask & ~(labels == _PART["head"]), fig


def render_figure(fig, garment, h=64, w=64):
    """Render a clothed figure: (Image, PoseMap, SkeletonPose)."""
    img, pm, skel, _, _ = _render(fig, garment, h, w)
    return img, pm, skel


def _flat_lay(fig, garment, h, w):
    neutral = replace(fig, shoulder_l=0.35, shoulder_r=0.35, elbow_l=0.0,
                      elbow_r=0.0, hip_l=0.15, hip_r=0.15, knee_l=0.0,
                      knee_r=0.0, anchor=(w / 2.0 - 0.5, fig.anchor[1]))
    neutral = fit_figure(neutral, h, w)
    pts = _joint_points(neutral)
    gmask = _garment_region(neutral, pts, garment.cls, h, w)
    fill = _pattern_fill(garment, h, w)
    rgb = np.ones((h, w, 3), dtype=np.float32)
    rgb[gmask] = fill[gmask]
    # recentre on the canvas
    rows = np.where(gmask.any(axis=1))[0]
    cols = np.where(gmask.any(axis=0))[0]
    cy = (rows[0] + rows[-1] + 1) // 2
    cx = (cols[0] + cols[-1] + 1) // 2
    rgb = np.roll(rgb, (h // 2 - cy, w // 2 - cx), axis=(0, 1))
    return Image(rgb)


_DISKS = {}


def _disk(radius):
    if radius not in _DISKS:
        r = int(radius)
        ys, xs = np.mgrid[-r:r + 1, -r:r + 1]
        _DISKS[radius] = (xs * xs + ys * ys) <= radius * radius
    return _DISKS[radius]


def fine_mask_from_region(gmask):
    """Keep-polarity fine mask: garment region dilated by a 5-px disc."""
    dil = binary_dilation(gmask, structure=_disk(DILATION_RADIUS))
    return BinaryMask((~dil).astype(np.uint8))


# ---------------------------------------------------------------------------
# sampling

def _sample_figure(rng, h, w):
    scale = min(h, w) / 64.0
    jit = lambda base, lo, hi: base * rng.uniform(lo, hi)
    fig = ArticulatedFigure(
        shoulder_l=rng.uniform(*ANGLE_RANGES["shoulder"]),
        shoulder_r=rng.uniform(*ANGLE_RANGES["shoulder"]),
        elbow_l=rng.uniform(*ANGLE_RANGES["elbow"]),
        elbow_r=rng.uniform(*ANGLE_RANGES["elbow"]),
        hip_l=rng.uniform(*ANGLE_RANGES["hip"]),
        hip_r=rng.uniform(*ANGLE_RANGES["hip"]),
        knee_l=rng.uniform(*ANGLE_RANGES["knee"]),
        knee_r=rng.uniform(*ANGLE_RANGES["knee"]),
        torso_len=jit(16.0 * scale, 0.92, 1.08),
        torso_width=jit(10.0 * scale, 0.92, 1.08),
        upper_arm=jit(9.5 * scale, 0.92, 1.08),
        lower_arm=jit(8.5 * scale, 0.92, 1.08),
        upper_leg=jit(9.5 * scale, 0.92, 1.08),
        lower_leg=jit(8.5 * scale, 0.92, 1.08),
        anchor=(w / 2.0 - 0.5 + rng.uniform(-2.0, 2.0) * scale,
                (39.0 + rng.uniform(-1.5, 1.5)) * h / 64.0),
    )
    return fig


def _resample_angles(rng, fig):
    return replace(
        fig,
        shoulder_l=rng.uniform(*ANGLE_RANGES["shoulder"]),
        shoulder_r=rng.uniform(*ANGLE_RANGES["shoulder"]),
        elbow_l=rng.uniform(*ANGLE_RANGES["elbow"]),
        elbow_r=rng.uniform(*ANGLE_RANGES["elbow"]),
        hip_l=rng.uniform(*ANGLE_RANGES["hip"]),
        hip_r=rng.uniform(*ANGLE_RANGES["hip"]),
        knee_l=rng.uniform(*ANGLE_RANGES["knee"]),
        knee_r=rng.uniform(*ANGLE_RANGES["knee"]),
    )


def _sample_garment(rng, cls):
    return GarmentSpec(
        cls=cls,
        color=GARMENT_COLORS[rng.integers(len(GARMENT_COLORS))],
        pattern=GARMENT_PATTERNS[rng.integers(len(GARMENT_PATTERNS))],
        scale=GARMENT_SCALES[rng.integers(len(GARMENT_SCALES))],
    )


def make_sample(rng, pose_transfer=False, image_size=64):
    """Draw one SpriteSample. Same rng state gives a byte-identical
    sample."""
    h = w = image_size
    fig = _sample_figure(rng, h, w)
    cls = GARMENT_CLASSES[rng.integers(len(GARMENT_CLASSES))]
    spec_a = _sample_garment(rng, cls)
    spec_b = _sample_garment(rng, cls)
    while spec_b.key() == spec_a.key():
        spec_b = _sample_garment(rng, cls)

    person, _, _, _, fitted = _render(fig, spec_a, h, w)
    truth, posemap, skeleton, gmask, _ = _render(fitted, spec_b, h, w)
    mask_fine = fine_mask_from_region(gmask)
    mask_bbox = derive_bbox_mask(mask_fine)
    flat = _flat_lay(fitted, spec_b, h, w)

    sample = SpriteSample(person=person, garment=flat, posemap=posemap,
                          skeleton=skeleton, mask_fine=mask_fine,
                          mask_bbox=mask_bbox, truth=truth,
                          figure=fitted, garment_spec=spec_b)
    if pose_transfer:
        fig2 = _resample_angles(rng, fitted)
        t_truth, t_pm, t_skel, _, _ = _render(fig2, spec_b, h, w)
        sample.target_truth = t_truth
        sample.target_posemap = t_pm
        sample.target_skeleton = t_skel
    return sample


def sample_rng(seed, index):
    """Per-index generator derived by seed splitting, so parallel or
    out-of-order generation can never change outputs."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


# ---------------------------------------------------------------------------
# on-disk format

def save_sample(sample, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_image(sample.person, out / "person.png")
    save_image(sample.garment, out / "garment.png")
    save_pose_map(sample.posemap, out / "posemap.png")
    save_skeleton(sample.skeleton, out / "skeleton.json")
    save_mask(sample.mask_fine, out / "mask_fine.png")
    save_mask(sample.mask_bbox, out / "mask_bbox.png")
    save_image(sample.truth, out / "truth.png")
    if sample.target_truth is not None:
        save_skeleton(sample.target_skeleton, out / "target_skeleton.json")
        save_pose_map(sample.target_posemap, out / "target_posemap.png")
        save_image(sample.target_truth, out / "target_truth.png")


def load_sample(sample_dir):
    d = Path(sample_dir)
    sample = SpriteSample(
        person=load_image(d / "person.png"),
        garment=load_image(d / "garment.png"),
        posemap=load_pose_map(d / "posemap.png"),
        skeleton=load_skeleton(d / "skeleton.json"),
        mask_fine=load_mask(d / "mask_fine.png"),
        mask_bbox=load_mask(d / "mask_bbox.png"),
        truth=load_image(d / "truth.png"),
    )
    if (d / "target_truth.png").exists():
        sample.target_skeleton = load_skeleton(d / "target_skeleton.json")
        sample.target_posemap = load_pose_map(d / "target_posemap.png")
        sample.target_truth = load_image(d / "target_truth.png")
    return sample


def generate_dataset(n, seed, out_dir, train_frac=0.9, pose_transfer=False,
                     image_size=64):
    """Write n samples plus manifest.json; deterministic given seed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_train = int(round(n * train_frac))
    entries = []
    for i in range(n):
        rng = sample_rng(seed, i)
        sample = make_sample(rng, pose_transfer=pose_transfer,
                             image_size=image_size)
        name = "sample_%06d" % i
        save_sample(sample, out / name)
        entries.append({"dir": name,
                        "split": "train" if i < n_train else "test"})
    manifest = {
        "schema": 1,
        "n": n,
        "seed": seed,
        "image_size": image_size,
        "pose_transfer": bool(pose_transfer),
        "train_frac": train_frac,
        "samples": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1,
                                                  sort_keys=True))
    return manifest


def load_manifest(data_dir):
    path = Path(data_dir) / "manifest.json"
    manifest = json.loads(path.read_text())
    if manifest.get("schema") != 1:
        raise ContractError("unsupported manifest schema %r in %s"
                            % (manifest.get("schema"), path))
    return manifest


def manifest_dirs(data_dir, split=None):
    manifest = load_manifest(data_dir)
    base = Path(data_dir)
    return [base / e["dir"] for e in manifest["samples"]
            if split is None or e["split"] == split]
