"""Model-input assembly for every pose-conditioning configuration.

Six modes share one 9-channel input contract so the denoiser parameter
count never changes. Stitch modes composite the rendered pose into the
editable area of the person image before encoding; concat modes place
the rendered pose side-by-side after the garment along the width axis.
Width multiplier is 3 for concat modes and 2 otherwise, the extra
columns being zero-padded in the noisy and mask rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ContractError, ShapeError
from .imaging import (
    BinaryMask,
    Image,
    colorize_pose_map,
    downsample_mask,
    rasterize_skeleton,
    stitch_pose_into_mask,
    to_grayscale,
)
from .latent_codec import Latent

__all__ = [
    "ConditioningMode",
    "MaskStrategy",
    "LatentBundle",
    "STACKED_CHANNELS",
    "build_condition_image",
    "render_pose_image",
    "assemble_input",
    "edit_plane_for",
    "crop_output",
    "width_multiplier",
]

STACKED_CHANNELS = 9  # 4 noisy + 4 masked + 1 mask plane


class ConditioningMode(Enum):
    """The five pose-conditioning control groups plus the pose-free
    baseline. Values are the exact flag/config spellings."""

    POSE_FREE = "pose-free"
    JOINTS_STITCH = "joints-stitch"
    JOINTS_CONCAT = "joints-concat"
    POSE_CONCAT = "pose-concat"
    POSE_CONCAT_GRAY = "pose-concat-gray"
    POSE_STITCH_GRAY = "pose-stitch-gray"

    @classmethod
    def parse(cls, name):
        for mode in cls:
            if mode.value == name:
                return mode
        raise ContractError("unknown conditioning mode %r (choose from %s)"
                            % (name, [m.value for m in cls]))

    @property
    def is_concat(self):
        return self in (ConditioningMode.JOINTS_CONCAT,
                        ConditioningMode.POSE_CONCAT,
                        ConditioningMode.POSE_CONCAT_GRAY)

    @property
    def is_stitch(self):
        return self in (ConditioningMode.JOINTS_STITCH,
                        ConditioningMode.POSE_STITCH_GRAY)

    @property
    def uses_skeleton(self):
        return self in (ConditioningMode.JOINTS_STITCH,
                        ConditioningMode.JOINTS_CONCAT)

    @property
    def uses_pose_map(self):
        return self in (ConditioningMode.POSE_CONCAT,
                        ConditioningMode.POSE_CONCAT_GRAY,
                        ConditioningMode.POSE_STITCH_GRAY)


class MaskStrategy(Enum):
    FINE_GRAINED = "fine-grained"
    BOUNDING_BOX = "bounding-box"

    @classmethod
    def parse(cls, name):
        for s in cls:
            if s.value == name:
                return s
        raise ContractError("unknown mask strategy %r (choose from %s)"
                            % (name, [s.value for s in cls]))


def width_multiplier(mode):
    return 3 if mode.is_concat else 2


@dataclass
class LatentBundle:
    """Spatially-extended plane rows that stack to the 9-channel input.

    x_noisy and x_masked are 4-channel, the mask plane 1-channel; all
    share the extended width = width_multiplier * W/8.
    """

    x_noisy: np.ndarray
    x_masked: np.ndarray
    mask_plane: np.ndarray
    width_multiplier: int
    mode: ConditioningMode

    def __post_init__(self):
        if self.x_noisy.shape[0] != 4 or self.x_masked.shape[0] != 4 \
                or self.mask_plane.shape[0] != 1:
            raise ShapeError("bundle channel counts must be 4/4/1, got %s/%s/%s"
                             % (self.x_noisy.shape, self.x_masked.shape,
                                self.mask_plane.shape))
        if not (self.x_noisy.shape[1:] == self.x_masked.shape[1:]
                == self.mask_plane.shape[1:]):
            raise ShapeError("bundle planes disagree spatially")
        expected = 3 if self.mode.is_concat else 2
        if self.width_multiplier != expected:
            raise ShapeError("width multiplier %d inconsistent with mode %s"
                             % (self.width_multiplier, self.mode.value))
        if self.x_noisy.shape[2] % self.width_multiplier:
            raise ShapeError("extended width %d not divisible by %d"
                             % (self.x_noisy.shape[2], self.width_multiplier))

    def stacked(self):
        """The 9 x H/8 x (mult*W/8) network input."""
        return np.concatenate([self.x_noisy, self.x_masked, self.mask_plane],
                              axis=0)


def render_pose_image(mode, h, w, skeleton=None, posemap=None):
    """The pose rendering a mode stitches or concatenates; None for
    the pose-free baseline."""
    if mode is ConditioningMode.POSE_FREE:
        return None
    if mode.uses_skeleton:
        if skeleton is None:
            raise ContractError("mode %s needs a skeleton pose input"
                                % mode.value)
        return rasterize_skeleton(skeleton, h, w, color=True)
    if posemap is None:
        raise ContractError("mode %s needs a pose-map input" % mode.value)
    img = colorize_pose_map(posemap)
    if mode in (ConditioningMode.POSE_CONCAT_GRAY,
                ConditioningMode.POSE_STITCH_GRAY):
        img = to_grayscale(img)
    return img


def build_condition_image(mode, person, keep, skeleton=None, posemap=None):
    """Pixel-space conditioning: (masked person image, optional side
    pose image).

    Stitch modes composite the rendered pose into the editable region;
    concat modes black out the editable region and return the pose as
    a separate side image; the pose-free baseline only blacks out.
    """
    pose_img = render_pose_image(mode, person.height, person.width,
                                 skeleton, posemap)
    black = Image(np.zeros_like(person.rgb))
    if mode.is_stitch:
        return stitch_pose_into_mask(person, pose_img, keep), None
    masked = stitch_pose_into_mask(person, black, keep)
    if mode.is_concat:
        return masked, pose_img
    return masked, None


def _plane(x, channels):
    data = x.data if isinstance(x, Latent) else np.asarray(x, np.float32)
    if data.ndim == 2 and channels == 1:
        data = data[None]
    if data.ndim != 3 or data.shape[0] != channels:
        raise ShapeError("expected (%d, h, w) plane, got %s" % (channels, data.shape))
    return data


def assemble_input(mode, x_t, masked, garment, pose_side=None,
                   edit_mask_plane=None):
    """Width-concat the per-block latents into a LatentBundle.

    Layout along the width axis: [x_t | 0 (| 0)] for the noisy row,
    [masked | garment (| pose)] for the masked row and
    [edit plane | 0 (| 0)] for the mask row. The edit plane marks
    inpainted cells with 1; padded, garment and pose columns stay 0.
    """
    xt = _plane(x_t, 4)
    xm = _plane(masked, 4)
    xg = _plane(garment, 4)
    em = _plane(edit_mask_plane, 1)
    h, w = xt.shape[1:]
    for name, p in (("masked", xm), ("garment", xg), ("mask plane", em)):
        if p.shape[1:] != (h, w):
            raise ShapeError("assemble_input: %s block %s does not match "
                             "x_t block %s" % (name, p.shape[1:], (h, w)))
    if mode.is_concat:
        if pose_side is None:
            raise ContractError("mode %s needs a pose side latent" % mode.value)
        xp = _plane(pose_side, 4)
        if xp.shape[1:] != (h, w):
            raise ShapeError("assemble_input: pose block %s does not match %s"
                             % (xp.shape[1:], (h, w)))
        masked_row = np.concatenate([xm, xg, xp], axis=2)
    else:
        if pose_side is not None:
            raise ContractError("mode %s takes no pose side latent" % mode.value)
        masked_row = np.concatenate([xm, xg], axis=2)
    mult = width_multiplier(mode)
    pad4 = np.zeros((4, h, (mult - 1) * w), dtype=np.float32)
    pad1 = np.zeros((1, h, (mult - 1) * w), dtype=np.float32)
    noisy_row = np.concatenate([xt, pad4], axis=2)
    mask_row = np.concatenate([em, pad1], axis=2)
    return LatentBundle(noisy_row, masked_row.astype(np.float32), mask_row,
                        mult, mode)


def edit_plane_for(keep):
    """Latent-resolution edit indicator (1 = inpaint) for a pixel mask."""
    if not isinstance(keep, BinaryMask):
        raise ContractError("edit_plane_for expects a BinaryMask")
    return downsample_mask(keep).edit().astype(np.float32)[None]


def crop_output(planes, mode=None, multiplier=None):
    """Keep only the leftmost W/8 columns of a spatially extended plane
    set: the first half for stitch layouts, the first third for concat
    layouts. ``multiplier=1`` is the diagnostic identity."""
    if multiplier is None:
        if mode is None:
            raise ContractError("crop_output needs a mode or a multiplier")
        multiplier = width_multiplier(mode)
    data = np.asarray(planes, dtype=np.float32)
    w = data.shape[-1]
    if w % multiplier:
        raise ShapeError("width %d not divisible by multiplier %d"
                         % (w, multiplier))
    return data[..., : w // multiplier]
