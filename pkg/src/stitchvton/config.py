"""Run configuration, echoed into checkpoints, reports and run.json."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ContractError
from .latent_codec import CODEC_SCALES

__all__ = ["RunConfig", "write_run_record", "CODE_VERSION"]

CODE_VERSION = "0.1.0"


@dataclass
class RunConfig:
    """Everything needed to reproduce a run byte-for-byte."""

    image_size: int = 64
    mode: str = "pose-stitch-gray"
    mask_mix: float = 0.5            # fraction of fine-grained mask draws
    timesteps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    steps: int = 5000
    batch_size: int = 8
    lr: float = 1e-4
    cond_dropout: float = 0.1
    ddim_steps: int = 25
    guidance_scale: float = 5.0
    seed: int = 0
    data_dir: str = ""
    out_path: str = ""
    codec_scales: list = field(default_factory=lambda: list(CODEC_SCALES))

    def __post_init__(self):
        if not 0.0 <= self.mask_mix <= 1.0:
            raise ContractError("mask_mix must be in [0,1]")
        if not 0.0 <= self.cond_dropout < 1.0:
            raise ContractError("cond_dropout must be in [0,1)")
        if self.guidance_scale < 1.0:
            raise ContractError("guidance scale must be >= 1")
        if self.image_size % 8:
            raise ContractError("image_size must be divisible by 8")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError("unknown config keys: %s" % sorted(unknown))
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        return asdict(self)


def write_run_record(out_dir, config, command, argv):
    """Drop a run.json next to a command's artifacts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    record = {
        "command": command,
        "argv": list(argv),
        "config": config.to_dict(),
        "code_version": CODE_VERSION,
    }
    (out / "run.json").write_text(json.dumps(record, indent=1, sort_keys=True))
