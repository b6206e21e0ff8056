"""Run configuration: every knob with a default, JSON file + override support.

Defaults are the project's reference settings: k = 61 at 30 fps, the
training recipe (learning rates, batch sizes, epochs, loss weights) and the
two-stage refinement weights. The smoke profile shrinks everything for tests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields


@dataclass
class RunConfig:
    # timeline
    k: int = 61
    fps: int = 30

    # network widths
    hidden: int = 256
    fc_width: int = 512
    cond_dim: int = 256
    point_hidden: tuple = (64, 128)
    cloud_points: int = 1024

    # CVAE training
    cvae_lr: float = 1e-3
    cvae_batch: int = 16
    cvae_epochs: int = 40
    w_kl: float = 0.1
    kl_warmup_frac: float = 0.1
    w_col: float = 0.01
    w_cont: float = 0.01

    # motion nets training
    route_lr: float = 1e-3
    route_batch: int = 32
    route_epochs: int = 20
    pose_lr: float = 1e-3
    pose_batch: int = 16
    pose_epochs: int = 20
    lambda_t: float = 1.0
    lambda_r: float = 1.0
    lambda_p: float = 1.0
    lambda_h: float = 0.1

    # scene field
    sdf_cell: float = 0.05
    sdf_padding: float = 0.5
    sdf_node_budget: int = 64_000_000
    contact_sigma: float = 0.2

    # refinement (two stages; weights are foot/col/cont/smooth)
    refine_weights_stage1: tuple = (0.0, 1.0, 1.0, 0.25)
    refine_weights_stage2: tuple = (1.0, 1.0, 1.0, 0.25)
    refine_iters: int = 200
    refine_lr: float = 1e-2

    # synthetic data
    n_scenes: int = 8
    clips_per_scene: int = 125
    min_displacement: float = 0.5
    body_stride: int = 10  # one static body every 1/3 second at 30 fps

    # seeds
    seed: int = 0
    template_seed: int = 20240117

    @staticmethod
    def smoke():
        """Small, fast profile for tests and the end-to-end smoke run."""
        return RunConfig(
            k=15, hidden=64, fc_width=128, point_hidden=(32, 64), cond_dim=128,
            cloud_points=256, sdf_cell=0.15, sdf_padding=0.4,
            refine_iters=40, n_scenes=2, clips_per_scene=24,
        )

    def to_dict(self):
        d = asdict(self)
        d["point_hidden"] = list(self.point_hidden)
        d["refine_weights_stage1"] = list(self.refine_weights_stage1)
        d["refine_weights_stage2"] = list(self.refine_weights_stage2)
        return d

    @staticmethod
    def from_dict(d):
        cfg = RunConfig()
        valid = {f.name for f in fields(RunConfig)}
        for key, value in d.items():
            if key not in valid:
                raise ValueError(f"unknown config key {key!r}")
            current = getattr(cfg, key)
            if isinstance(current, tuple):
                value = tuple(value)
            setattr(cfg, key, value)
        return cfg

    @staticmethod
    def load_file(path):
        with open(path) as f:
            return RunConfig.from_dict(json.load(f))

    def apply_overrides(self, pairs):
        """Apply ``key=value`` strings; values parse as JSON, else raw strings."""
        valid = {f.name for f in fields(RunConfig)}
        for pair in pairs:
            if "=" not in pair:
                raise ValueError(f"override must look like key=value, got {pair!r}")
            key, raw = pair.split("=", 1)
            if key not in valid:
                raise ValueError(f"unknown config key {key!r}")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            current = getattr(self, key)
            if isinstance(current, tuple):
                value = tuple(value)
            elif isinstance(current, int) and not isinstance(value, bool):
                value = int(value)
            elif isinstance(current, float):
                value = float(value)
            setattr(self, key, value)
        return self

    def hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
