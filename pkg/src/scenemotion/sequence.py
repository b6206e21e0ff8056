"""Motion sequences: ordered frames of flat body parameters on a 30 fps timeline."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import body

SEQUENCE_VERSION = 1
FRAME_DTYPE = "<f8"


@dataclass
class MotionSequence:
    frames: np.ndarray                       # (T, 75) flat BodyParams records
    fps: int = 30
    chunk_boundaries: list = field(default_factory=list)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64).reshape(-1, body.PARAM_DIM)
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("sequence contains non-finite parameters")

    def __len__(self):
        return len(self.frames)

    @property
    def translations(self):
        return self.frames[:, 0:3]

    @property
    def rotations(self):
        return self.frames[:, 3:9]

    @property
    def betas(self):
        return self.frames[:, 9:19]

    @property
    def poses(self):
        return self.frames[:, 19:51]

    @property
    def hands(self):
        return self.frames[:, 51:75]

    def params(self, i):
        return body.BodyParams.from_flat(self.frames[i])

    def shares_beta(self, atol=0.0):
        return np.abs(self.betas - self.betas[0]).max(initial=0.0) <= atol

    def copy(self):
        return MotionSequence(frames=self.frames.copy(), fps=self.fps,
                              chunk_boundaries=list(self.chunk_boundaries))

    def path_length(self):
        """Total pelvis travel in meters."""
        return float(np.linalg.norm(np.diff(self.translations, axis=0), axis=1).sum())

    def meshes(self, template):
        """Posed vertices for every frame, (T, V, 3)."""
        return np.stack([body.forward(template, self.params(i)).vertices for i in range(len(self))])


def save_sequence(dirpath, seq, extra=None):
    """JSON index plus a raw little-endian float64 frame block."""
    os.makedirs(dirpath, exist_ok=True)
    frames_path = os.path.join(dirpath, "frames.bin")
    with open(frames_path, "wb") as f:
        f.write(np.ascontiguousarray(seq.frames, dtype=FRAME_DTYPE).tobytes())
    index = {
        "version": SEQUENCE_VERSION,
        "fps": seq.fps,
        "num_frames": int(len(seq)),
        "param_dim": body.PARAM_DIM,
        "dtype": FRAME_DTYPE,
        "frames_file": "frames.bin",
        "chunk_boundaries": [int(i) for i in seq.chunk_boundaries],
    }
    if extra:
        index["extra"] = extra
    with open(os.path.join(dirpath, "sequence.json"), "w") as f:
        json.dump(index, f, indent=2, sort_keys=True)


def load_sequence(dirpath):
    with open(os.path.join(dirpath, "sequence.json")) as f:
        index = json.load(f)
    if index.get("version") != SEQUENCE_VERSION:
        raise ValueError(f"{dirpath}: unsupported sequence version {index.get('version')}")
    raw = np.fromfile(os.path.join(dirpath, index["frames_file"]), dtype=index["dtype"])
    frames = raw.reshape(index["num_frames"], index["param_dim"]).astype(np.float64)
    return MotionSequence(frames=frames, fps=index["fps"],
                          chunk_boundaries=list(index.get("chunk_boundaries", [])))


def export_meshes(dirpath, seq, template, every=1):
    """Per-frame OBJ export plus a frame index file; returns written paths."""
    from .scene import save_obj
    os.makedirs(dirpath, exist_ok=True)
    written = []
    for i in range(0, len(seq), every):
        mesh = body.forward(template, seq.params(i))
        path = os.path.join(dirpath, f"frame_{i:05d}.obj")
        save_obj(path, mesh.vertices, mesh.faces)
        written.append(path)
    with open(os.path.join(dirpath, "frames_index.json"), "w") as f:
        json.dump({"fps": seq.fps, "files": [os.path.basename(p) for p in written]}, f, indent=2)
    return written
