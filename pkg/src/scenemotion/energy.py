"""Geometric energies over a motion sequence: foot stability, scene collision,
scene contact, and temporal smoothness, with hand-derived vertex gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import body
from .sdf import sample_sdf_batch

CONTACT_SIGMA = 0.2       # m, Geman-McClure scale
STANCE_MOVE_THRESHOLD = 0.02  # m/frame; both soles faster -> no stance
STANCE_HYSTERESIS = 3     # frames; shorter runs are absorbed


def geman_mcclure(x, sigma=CONTACT_SIGMA):
    """Bounded robustifier: 0 at 0, monotone, saturating at sigma^2."""
    x = np.asarray(x, dtype=np.float64)
    s2 = sigma * sigma
    return s2 * x * x / (x * x + s2)


def geman_mcclure_deriv(x, sigma=CONTACT_SIGMA):
    x = np.asarray(x, dtype=np.float64)
    s2 = sigma * sigma
    return 2.0 * s2 * s2 * x / (x * x + s2) ** 2


@dataclass
class FootSegment:
    start: int            # first frame, inclusive
    end: int              # past-the-end frame
    side: str             # "left" | "right" | "none"
    mean: np.ndarray | None  # mean stable-sole centroid, None for no-stance


@dataclass
class FootSegmentation:
    segments: list

    def labels(self, T):
        out = np.empty(T, dtype=object)
        for seg in self.segments:
            out[seg.start:seg.end] = seg.side
        return out


def sole_centroids(template, frames):
    """Per-frame (left, right) sole-centroid tracks, each (T, 3)."""
    left_ids = template.sole_vertex_ids("left")
    right_ids = template.sole_vertex_ids("right")
    T = len(frames)
    left = np.empty((T, 3))
    right = np.empty((T, 3))
    for i in range(T):
        mesh = body.forward(template, body.BodyParams.from_flat(frames[i]))
        left[i] = mesh.vertices[left_ids].mean(axis=0)
        right[i] = mesh.vertices[right_ids].mean(axis=0)
    return left, right


def segment_stable_foot(template, frames, move_threshold=STANCE_MOVE_THRESHOLD,
                        hysteresis=STANCE_HYSTERESIS):
    """Split the timeline into stable-foot segments by the nearer-foot rule.

    Per frame pair the foot whose sole centroid moved less is stable; frames
    where both soles move more than ``move_threshold`` have no stance. Runs
    shorter than ``hysteresis`` frames are absorbed to prevent label chatter.
    """
    if len(frames) < 2:
        raise ValueError(f"need at least 2 frames to segment, got {len(frames)}")
    left, right = sole_centroids(template, frames)
    return segment_from_centroids(left, right, move_threshold, hysteresis)


def segment_from_centroids(left, right, move_threshold=STANCE_MOVE_THRESHOLD,
                           hysteresis=STANCE_HYSTERESIS):
    T = len(left)
    dl = np.linalg.norm(np.diff(left, axis=0), axis=1)
    dr = np.linalg.norm(np.diff(right, axis=0), axis=1)
    raw = np.where((dl > move_threshold) & (dr > move_threshold), "none",
                   np.where(dl <= dr, "left", "right")).tolist()
    raw.append(raw[-1])  # last frame inherits the last pair's label

    runs = []
    for label in raw:
        if runs and runs[-1][0] == label:
            runs[-1][1] += 1
        else:
            runs.append([label, 1])
    merged = []
    for label, length in runs:
        if merged and length < hysteresis:
            merged[-1][1] += length
        elif merged and merged[-1][0] == label:
            merged[-1][1] += length
        else:
            merged.append([label, length])
    if len(merged) > 1 and merged[0][1] < hysteresis:
        merged[1][1] += merged[0][1]
        merged.pop(0)
        # re-merge in case absorbing created equal neighbors
        fixed = [merged[0]]
        for label, length in merged[1:]:
            if fixed[-1][0] == label:
                fixed[-1][1] += length
            else:
                fixed.append([label, length])
        merged = fixed

    segments = []
    start = 0
    for label, length in merged:
        end = start + length
        if label == "none":
            mean = None
        else:
            track = left if label == "left" else right
            mean = track[start:end].mean(axis=0)
        segments.append(FootSegment(start=start, end=end, side=label, mean=mean))
        start = end
    return FootSegmentation(segments=segments)


# -- energy terms --------------------------------------------------------------
#
# Each *_with_grad returns (value, per-frame vertex cotangents added in place).
# Gradients treat nearest-neighbor correspondences and segment means as
# constants, matching one optimizer inner step.

def e_foot(template, frames, segmentation):
    value, _ = _foot_term(template, frames, segmentation, want_grad=False)
    return value


def _foot_term(template, frames, segmentation, want_grad, g_vertices=None, vertices=None,
               scale=1.0):
    left_ids = template.sole_vertex_ids("left")
    right_ids = template.sole_vertex_ids("right")
    total = 0.0
    for seg in segmentation.segments:
        if seg.side == "none":
            continue
        ids = left_ids if seg.side == "left" else right_ids
        for i in range(seg.start, min(seg.end, len(frames))):
            if vertices is not None:
                verts = vertices[i]
            else:
                verts = body.forward(template, body.BodyParams.from_flat(frames[i])).vertices
            c = verts[ids].mean(axis=0)
            diff = c - seg.mean
            n = np.linalg.norm(diff)
            total += n
            if want_grad and n > 0.0:
                g_vertices[i][ids] += scale * diff / (n * len(ids))
    return total, g_vertices


def e_col(vertices, grid):
    """Mean |negative SDF| per frame, summed over frames; vertices (T, V, 3)."""
    total = 0.0
    for verts in vertices:
        vals, _ = sample_sdf_batch(grid, verts)
        total += np.abs(np.minimum(vals, 0.0)).sum() / len(verts)
    return total


def _col_term(vertices, grid, want_grad, g_vertices=None, scale=1.0):
    total = 0.0
    for i, verts in enumerate(vertices):
        vals, grads = sample_sdf_batch(grid, verts)
        neg = vals < 0.0
        total += -vals[neg].sum() / len(verts)
        if want_grad and neg.any():
            g_vertices[i][neg] += scale * (-grads[neg]) / len(verts)
    return total, g_vertices


def e_cont(vertices, contact_ids, index, sigma=CONTACT_SIGMA):
    """Sum of robustified nearest-scene distances of the contact vertices."""
    total = 0.0
    for verts in vertices:
        _, d = index.nearest(verts[contact_ids])
        total += geman_mcclure(d, sigma).sum()
    return total


def _cont_term(vertices, contact_ids, index, sigma, want_grad, g_vertices=None, scale=1.0):
    total = 0.0
    for i, verts in enumerate(vertices):
        cv = verts[contact_ids]
        nn_idx, d = index.nearest(cv)
        total += geman_mcclure(d, sigma).sum()
        if want_grad:
            pos = d > 0.0
            if pos.any():
                pull = geman_mcclure_deriv(d[pos], sigma) / d[pos]
                g_vertices[i][contact_ids[pos]] += scale * pull[:, None] * (cv[pos] - index.points[nn_idx[pos]])
    return total, g_vertices


def e_smooth(vertices):
    """Sum over consecutive frames of the Frobenius norm of the vertex delta."""
    if len(vertices) < 2:
        raise ValueError("need at least 2 frames for the smoothness term")
    total = 0.0
    for i in range(len(vertices) - 1):
        total += np.linalg.norm(vertices[i] - vertices[i + 1])
    return total


def _smooth_term(vertices, want_grad, g_vertices=None, scale=1.0):
    total = 0.0
    for i in range(len(vertices) - 1):
        diff = vertices[i] - vertices[i + 1]
        n = np.linalg.norm(diff)
        total += n
        if want_grad and n > 0.0:
            g = scale * diff / n
            g_vertices[i] += g
            g_vertices[i + 1] -= g
    return total, g_vertices


@dataclass
class EnergyWeights:
    foot: float = 1.0
    col: float = 1.0
    cont: float = 1.0
    smooth: float = 0.25

    def __post_init__(self):
        vals = (self.foot, self.col, self.cont, self.smooth)
        if any(w < 0 or not np.isfinite(w) for w in vals):
            raise ValueError(f"energy weights must be finite and non-negative, got {vals}")

    def as_tuple(self):
        return (self.foot, self.col, self.cont, self.smooth)


@dataclass
class EnergyReport:
    foot: float
    col: float
    cont: float
    smooth: float
    weights: EnergyWeights
    total: float = field(init=False)

    def __post_init__(self):
        self.total = (self.weights.foot * self.foot + self.weights.col * self.col +
                      self.weights.cont * self.cont + self.weights.smooth * self.smooth)

    def to_dict(self):
        return {"foot": self.foot, "col": self.col, "cont": self.cont,
                "smooth": self.smooth, "total": self.total,
                "weights": list(self.weights.as_tuple())}


def total_energy(template, seq, scene_field, weights, segmentation=None, sigma=CONTACT_SIGMA):
    """Evaluate all four terms; segmentation is recomputed unless supplied."""
    frames = seq.frames if hasattr(seq, "frames") else np.asarray(seq)
    vertices = np.stack([
        body.forward(template, body.BodyParams.from_flat(f)).vertices for f in frames
    ])
    if segmentation is None:
        segmentation = segment_stable_foot(template, frames)
    foot, _ = _foot_term(template, frames, segmentation, want_grad=False, vertices=vertices)
    col = e_col(vertices, scene_field.grid)
    cont = e_cont(vertices, template.contact_vertex_ids(), scene_field.index, sigma)
    smooth = e_smooth(vertices) if len(frames) >= 2 else 0.0
    return EnergyReport(foot=foot, col=col, cont=cont, smooth=smooth, weights=weights)
