"""Gradient-based refinement of a whole sequence against the scene.

Optimizes every frame's translation, global orientation, body pose and hand
pose (shape stays fixed) with Adam, under a staged weight schedule. Foot
segmentation is recomputed at stage boundaries; nearest-neighbor contact
correspondences are refreshed every iteration and frozen within it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import body
from .energy import (CONTACT_SIGMA, EnergyReport, EnergyWeights, _col_term, _cont_term,
                     _foot_term, _smooth_term, geman_mcclure, geman_mcclure_deriv,
                     segment_stable_foot)
from .errors import InvalidRotationError, NumericError
from .nn.adam import AdamState
from .nn.params import Param
from .sequence import MotionSequence

DEFAULT_STAGE_ITERS = 200
DEFAULT_STAGE_LR = 1e-2

# variable layout per frame: t(3) + r(6) + p(32) + h(24)
_VAR_DIM = 65


@dataclass
class RefineStage:
    weights: EnergyWeights
    iters: int = DEFAULT_STAGE_ITERS
    lr: float = DEFAULT_STAGE_LR

    def __post_init__(self):
        if self.iters < 1:
            raise ValueError(f"stage iteration count must be >= 1, got {self.iters}")


@dataclass
class RefinementSchedule:
    stages: list

    def __post_init__(self):
        if not self.stages:
            raise ValueError("schedule needs at least one stage")

    @staticmethod
    def two_stage(iters=DEFAULT_STAGE_ITERS, lr=DEFAULT_STAGE_LR):
        """Environment-first stage, then foot stability joins in."""
        return RefinementSchedule(stages=[
            RefineStage(EnergyWeights(foot=0.0, col=1.0, cont=1.0, smooth=0.25), iters, lr),
            RefineStage(EnergyWeights(foot=1.0, col=1.0, cont=1.0, smooth=0.25), iters, lr),
        ])

    @staticmethod
    def from_json(path):
        with open(path) as f:
            records = json.load(f)
        stages = []
        for rec in records:
            w = rec["weights"]
            if isinstance(w, dict):
                weights = EnergyWeights(**w)
            else:
                weights = EnergyWeights(*w)
            stages.append(RefineStage(weights, int(rec.get("iters", DEFAULT_STAGE_ITERS)),
                                      float(rec.get("lr", DEFAULT_STAGE_LR))))
        return RefinementSchedule(stages=stages)


@dataclass
class RefineResult:
    sequence: MotionSequence
    history: list                 # per stage: dict with weights and totals per iteration
    reports: list                 # per stage: (initial EnergyReport, final EnergyReport)
    diagnostic: str | None = None


def frames_to_vars(frames):
    return np.concatenate([frames[:, 0:9], frames[:, 19:75]], axis=1)


def vars_to_frames(x, betas):
    return np.concatenate([x[:, 0:9], betas, x[:, 9:65]], axis=1)


def split_param_grads(grads):
    """Pack a per-frame pullback dict into the flat variable layout."""
    return np.concatenate([grads["t"], grads["r"], grads["p"], grads["h"]])


def energy_and_gradients(template, frames, scene_field, weights, segmentation,
                         sigma=CONTACT_SIGMA, frozen_nn=None, want_grad=True):
    """Weighted energy report plus dTotal/d(t,r,p,h) per frame.

    ``frozen_nn`` optionally pins per-frame contact correspondences (T, C int
    array of cloud indices); otherwise fresh exact queries are used and the
    gradient is taken with those correspondences held fixed.
    """
    T = len(frames)
    caches = [None] * T
    V = template.num_vertices
    vertices = np.empty((T, V, 3))
    for i in range(T):
        mesh, caches[i] = body.forward_with_cache(template, body.BodyParams.from_flat(frames[i]))
        vertices[i] = mesh.vertices

    g_vertices = np.zeros((T, V, 3)) if want_grad else None
    foot, _ = _foot_term(template, frames, segmentation, want_grad and weights.foot != 0.0,
                         g_vertices, vertices, scale=weights.foot)
    col, _ = _col_term(vertices, scene_field.grid, want_grad and weights.col != 0.0,
                       g_vertices, scale=weights.col)
    contact_ids = template.contact_vertex_ids()
    cont = _contact_value_grad(vertices, contact_ids, scene_field, sigma,
                               want_grad and weights.cont != 0.0, g_vertices,
                               scale=weights.cont, frozen_nn=frozen_nn)
    smooth, _ = _smooth_term(vertices, want_grad and weights.smooth != 0.0,
                             g_vertices, scale=weights.smooth)
    report = EnergyReport(foot=foot, col=col, cont=cont, smooth=smooth, weights=weights)
    if not want_grad:
        return report, None
    g_x = np.empty((T, _VAR_DIM))
    for i in range(T):
        grads = body.pullback(caches[i], g_vertices[i])
        g_x[i] = split_param_grads(grads)
    return report, g_x


def _contact_value_grad(vertices, contact_ids, scene_field, sigma, want_grad,
                        g_vertices, scale, frozen_nn):
    if frozen_nn is None:
        total, _ = _cont_term(vertices, contact_ids, scene_field.index, sigma,
                              want_grad, g_vertices, scale)
        return total
    total = 0.0
    pts = scene_field.index.points
    for i, verts in enumerate(vertices):
        cv = verts[contact_ids]
        target = pts[frozen_nn[i]]
        diff = cv - target
        d = np.linalg.norm(diff, axis=1)
        total += geman_mcclure(d, sigma).sum()
        if want_grad:
            pos = d > 0.0
            pull = geman_mcclure_deriv(d[pos], sigma) / d[pos]
            g_vertices[i][contact_ids[pos]] += scale * pull[:, None] * diff[pos]
    return total


def contact_correspondences(template, frames, scene_field):
    """Exact nearest-cloud index of every contact vertex per frame, (T, C)."""
    contact_ids = template.contact_vertex_ids()
    out = np.empty((len(frames), len(contact_ids)), dtype=np.int64)
    for i, f in enumerate(frames):
        mesh = body.forward(template, body.BodyParams.from_flat(f))
        idx, _ = scene_field.index.nearest(mesh.vertices[contact_ids])
        out[i] = idx
    return out


def refine(template, seq, scene_field, schedule, sigma=CONTACT_SIGMA):
    """Run the staged Adam refinement over the whole sequence.

    Returns a RefineResult; on non-finite energy or gradients the loop aborts
    and the result carries the last finite state plus a diagnostic string.
    """
    betas = seq.betas.copy()
    x = Param("refine.vars", frames_to_vars(seq.frames))
    adam = AdamState([x])
    history = []
    reports = []
    diagnostic = None
    last_finite = x.value.copy()

    for stage_idx, stage in enumerate(schedule.stages):
        frames = vars_to_frames(x.value, betas)
        segmentation = segment_stable_foot(template, frames)  # stage-frozen targets
        totals = []
        initial_report = None
        final_report = None
        for it in range(stage.iters):
            frames = vars_to_frames(x.value, betas)
            try:
                report, g_x = energy_and_gradients(template, frames, scene_field,
                                                   stage.weights, segmentation, sigma)
            except (InvalidRotationError, NumericError, FloatingPointError) as e:
                diagnostic = f"stage {stage_idx}: {e} at iteration {it}"
                x.value[...] = last_finite
                break
            if not np.isfinite(report.total):
                diagnostic = f"stage {stage_idx}: non-finite energy at iteration {it}"
                x.value[...] = last_finite
                break
            last_finite = x.value.copy()
            if initial_report is None:
                initial_report = report
            totals.append(report.total)
            x.zero_grad()
            x.grad += g_x
            try:
                adam.step(stage.lr)
            except NumericError as e:
                diagnostic = f"stage {stage_idx}: {e} at iteration {it}"
                break
        else:
            frames = vars_to_frames(x.value, betas)
            final_report, _ = energy_and_gradients(template, frames, scene_field,
                                                   stage.weights, segmentation, sigma,
                                                   want_grad=False)
            totals.append(final_report.total)
        history.append({"stage": stage_idx, "weights": list(stage.weights.as_tuple()),
                        "lr": stage.lr, "totals": totals})
        reports.append((initial_report, final_report))
        if diagnostic is not None:
            break

    refined = MotionSequence(frames=vars_to_frames(x.value, betas), fps=seq.fps,
                             chunk_boundaries=list(seq.chunk_boundaries))
    return RefineResult(sequence=refined, history=history, reports=reports,
                        diagnostic=diagnostic)
