import json

import numpy as np
import pytest

from scenemotion import body
from scenemotion.energy import EnergyWeights, segment_stable_foot
from scenemotion.refine import (RefinementSchedule, RefineStage, contact_correspondences,
                                energy_and_gradients, frames_to_vars, refine, vars_to_frames)
from scenemotion.sequence import MotionSequence


def walking_frames(rng, n=4, z=0.93):
    frames = np.zeros((n, body.PARAM_DIM))
    for i in range(n):
        frames[i] = body.BodyParams(
            t=np.array([0.15 * i, 0.02 * i, z]) + rng.standard_normal(3) * 0.01,
            r=np.array([1.0, 0, 0, 0, 1, 0]) + rng.standard_normal(6) * 0.05,
            beta=rng.standard_normal(10) * 0.2,
            p=rng.standard_normal(32) * 0.3,
            h=rng.standard_normal(24) * 0.2).flat()
    return frames


def test_schedule_validation():
    with pytest.raises(ValueError):
        RefinementSchedule(stages=[])
    with pytest.raises(ValueError):
        RefineStage(EnergyWeights(), iters=0)


def test_two_stage_schedule_default_weights():
    sched = RefinementSchedule.two_stage()
    assert sched.stages[0].weights.as_tuple() == (0.0, 1.0, 1.0, 0.25)
    assert sched.stages[1].weights.as_tuple() == (1.0, 1.0, 1.0, 0.25)


def test_schedule_from_json(tmp_path):
    path = tmp_path / "schedule.json"
    path.write_text(json.dumps([
        {"weights": [0.0, 1.0, 1.0, 0.25], "iters": 10, "lr": 0.02},
        {"weights": {"foot": 1.0, "col": 1.0, "cont": 1.0, "smooth": 0.25}, "iters": 5},
    ]))
    sched = RefinementSchedule.from_json(path)
    assert len(sched.stages) == 2
    assert sched.stages[0].iters == 10
    assert sched.stages[0].lr == 0.02
    assert sched.stages[1].weights.foot == 1.0


def test_vars_round_trip():
    rng = np.random.default_rng(0)
    frames = walking_frames(rng)
    x = frames_to_vars(frames)
    back = vars_to_frames(x, frames[:, 9:19])
    assert np.array_equal(back, frames)


def test_zero_weight_schedule_is_identity(template, slab_field):
    rng = np.random.default_rng(1)
    seq = MotionSequence(frames=walking_frames(rng))
    sched = RefinementSchedule([RefineStage(EnergyWeights(0, 0, 0, 0), iters=5, lr=1e-2)])
    result = refine(template, seq, slab_field, sched)
    assert np.array_equal(result.sequence.frames, seq.frames)
    assert result.diagnostic is None


def test_energy_gradients_match_fd(template, slab_field):
    rng = np.random.default_rng(2)
    frames = walking_frames(rng, n=3)
    seg = segment_stable_foot(template, frames)
    weights = EnergyWeights(1.0, 1.0, 1.0, 0.25)
    frozen = contact_correspondences(template, frames, slab_field)
    _, g = energy_and_gradients(template, frames, slab_field, weights, seg, frozen_nn=frozen)

    def loss(x):
        fr = vars_to_frames(x, frames[:, 9:19])
        rep, _ = energy_and_gradients(template, fr, slab_field, weights, seg,
                                      frozen_nn=frozen, want_grad=False)
        return rep.total

    x0 = frames_to_vars(frames)
    h = 1e-4
    checked = 0
    for _ in range(60):
        i = rng.integers(0, len(frames))
        j = rng.integers(0, 65)
        xp, xm = x0.copy(), x0.copy()
        xp[i, j] += h
        xm[i, j] -= h
        fd = (loss(xp) - loss(xm)) / (2 * h)
        if abs(fd) < 1e-7:
            continue
        rel = abs(g[i, j] - fd) / max(abs(fd), abs(g[i, j]))
        assert rel < 1e-3, (i, j, g[i, j], fd)
        checked += 1
    assert checked >= 30


def test_floor_penetration_regression(template, slab_field):
    # soles 5 cm below the slab top; collision-only refinement must fix it
    sole_z = template.rest_vertices[template.sole_vertex_ids("left")][:, 2].min()
    t_z = -sole_z - 0.05
    frames = np.stack([
        body.BodyParams(t=np.array([0.2 * i - 0.4, 0.0, t_z]),
                        r=np.array([1.0, 0, 0, 0, 1, 0]), beta=np.zeros(10),
                        p=np.zeros(32), h=np.zeros(24)).flat()
        for i in range(5)
    ])
    seq = MotionSequence(frames=frames)
    sched = RefinementSchedule([RefineStage(EnergyWeights(0.0, 1.0, 0.0, 0.0),
                                            iters=300, lr=1e-2)])
    result = refine(template, seq, slab_field, sched)
    totals = result.history[0]["totals"]
    assert totals[0] > 0.0
    assert totals[-1] < 0.05 * totals[0]


def test_two_stage_totals_do_not_increase(template, slab_field):
    rng = np.random.default_rng(3)
    seq = MotionSequence(frames=walking_frames(rng, n=6, z=0.96))
    sched = RefinementSchedule.two_stage(iters=40, lr=1e-2)
    result = refine(template, seq, slab_field, sched)
    for stage in result.history:
        assert stage["totals"][-1] <= stage["totals"][0] + 1e-9
    assert result.diagnostic is None


def test_nonfinite_energy_aborts_with_diagnostic(template, slab_field):
    rng = np.random.default_rng(4)
    seq = MotionSequence(frames=walking_frames(rng))
    sched = RefinementSchedule([RefineStage(EnergyWeights(0, 1.0, 0, 0), iters=50, lr=1e200)])
    result = refine(template, seq, slab_field, sched)
    assert result.diagnostic is not None
    assert np.all(np.isfinite(result.sequence.frames))


def test_refine_is_deterministic(template, slab_field):
    rng = np.random.default_rng(5)
    seq = MotionSequence(frames=walking_frames(rng))
    sched = RefinementSchedule.two_stage(iters=10, lr=1e-2)
    a = refine(template, seq, slab_field, sched).sequence.frames
    b = refine(template, seq, slab_field, sched).sequence.frames
    assert np.array_equal(a, b)
