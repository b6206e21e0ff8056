import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenemotion import body
from scenemotion.energy import (CONTACT_SIGMA, EnergyReport, EnergyWeights, e_col, e_cont,
                                e_foot, e_smooth, geman_mcclure, segment_from_centroids,
                                segment_stable_foot, total_energy)
from scenemotion.scene import VertexIndex
from scenemotion.sequence import MotionSequence


def standing_frames(template, positions, pelvis_z=0.93):
    frames = np.zeros((len(positions), body.PARAM_DIM))
    for i, (x, y) in enumerate(positions):
        frames[i] = body.BodyParams(t=np.array([x, y, pelvis_z]),
                                    r=np.array([1.0, 0, 0, 0, 1, 0]),
                                    beta=np.zeros(10), p=np.zeros(32),
                                    h=np.zeros(24)).flat()
    return frames


# -- robustifier ---------------------------------------------------------------

def test_geman_mcclure_identities():
    s = CONTACT_SIGMA
    assert geman_mcclure(0.0) == 0.0
    assert geman_mcclure(1e9) == pytest.approx(s * s, rel=1e-6)
    assert geman_mcclure(s) == pytest.approx(s * s / 2.0, abs=1e-15)  # 0.02 at sigma=0.2


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 100), st.floats(0, 100))
def test_geman_mcclure_monotone_and_bounded(a, b):
    s2 = CONTACT_SIGMA ** 2
    lo, hi = sorted((a, b))
    assert geman_mcclure(lo) <= geman_mcclure(hi) + 1e-15
    assert 0.0 <= geman_mcclure(hi) <= s2


# -- stable-foot segmentation ----------------------------------------------------

def test_static_left_moving_right_single_segment():
    T = 20
    left = np.tile([0.1, 0.0, 0.0], (T, 1))
    right = np.cumsum(np.tile([0.05, 0.0, 0.0], (T, 1)), axis=0)
    seg = segment_from_centroids(left, right)
    assert len(seg.segments) == 1
    assert seg.segments[0].side == "left"
    np.testing.assert_allclose(seg.segments[0].mean, [0.1, 0.0, 0.0])


def test_alternating_gait_two_segments():
    # left static 10 frames then right static 10 frames
    left = np.zeros((20, 3))
    right = np.zeros((20, 3))
    left[10:, 0] = np.cumsum(np.full(10, 0.05))
    right[:10, 0] = np.cumsum(np.full(10, 0.05))
    right[10:, 0] = right[9, 0]
    seg = segment_from_centroids(left, right)
    sides = [s.side for s in seg.segments]
    assert sides == ["left", "right"]


def test_segments_partition_timeline():
    rng = np.random.default_rng(0)
    left = rng.standard_normal((40, 3)) * 0.05
    right = rng.standard_normal((40, 3)) * 0.05
    seg = segment_from_centroids(left, right)
    assert seg.segments[0].start == 0
    assert seg.segments[-1].end == 40
    for a, b in zip(seg.segments, seg.segments[1:]):
        assert a.end == b.start
        assert a.side != b.side  # alternating or separated by no-stance


def test_short_runs_absorbed_by_hysteresis():
    left = np.zeros((20, 3))
    right = np.ones((20, 3))
    right[:, 0] = np.linspace(0, 1, 20)  # right always moving
    # inject a 1-frame flip by moving left hugely at frame 10
    left[10] = [5.0, 0, 0]
    seg = segment_from_centroids(left, right)
    assert all(s.end - s.start >= 3 or s is seg.segments[-1] for s in seg.segments)


def test_segmentation_needs_two_frames(template):
    with pytest.raises(ValueError):
        segment_stable_foot(template, np.zeros((1, 75)))


def test_procedural_gait_oracle(template):
    from scenemotion.datagen import SyntheticMotionSpec, SyntheticSceneSpec, gen_motion
    spec = SyntheticSceneSpec(floor_extent=8.0)
    mspec = SyntheticMotionSpec(waypoints=[(-1.5, 0.0), (1.5, 0.4)], step_length=0.55,
                                cadence=1.8)
    seq, stance = gen_motion(spec, mspec, template)
    seg = segment_stable_foot(template, seq.frames)
    labels = seg.labels(len(seq))
    agreement = np.mean([a == b for a, b in zip(labels, stance)])
    assert agreement >= 0.9


# -- energy terms -----------------------------------------------------------------

def test_e_foot_pivoting_foot_is_zero(template):
    frames = standing_frames(template, [(0.0, 0.0)] * 5)
    seg = segment_stable_foot(template, frames)
    assert e_foot(template, frames, seg) == 0.0


def test_e_foot_two_frame_hand_case():
    # 2-frame left segment with the sole at x=0 then x=0.1: the stored mean is
    # 0.05, so the energy is |0-0.05| + |0.1-0.05| = 0.1
    from scenemotion.energy import FootSegment, FootSegmentation, _foot_term

    class _T:
        def sole_vertex_ids(self, side):
            return np.array([0])

    seg = FootSegmentation(segments=[FootSegment(0, 2, "left", np.array([0.05, 0.0, 0.0]))])
    verts = np.zeros((2, 1, 3))
    verts[1, 0, 0] = 0.1
    total, _ = _foot_term(_T(), np.zeros((2, 75)), seg, want_grad=False, vertices=verts)
    assert total == pytest.approx(0.1, abs=1e-9)


def test_e_col_zero_above_floor(template, slab_field):
    frames = standing_frames(template, [(0.0, 0.0)], pelvis_z=1.5)
    verts = MotionSequence(frames=frames).meshes(template)
    assert e_col(verts, slab_field.grid) == 0.0


def test_e_col_hand_case_single_penetrating_vertex(slab_field):
    # one vertex 0.1 m below the slab top among V vertices, one frame
    V = 500
    verts = np.zeros((1, V, 3))
    verts[0, :, 2] = 1.0
    verts[0, 0, 2] = -0.1
    assert e_col(verts, slab_field.grid) == pytest.approx(0.1 / V, abs=1e-9)


def test_e_col_matches_naive_oracle(template, slab_field):
    from scenemotion.sdf import sample_sdf
    rng = np.random.default_rng(1)
    frames = standing_frames(template, [(0.3, 0.2), (-0.4, 0.6)], pelvis_z=0.85)
    verts = MotionSequence(frames=frames).meshes(template)
    expected = 0.0
    for f in range(len(verts)):
        acc = 0.0
        for v in verts[f]:
            val, _ = sample_sdf(slab_field.grid, v)
            acc += abs(min(val, 0.0))
        expected += acc / verts.shape[1]
    assert e_col(verts, slab_field.grid) == pytest.approx(expected, abs=1e-9)


def test_e_cont_identities():
    index = VertexIndex([[0.0, 0.0, 0.0]])
    contact = np.array([0])
    verts = np.zeros((1, 1, 3))
    assert e_cont(verts, contact, index) == 0.0  # coincident -> rho(0)=0
    verts_far = np.full((1, 1, 3), 1e6)
    assert e_cont(verts_far, contact, index) == pytest.approx(CONTACT_SIGMA ** 2, rel=1e-6)
    verts_sigma = np.zeros((1, 1, 3))
    verts_sigma[0, 0, 0] = CONTACT_SIGMA
    assert e_cont(verts_sigma, contact, index) == pytest.approx(CONTACT_SIGMA ** 2 / 2, abs=1e-12)


def test_e_smooth_static_zero(template):
    frames = standing_frames(template, [(0.5, 0.5)] * 4)
    verts = MotionSequence(frames=frames).meshes(template)
    assert e_smooth(verts) == 0.0


def test_e_smooth_rigid_translation_hand_case():
    V = 500
    verts = np.zeros((2, V, 3))
    verts[1, :, 0] = 0.01
    assert e_smooth(verts) == pytest.approx(0.01 * np.sqrt(V), abs=1e-9)


def test_e_smooth_matches_naive_oracle():
    rng = np.random.default_rng(2)
    verts = rng.standard_normal((5, 30, 3))
    expected = sum(
        np.sqrt(((verts[i] - verts[i + 1]) ** 2).sum()) for i in range(4))
    assert e_smooth(verts) == pytest.approx(expected, abs=1e-9)


def test_e_smooth_needs_two_frames():
    with pytest.raises(ValueError):
        e_smooth(np.zeros((1, 10, 3)))


# -- weighted total ----------------------------------------------------------------

def test_total_energy_zero_weights(template, slab_field):
    frames = standing_frames(template, [(0.0, 0.0), (0.1, 0.0)])
    seq = MotionSequence(frames=frames)
    report = total_energy(template, seq, slab_field, EnergyWeights(0, 0, 0, 0))
    assert report.total == 0.0


def test_total_energy_is_weighted_dot_product(template, slab_field):
    frames = standing_frames(template, [(0.0, 0.0), (0.15, 0.05), (0.32, 0.1)])
    seq = MotionSequence(frames=frames)
    w = EnergyWeights(0.0, 1.0, 1.0, 0.25)  # first refinement stage
    report = total_energy(template, seq, slab_field, w)
    manual = (w.foot * report.foot + w.col * report.col + w.cont * report.cont
              + w.smooth * report.smooth)
    assert report.total == pytest.approx(manual, abs=1e-9)
    assert min(report.foot, report.col, report.cont, report.smooth) >= 0.0


def test_energy_weights_validation():
    with pytest.raises(ValueError):
        EnergyWeights(-1.0, 0, 0, 0)
    with pytest.raises(ValueError):
        EnergyWeights(np.inf, 0, 0, 0)


def test_energy_report_totals():
    rep = EnergyReport(foot=1.0, col=2.0, cont=3.0, smooth=4.0,
                       weights=EnergyWeights(1.0, 1.0, 1.0, 0.25))
    assert rep.total == pytest.approx(1 + 2 + 3 + 1.0, abs=1e-12)
