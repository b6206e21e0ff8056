import hashlib
import os

import numpy as np
import pytest

from scenemotion import body
from scenemotion.datagen import (SyntheticMotionSpec, SyntheticSceneSpec, box_mesh_arrays,
                                 build_dataset, dataset_bodies, gen_motion, gen_scene,
                                 load_dataset, random_scene_spec)
from scenemotion.energy import e_smooth


def test_floor_only_scene_is_two_triangles():
    mesh = gen_scene(SyntheticSceneSpec(floor_extent=4.0, boxes=[]))
    assert len(mesh.vertices) == 4
    assert len(mesh.faces) == 2


def test_one_box_scene_is_fourteen_triangles():
    spec = SyntheticSceneSpec(floor_extent=4.0,
                              boxes=[(np.array([0.5, 0.5, 0.5]), np.array([1.0, 1.0, 1.0]))])
    mesh = gen_scene(spec)
    assert len(mesh.faces) == 14


def test_box_faces_wind_outward():
    verts, faces = box_mesh_arrays([0, 0, 0], [2.0, 2.0, 2.0])
    tri = verts[faces]
    normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    centers = tri.mean(axis=1)
    assert (np.einsum("ij,ij->i", normals, centers) > 0).all()


def test_scene_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSceneSpec(floor_extent=-1.0)
    with pytest.raises(ValueError):
        SyntheticSceneSpec(boxes=[(np.array([0, 0, 0.1]), np.array([1, 1, 1.0]))])


def test_same_seed_same_scene():
    a = gen_scene(random_scene_spec(42))
    b = gen_scene(random_scene_spec(42))
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.faces, b.faces)


def test_zero_length_path_is_static(template):
    spec = SyntheticSceneSpec(floor_extent=6.0)
    mspec = SyntheticMotionSpec(waypoints=[(0.0, 0.0)], duration=1.0)
    seq, stance = gen_motion(spec, mspec, template)
    assert len(seq) == 31
    assert np.ptp(seq.frames, axis=0).max() == 0.0
    assert e_smooth(seq.meshes(template)) == 0.0
    assert set(stance) == {"none"}


def test_straight_walk_two_meters_at_one_mps(template):
    spec = SyntheticSceneSpec(floor_extent=6.0)
    mspec = SyntheticMotionSpec(waypoints=[(0.0, -1.0), (0.0, 1.0)],
                                step_length=0.5, cadence=2.0)
    seq, stance = gen_motion(spec, mspec, template)
    assert len(seq) == 61
    y = seq.frames[:, 1]
    assert np.all(np.diff(y) >= -1e-12)
    assert set(stance) <= {"left", "right"}


def test_path_outside_floor_rejected(template):
    spec = SyntheticSceneSpec(floor_extent=2.0)
    mspec = SyntheticMotionSpec(waypoints=[(0.0, 0.0), (5.0, 0.0)])
    with pytest.raises(ValueError):
        gen_motion(spec, mspec, template)


def test_motion_spec_validation():
    with pytest.raises(ValueError):
        SyntheticMotionSpec(waypoints=[(0, 0)], cadence=0.0)
    with pytest.raises(ValueError):
        SyntheticMotionSpec(waypoints=[(0, 0)], step_length=-0.1)


def test_sit_motion_lowers_pelvis(template):
    spec = SyntheticSceneSpec(floor_extent=6.0,
                              boxes=[(np.array([0.0, 1.5, 0.25]), np.array([0.8, 0.8, 0.5]))])
    mspec = SyntheticMotionSpec(waypoints=[(0.0, -1.0), (0.0, 1.0)],
                                sit_box=(np.array([0.0, 1.5, 0.25]), np.array([0.8, 0.8, 0.5])),
                                sit_duration=0.5)
    seq, stance = gen_motion(spec, mspec, template)
    assert seq.frames[-1, 2] < seq.frames[0, 2] - 0.2  # pelvis dropped
    assert stance[-1] == "none"


def _dir_digest(root):
    hasher = hashlib.sha256()
    for dirpath, dirnames, filenames in sorted(os.walk(root)):
        dirnames.sort()
        for name in sorted(filenames):
            path = os.path.join(dirpath, name)
            hasher.update(os.path.relpath(path, root).encode())
            with open(path, "rb") as f:
                hasher.update(f.read())
    return hasher.hexdigest()


def test_build_dataset_deterministic_bytes(tmp_path, template):
    a = tmp_path / "a"
    b = tmp_path / "b"
    build_dataset(str(a), template, n_scenes=2, clips_per_scene=6, k=15, master_seed=9)
    build_dataset(str(b), template, n_scenes=2, clips_per_scene=6, k=15, master_seed=9)
    assert _dir_digest(a) == _dir_digest(b)
    c = tmp_path / "c"
    build_dataset(str(c), template, n_scenes=2, clips_per_scene=6, k=15, master_seed=10)
    assert _dir_digest(a) != _dir_digest(c)


def test_manifest_counts_and_filter(tmp_path, template):
    out = tmp_path / "ds"
    manifest = build_dataset(str(out), template, n_scenes=2, clips_per_scene=5, k=15,
                             master_seed=1)
    assert len(manifest["scenes"]) == 2
    assert len(manifest["clips"]) == sum(1 for c in manifest["clips"])
    ds = load_dataset(str(out))
    for clip in ds["clips"]:
        assert clip["displacement"] > manifest["min_displacement"]
        assert clip["stance"] is not None
        assert len(clip["stance"]) == 16


def test_dataset_bodies_stride(dataset):
    vecs, scene_ids = dataset_bodies(dataset, stride=10)
    per_clip = int(np.ceil((dataset["k"] + 1) / 10))
    assert len(vecs) == per_clip * len(dataset["clips"])
    assert len(scene_ids) == len(vecs)
    assert vecs.shape[1] == body.PARAM_DIM
