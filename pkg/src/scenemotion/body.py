"""Simplified differentiable parametric body: params -> joints -> skinned mesh.

The template is a procedurally built capsule humanoid (no licensed assets)
with the same parameter interface as a full statistical body model:
translation t (3), 6D global rotation r (6), shape beta (10), body-pose
latent p (32) and hand-pose latent h (24). Pose latents map to per-joint
axis-angle rotations through fixed orthogonalized linear maps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rotation

NUM_BODY_JOINTS = 22
NUM_HAND_JOINTS = 2
NUM_JOINTS = NUM_BODY_JOINTS + NUM_HAND_JOINTS
POSE_DIM = 32
HAND_DIM = 24
SHAPE_DIM = 10
PARAM_DIM = 3 + 6 + SHAPE_DIM + POSE_DIM + HAND_DIM  # 75

TEMPLATE_VERSION = 1
DEFAULT_TEMPLATE_SEED = 20240117

JOINT_NAMES = [
    "pelvis", "l_hip", "r_hip", "spine1", "l_knee", "r_knee", "spine2",
    "l_ankle", "r_ankle", "spine3", "l_toe", "r_toe", "neck", "l_collar",
    "r_collar", "head", "l_shoulder", "r_shoulder", "l_elbow", "r_elbow",
    "l_wrist", "r_wrist", "l_hand", "r_hand",
]
PARENTS = [-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21]

# latent directions with a fixed meaning; remaining columns are a random
# orthogonal complement. (joint name, axis index) per latent dim.
_DESIGNED_POSE_AXES = [
    ("l_hip", 0), ("r_hip", 0), ("l_knee", 0), ("r_knee", 0),
    ("l_shoulder", 0), ("r_shoulder", 0), ("l_elbow", 1), ("r_elbow", 1),
    ("spine1", 0), ("l_hip", 1), ("r_hip", 1), ("l_ankle", 0), ("r_ankle", 0),
]
POSE_GAIN = 0.5  # unit-norm latent moves any joint by at most 0.5 rad


@dataclass(frozen=True)
class BodyParams:
    """One frame of body state: (t, r, beta, p, h)."""

    t: np.ndarray
    r: np.ndarray
    beta: np.ndarray
    p: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        for name, width in (("t", 3), ("r", 6), ("beta", SHAPE_DIM), ("p", POSE_DIM), ("h", HAND_DIM)):
            arr = np.asarray(getattr(self, name), dtype=np.float64).reshape(width)
            object.__setattr__(self, name, arr)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"BodyParams.{name} contains non-finite values")
        rotation.rot6d_to_matrix(self.r)  # rejects degenerate global orientation

    def flat(self):
        """Serialize to the documented 75-float order t, r, beta, p, h."""
        return np.concatenate([self.t, self.r, self.beta, self.p, self.h])

    @staticmethod
    def from_flat(vec):
        vec = np.asarray(vec, dtype=np.float64).reshape(PARAM_DIM)
        return BodyParams(t=vec[:3], r=vec[3:9], beta=vec[9:19], p=vec[19:51], h=vec[51:75])

    @staticmethod
    def rest(beta=None):
        return BodyParams(
            t=np.zeros(3),
            r=rotation.IDENTITY_6D.copy(),
            beta=np.zeros(SHAPE_DIM) if beta is None else beta,
            p=np.zeros(POSE_DIM),
            h=np.zeros(HAND_DIM),
        )


@dataclass
class BodyMesh:
    """Posed vertices and joints; faces are shared with the template."""

    vertices: np.ndarray  # (V, 3) meters
    joints: np.ndarray    # (J, 3) meters
    faces: np.ndarray     # (F, 3) int


@dataclass
class BodyTemplate:
    rest_vertices: np.ndarray      # (V, 3)
    faces: np.ndarray              # (F, 3)
    joints: np.ndarray             # (J, 3) rest joint locations, pelvis at origin
    parents: np.ndarray            # (J,) parent indices, -1 for the root
    skin_weights: np.ndarray       # (V, J) rows sum to 1, <= 4 non-zeros each
    shape_basis: np.ndarray        # (V, 3, 10)
    pose_map: np.ndarray           # (63, 32): p -> axis-angle of joints 1..21
    hand_map: np.ndarray           # (6, 24): h -> axis-angle of the 2 hand joints
    vertex_groups: dict = field(default_factory=dict)
    seed: int = DEFAULT_TEMPLATE_SEED

    @property
    def num_vertices(self):
        return self.rest_vertices.shape[0]

    def validate(self):
        V, J = self.num_vertices, self.joints.shape[0]
        if V < 300:
            raise ValueError(f"template too coarse: {V} vertices")
        w = self.skin_weights
        if np.any(w < -1e-12):
            raise ValueError("negative skinning weights")
        if np.abs(w.sum(axis=1) - 1.0).max() > 1e-6:
            raise ValueError("skinning weight rows must sum to 1")
        if (np.count_nonzero(w, axis=1) > 4).any():
            raise ValueError("more than 4 skinning influences on a vertex")
        if self.parents[0] != -1 or np.any(self.parents[1:] >= np.arange(1, J)):
            raise ValueError("skeleton parents must form a tree rooted at the pelvis")
        seen = np.zeros(V, dtype=bool)
        for name, idx in self.vertex_groups.items():
            idx = np.asarray(idx)
            if idx.size == 0:
                raise ValueError(f"vertex group {name!r} is empty")
            if idx.min() < 0 or idx.max() >= V:
                raise ValueError(f"vertex group {name!r} indexes out of range")
            if seen[idx].any():
                raise ValueError(f"vertex group {name!r} overlaps another group")
            seen[idx] = True
        if self.faces.min() < 0 or self.faces.max() >= V:
            raise ValueError("face indices out of range")
        return self

    def contact_vertex_ids(self, groups=("left_sole", "right_sole", "buttocks", "thigh_back", "palm")):
        """Vertex ids encouraged to contact the scene."""
        return np.concatenate([self.vertex_groups[g] for g in groups])

    def sole_vertex_ids(self, side):
        return self.vertex_groups["left_sole" if side == "left" else "right_sole"]

    # -- persistence ---------------------------------------------------------

    def save(self, path):
        payload = {
            "format": "scenemotion-body-template",
            "version": TEMPLATE_VERSION,
            "seed": self.seed,
            "counts": {"vertices": int(self.num_vertices), "faces": int(len(self.faces)),
                       "joints": int(len(self.joints))},
            "arrays": {
                "rest_vertices": _pack(self.rest_vertices),
                "faces": _pack(self.faces),
                "joints": _pack(self.joints),
                "parents": _pack(self.parents),
                "skin_weights": _pack(self.skin_weights),
                "shape_basis": _pack(self.shape_basis),
                "pose_map": _pack(self.pose_map),
                "hand_map": _pack(self.hand_map),
            },
            "vertex_groups": {k: np.asarray(v).tolist() for k, v in self.vertex_groups.items()},
        }
        with open(path, "w") as f:
            json.dump(payload, f)

    @staticmethod
    def load(path):
        with open(path) as f:
            payload = json.load(f)
        if payload.get("format") != "scenemotion-body-template":
            raise ValueError(f"{path}: not a body template file")
        if payload.get("version") != TEMPLATE_VERSION:
            raise ValueError(f"{path}: unsupported template version {payload.get('version')}")
        arrays = {k: _unpack(v) for k, v in payload["arrays"].items()}
        tpl = BodyTemplate(
            rest_vertices=arrays["rest_vertices"],
            faces=arrays["faces"].astype(np.int64),
            joints=arrays["joints"],
            parents=arrays["parents"].astype(np.int64),
            skin_weights=arrays["skin_weights"],
            shape_basis=arrays["shape_basis"],
            pose_map=arrays["pose_map"],
            hand_map=arrays["hand_map"],
            vertex_groups={k: np.asarray(v, dtype=np.int64) for k, v in payload["vertex_groups"].items()},
            seed=payload["seed"],
        )
        return tpl.validate()


def _pack(arr):
    arr = np.asarray(arr)
    return {"shape": list(arr.shape), "dtype": str(arr.dtype), "data": arr.ravel(order="C").tolist()}


def _unpack(rec):
    return np.asarray(rec["data"], dtype=rec["dtype"]).reshape(rec["shape"])


# -- procedural template construction ----------------------------------------

_REST_JOINTS = {
    "pelvis": (0.00, 0.00, 0.00),
    "l_hip": (0.09, 0.00, -0.06),
    "r_hip": (-0.09, 0.00, -0.06),
    "spine1": (0.00, 0.00, 0.10),
    "l_knee": (0.09, 0.00, -0.48),
    "r_knee": (-0.09, 0.00, -0.48),
    "spine2": (0.00, 0.00, 0.22),
    "l_ankle": (0.09, 0.00, -0.88),
    "r_ankle": (-0.09, 0.00, -0.88),
    "spine3": (0.00, 0.00, 0.34),
    "l_toe": (0.09, 0.14, -0.93),
    "r_toe": (-0.09, 0.14, -0.93),
    "neck": (0.00, 0.00, 0.50),
    "l_collar": (0.05, 0.00, 0.46),
    "r_collar": (-0.05, 0.00, 0.46),
    "head": (0.00, 0.00, 0.63),
    "l_shoulder": (0.17, 0.00, 0.46),
    "r_shoulder": (-0.17, 0.00, 0.46),
    "l_elbow": (0.43, 0.00, 0.46),
    "r_elbow": (-0.43, 0.00, 0.46),
    "l_wrist": (0.67, 0.00, 0.46),
    "r_wrist": (-0.67, 0.00, 0.46),
    "l_hand": (0.76, 0.00, 0.46),
    "r_hand": (-0.76, 0.00, 0.46),
}

# (proximal joint, distal joint, radius, rings, ring segments)
_BONE_TUBES = [
    ("pelvis", "spine1", 0.13, 2, 8),
    ("spine1", "spine2", 0.13, 2, 8),
    ("spine2", "spine3", 0.13, 2, 8),
    ("spine3", "neck", 0.11, 2, 8),
    ("neck", "head", 0.05, 2, 6),
    ("l_hip", "l_knee", 0.07, 3, 8),
    ("r_hip", "r_knee", 0.07, 3, 8),
    ("l_knee", "l_ankle", 0.05, 3, 8),
    ("r_knee", "r_ankle", 0.05, 3, 8),
    ("l_ankle", "l_toe", 0.035, 2, 8),
    ("r_ankle", "r_toe", 0.035, 2, 8),
    ("l_collar", "l_shoulder", 0.05, 2, 6),
    ("r_collar", "r_shoulder", 0.05, 2, 6),
    ("l_shoulder", "l_elbow", 0.045, 2, 6),
    ("r_shoulder", "r_elbow", 0.045, 2, 6),
    ("l_elbow", "l_wrist", 0.035, 2, 6),
    ("r_elbow", "r_wrist", 0.035, 2, 6),
    ("l_wrist", "l_hand", 0.03, 2, 6),
    ("r_wrist", "r_hand", 0.03, 2, 6),
]

_HEAD_RADIUS = 0.095


def build_template(seed=DEFAULT_TEMPLATE_SEED):
    """Construct the default capsule humanoid deterministically from ``seed``.

    The seed drives only the random parts of the pose/hand latent maps and the
    high-order shape basis; the geometry itself is fixed by the skeleton table.
    """
    jindex = {n: i for i, n in enumerate(JOINT_NAMES)}
    joints = np.array([_REST_JOINTS[n] for n in JOINT_NAMES])
    parents = np.array(PARENTS, dtype=np.int64)

    verts, faces, owners = [], [], []  # owners: (proximal id, distal id, blend)
    groups = {k: [] for k in ("left_sole", "right_sole", "buttocks", "thigh_back", "palm")}

    def add_ring(center, u, v, radius, nseg, prox, dist, blend, squash=1.0):
        base = len(verts)
        for s in range(nseg):
            ang = 2.0 * np.pi * s / nseg
            verts.append(center + radius * (np.cos(ang) * u + squash * np.sin(ang) * v))
            owners.append((prox, dist, blend))
        return base

    def bridge(ring_a, ring_b, nseg):
        for s in range(nseg):
            a0, a1 = ring_a + s, ring_a + (s + 1) % nseg
            b0, b1 = ring_b + s, ring_b + (s + 1) % nseg
            faces.append((a0, b0, b1))
            faces.append((a0, b1, a1))

    def cap(ring, nseg, apex_point, prox, dist, blend, flip=False):
        apex = len(verts)
        verts.append(np.asarray(apex_point, dtype=np.float64))
        owners.append((prox, dist, blend))
        for s in range(nseg):
            a0, a1 = ring + s, ring + (s + 1) % nseg
            faces.append((a1, a0, apex) if not flip else (a0, a1, apex))
        return apex

    for prox_name, dist_name, radius, nrings, nseg in _BONE_TUBES:
        pj, dj = jindex[prox_name], jindex[dist_name]
        a, b = joints[pj], joints[dj]
        axis = b - a
        length = np.linalg.norm(axis)
        axis = axis / length
        # build an orthonormal frame around the bone
        ref = np.array([0.0, 1.0, 0.0]) if abs(axis[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
        u = np.cross(axis, ref)
        u /= np.linalg.norm(u)
        v = np.cross(axis, u)
        squash = 0.65 if "ankle" in prox_name else 1.0  # feet are flat-ish
        rings = []
        for ri in range(nrings + 1):
            s = ri / nrings
            c = a + s * length * axis
            blend = np.clip((s - 0.55) / 0.45, 0.0, 1.0) ** 2
            rings.append(add_ring(c, u, v, radius, nseg, pj, dj, blend, squash))
        first = len(verts) - (nrings + 1) * nseg
        for ri in range(nrings):
            bridge(rings[ri], rings[ri + 1], nseg)
        cap(rings[0], nseg, a - axis * radius * 0.6, pj, dj, 0.0, flip=True)
        cap(rings[-1], nseg, b + axis * radius * 0.6, pj, dj, 1.0)

        vs = np.arange(first, len(verts))
        coords = np.array([verts[i] for i in vs])
        if prox_name == "l_ankle":
            groups["left_sole"].extend(vs[coords[:, 2] < joints[jindex["l_toe"]][2] + 0.01])
        elif prox_name == "r_ankle":
            groups["right_sole"].extend(vs[coords[:, 2] < joints[jindex["r_toe"]][2] + 0.01])
        elif prox_name == "pelvis":
            low_back = (coords[:, 1] < -0.08) & (coords[:, 2] < 0.05)
            groups["buttocks"].extend(vs[low_back])
        elif prox_name in ("l_hip", "r_hip"):
            groups["thigh_back"].extend(vs[(coords[:, 1] < -0.05) & (coords[:, 2] > -0.40)])
        elif prox_name in ("l_wrist", "r_wrist"):
            groups["palm"].extend(vs)

    # head blob
    head_center = joints[jindex["head"]] + np.array([0.0, 0.0, 0.05])
    hj = jindex["head"]
    nseg, nlat = 8, 4
    prev_ring = None
    top = bottom = None
    for li in range(nlat + 1):
        phi = np.pi * li / nlat
        z = head_center[2] + _HEAD_RADIUS * np.cos(phi)
        rad = _HEAD_RADIUS * np.sin(phi)
        if li == 0:
            bottom = len(verts)
            verts.append(np.array([head_center[0], head_center[1], z]))
            owners.append((hj, hj, 0.0))
            continue
        if li == nlat:
            top = len(verts)
            verts.append(np.array([head_center[0], head_center[1], z]))
            owners.append((hj, hj, 0.0))
            for s in range(nseg):
                faces.append((prev_ring + s, prev_ring + (s + 1) % nseg, top))
            continue
        ring = add_ring(np.array([head_center[0], head_center[1], z]),
                        np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]),
                        rad, nseg, hj, hj, 0.0)
        if li == 1:
            for s in range(nseg):
                faces.append((ring + (s + 1) % nseg, ring + s, bottom))
        else:
            bridge(prev_ring, ring, nseg)
        prev_ring = ring

    verts = np.asarray(verts)
    faces = np.asarray(faces, dtype=np.int64)
    V = len(verts)

    weights = np.zeros((V, NUM_JOINTS))
    for i, (pj, dj, blend) in enumerate(owners):
        weights[i, pj] += 1.0 - blend
        weights[i, dj] += blend

    rng = np.random.default_rng(seed)
    shape_basis = _build_shape_basis(verts, rng)
    pose_map = _build_pose_map(rng, jindex)
    hand_map = POSE_GAIN * _orthonormal_rows(rng, 2 * 3, HAND_DIM)

    tpl = BodyTemplate(
        rest_vertices=verts,
        faces=faces,
        joints=joints,
        parents=parents,
        skin_weights=weights,
        shape_basis=shape_basis,
        pose_map=pose_map,
        hand_map=hand_map,
        vertex_groups={k: np.asarray(sorted(v), dtype=np.int64) for k, v in groups.items()},
        seed=seed,
    )
    return tpl.validate()


def _build_shape_basis(verts, rng):
    V = len(verts)
    basis = np.zeros((V, 3, SHAPE_DIM))
    radial = verts.copy()
    radial[:, 2] = 0.0
    torso = 1.0 / (1.0 + np.exp(-12.0 * (verts[:, 2] + 0.05)))
    legs = 1.0 - torso
    basis[:, 2, 0] = 0.08 * verts[:, 2]                  # stature
    basis[:, :2, 1] = 0.10 * radial[:, :2]               # overall girth
    basis[:, :2, 2] = 0.12 * radial[:, :2] * torso[:, None]   # torso girth
    basis[:, 2, 3] = -0.06 * legs                        # leg length
    basis[:, :2, 4] = 0.10 * radial[:, :2] * legs[:, None]    # leg girth
    for k in range(5, SHAPE_DIM):
        freq = rng.uniform(1.0, 3.0, size=3)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=3)
        amp = rng.uniform(0.005, 0.02, size=3)
        for ax in range(3):
            basis[:, ax, k] = amp[ax] * np.sin(freq[ax] * verts[:, (ax + 1) % 3] * 2.0 * np.pi + phase[ax])
    return basis


def _build_pose_map(rng, jindex):
    dim = (NUM_BODY_JOINTS - 1) * 3  # pelvis rotation is owned by r
    cols = []
    for joint_name, axis in _DESIGNED_POSE_AXES:
        col = np.zeros(dim)
        col[(jindex[joint_name] - 1) * 3 + axis] = 1.0
        cols.append(col)
    Q = np.stack(cols, axis=1)
    Q = _extend_orthonormal(Q, POSE_DIM, rng)
    return POSE_GAIN * Q


def _extend_orthonormal(Q, target_cols, rng):
    dim = Q.shape[0]
    cols = [Q[:, i] for i in range(Q.shape[1])]
    while len(cols) < target_cols:
        v = rng.standard_normal(dim)
        for c in cols:
            v -= (c @ v) * c
        n = np.linalg.norm(v)
        if n > 1e-6:
            cols.append(v / n)
    return np.stack(cols, axis=1)


def _orthonormal_rows(rng, rows, cols):
    m = rng.standard_normal((cols, rows))
    q, _ = np.linalg.qr(m)
    return q[:, :rows].T


def pose_latent_for(template, coeffs):
    """Latent p that realizes exact designed-axis angles.

    ``coeffs`` maps a designed latent index (order of the documented axis
    table) to an angle in radians. Exactness holds because the designed
    columns are orthonormal before the gain is applied.
    """
    p = np.zeros(POSE_DIM)
    for idx, angle in coeffs.items():
        p[idx] = angle / POSE_GAIN
    return p


DESIGNED_AXIS_INDEX = {name_axis: i for i, name_axis in enumerate(_DESIGNED_POSE_AXES)}


# -- forward kinematics / skinning -------------------------------------------

def joint_rotations(template, p, h):
    """Per-joint local axis-angle vectors, (J, 3); pelvis row stays zero."""
    w = np.zeros((NUM_JOINTS, 3))
    w[1:NUM_BODY_JOINTS] = (template.pose_map @ p).reshape(-1, 3)
    w[NUM_BODY_JOINTS:] = (template.hand_map @ h).reshape(-1, 3)
    return w


def forward(template, params):
    """Pose the template: shape offsets, FK, linear-blend skinning, global r|t."""
    mesh, _ = forward_with_cache(template, params)
    return mesh


def forward_with_cache(template, params):
    tpl = template
    w_local = joint_rotations(tpl, params.p, params.h)
    R_glob, glob_cache = rotation.rot6d_to_matrix_with_cache(params.r)

    v_rest = tpl.rest_vertices + tpl.shape_basis @ params.beta
    J = NUM_JOINTS
    R_loc = np.empty((J, 3, 3))
    loc_caches = [None] * J
    R_loc[0] = np.eye(3)
    for j in range(1, J):
        R_loc[j], loc_caches[j] = rotation.axis_angle_to_matrix_with_cache(w_local[j])

    # FK in displacement form: dw[j] = posed joint - rest joint. Both dw and
    # the skinning correction vanish identically at rest, so the rest template
    # is reproduced bit-for-bit (no a + (b - a) rounding).
    Rw = np.empty((J, 3, 3))
    dw = np.zeros((J, 3))
    Rw[0] = R_loc[0]
    eye = np.eye(3)
    for j in range(1, J):
        par = tpl.parents[j]
        Rw[j] = Rw[par] @ R_loc[j]
        dw[j] = dw[par] + (Rw[par] - eye) @ (tpl.joints[j] - tpl.joints[par])

    v_skin = v_rest.copy()
    for j in range(J):
        wj = tpl.skin_weights[:, j]
        nz = wj != 0.0
        if not nz.any():
            continue
        local = v_rest[nz] - tpl.joints[j]
        corr = local @ Rw[j].T + dw[j] - local
        v_skin[nz] += wj[nz, None] * corr

    tw = tpl.joints + dw
    vertices = v_skin @ R_glob.T + params.t
    joints = tw @ R_glob.T + params.t
    mesh = BodyMesh(vertices=vertices, joints=joints, faces=tpl.faces)
    cache = (tpl, params, v_rest, v_skin, w_local, R_loc, loc_caches, Rw, tw, R_glob, glob_cache)
    return mesh, cache


def pullback(cache, g_vertices, g_joints=None):
    """Reverse-mode map from mesh cotangents to parameter gradients.

    Args:
        cache: second return of :func:`forward_with_cache`.
        g_vertices: (V, 3) dL/dvertices.
        g_joints: optional (J, 3) dL/djoints.

    Returns:
        dict with keys t, r, beta, p, h holding the parameter gradients.
    """
    tpl, params, v_rest, v_skin, w_local, R_loc, loc_caches, Rw, tw, R_glob, glob_cache = cache
    gv = np.asarray(g_vertices, dtype=np.float64)
    J = NUM_JOINTS

    g_t = gv.sum(axis=0)
    g_Rg = gv.T @ v_skin
    g_vskin = gv @ R_glob
    g_tw = np.zeros((J, 3))
    if g_joints is not None:
        gj = np.asarray(g_joints, dtype=np.float64)
        g_t = g_t + gj.sum(axis=0)
        g_Rg = g_Rg + gj.T @ tw
        g_tw += gj @ R_glob

    g_vrest = g_vskin.copy()
    g_Rw = np.zeros((J, 3, 3))
    for j in range(J):
        wj = tpl.skin_weights[:, j]
        nz = wj != 0.0
        if not nz.any():
            continue
        gw = g_vskin[nz] * wj[nz, None]
        local = v_rest[nz] - tpl.joints[j]
        g_Rw[j] += gw.T @ local
        g_tw[j] += gw.sum(axis=0)
        g_vrest[nz] += gw @ Rw[j] - gw

    # reverse FK: children before parents
    g_Rloc = np.zeros((J, 3, 3))
    for j in range(J - 1, 0, -1):
        par = tpl.parents[j]
        g_Rloc[j] = Rw[par].T @ g_Rw[j]
        g_Rw[par] += g_Rw[j] @ R_loc[j].T
        g_tw[par] += g_tw[j]
        g_Rw[par] += np.outer(g_tw[j], tpl.joints[j] - tpl.joints[par])

    g_w = np.zeros((J, 3))
    for j in range(1, J):
        g_w[j] = rotation.axis_angle_pullback(loc_caches[j], g_Rloc[j])

    g_p = tpl.pose_map.T @ g_w[1:NUM_BODY_JOINTS].ravel()
    g_h = tpl.hand_map.T @ g_w[NUM_BODY_JOINTS:].ravel()
    g_beta = np.tensordot(tpl.shape_basis, g_vrest, axes=([0, 1], [0, 1]))
    g_r = rotation.rot6d_matrix_pullback(glob_cache, g_Rg)
    return {"t": g_t, "r": g_r, "beta": g_beta, "p": g_p, "h": g_h}


_template_cache = {}


def default_template(seed=DEFAULT_TEMPLATE_SEED):
    """Process-wide cached template; construction is deterministic per seed."""
    if seed not in _template_cache:
        _template_cache[seed] = build_template(seed)
    return _template_cache[seed]
