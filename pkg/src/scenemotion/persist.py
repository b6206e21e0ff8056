"""Model save/load on top of the nn weight container."""

from __future__ import annotations

import os

import numpy as np

from .cvae import GoalCVAE
from .errors import StateError
from .motion_nets import PoseNet, RouteNet
from .nn.params import load_weights, save_weights

_KINDS = {"cvae", "route", "pose"}


def save_model(path, model, kind, extra_meta=None):
    if kind not in _KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    meta = {"kind": kind, "point_hidden": list(model.point_enc.point_hidden)}
    if kind == "cvae":
        meta.update(hidden=model.hidden, cond_dim=model.cond_dim)
    else:
        meta.update(hidden=model.hidden, fc_width=model.fc_width)
    if extra_meta:
        meta.update(extra_meta)
    save_weights(path, model.named_arrays(), meta=meta)


def load_model(path, expect_kind=None):
    if not os.path.exists(path):
        raise StateError(f"missing weights: {path}")
    arrays, meta = load_weights(path)
    kind = meta.get("kind")
    if expect_kind and kind != expect_kind:
        raise StateError(f"{path}: holds {kind!r} weights, expected {expect_kind!r}")
    rng = np.random.default_rng(0)  # shapes are overwritten by the stored arrays
    point_hidden = tuple(meta["point_hidden"])
    if kind == "cvae":
        model = GoalCVAE(rng, hidden=meta["hidden"], cond_dim=meta["cond_dim"],
                         point_hidden=point_hidden)
    elif kind == "route":
        model = RouteNet(rng, hidden=meta["hidden"], fc_width=meta["fc_width"],
                         point_hidden=point_hidden)
    elif kind == "pose":
        model = PoseNet(rng, hidden=meta["hidden"], fc_width=meta["fc_width"],
                        point_hidden=point_hidden)
    else:
        raise StateError(f"{path}: unknown model kind {kind!r}")
    model.load_arrays(arrays)
    return model, meta
