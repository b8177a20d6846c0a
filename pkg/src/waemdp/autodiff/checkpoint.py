"""Flat JSON parameter checkpoints: name -> {"shape": [...], "data": [...]}."""
from __future__ import annotations

import json

import numpy as np


def encode_params(state):
    return {
        name: {"shape": list(np.shape(value)), "data": np.asarray(value, dtype=np.float64).ravel().tolist()}
        for name, value in state.items()
    }


def decode_params(blob):
    return {
        name: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in blob.items()
    }


def save_params(path, state):
    with open(path, "w") as fh:
        json.dump(encode_params(state), fh)


def load_params(path):
    with open(path) as fh:
        return decode_params(json.load(fh))
