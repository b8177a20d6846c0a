from __future__ import annotations

import json

from waemdp.env.mdp import TabularMdp, TransitionSample


def write_traces(path, samples):
    with open(path, "w") as fh:
        for smp in samples:
            fh.write(json.dumps(smp.to_dict()) + "\n")


def read_traces(path):
    with open(path) as fh:
        return [TransitionSample.from_dict(json.loads(line)) for line in fh if line.strip()]


def save_tabular(path, mdp: TabularMdp):
    mdp.save(path)


def load_tabular(path) -> TabularMdp:
    return TabularMdp.load(path)
