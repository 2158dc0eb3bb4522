"""JSON checkpoints: architecture, input sizes and row-major parameters."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .network import MultiBranchNet, StageArchitecture

FORMAT = "student-success-checkpoint/1"


def checkpoint_dict(net: MultiBranchNet, meta: dict | None = None) -> dict:
    return {
        "format": FORMAT,
        "meta": meta or {},
        "architecture": net.arch.to_dict(),
        "inputs": {"fixed": net.n_fixed, "semesters": net.n_semester, "years": net.n_year},
        "seed": net.seed,
        "layers": [l.spec() for l in net.layers],
        "params": {k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()}
                   for k, v in net.parameters().items()},
    }


def dumps_checkpoint(net: MultiBranchNet, meta: dict | None = None) -> str:
    return json.dumps(checkpoint_dict(net, meta), separators=(",", ":"), allow_nan=False)


def save_checkpoint(net: MultiBranchNet, path: str | Path, meta: dict | None = None) -> None:
    Path(path).write_text(dumps_checkpoint(net, meta) + "\n", encoding="utf-8")


def loads_checkpoint(text: str) -> tuple[MultiBranchNet, dict]:
    d = json.loads(text)
    if d.get("format") != FORMAT:
        raise ValueError(f"unsupported checkpoint format {d.get('format')!r}")
    arch = StageArchitecture.from_dict(d["architecture"])
    i = d["inputs"]
    net = MultiBranchNet(arch, i["fixed"], i["semesters"], i["years"], d["seed"])
    net.set_state({k: np.asarray(v["data"], dtype=float).reshape(v["shape"]) for k, v in d["params"].items()})
    return net, d.get("meta", {})


def load_checkpoint(path: str | Path) -> tuple[MultiBranchNet, dict]:
    return loads_checkpoint(Path(path).read_text(encoding="utf-8"))
