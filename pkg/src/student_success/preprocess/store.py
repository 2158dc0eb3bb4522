"""Saving prepared scenario splits as ``.npz`` bundles."""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np

from ..catalog import parse_catalog, serialize_catalog
from ..staging import Direction, Scenario
from .dataset import BLOCKS, Block, Dataset
from .encode import Transform
from .pipeline import ScenarioData

PARTS = ("train", "dev", "test")


def _dataset_arrays(prefix: str, ds: Dataset) -> dict[str, np.ndarray]:
    out = {
        f"{prefix}.ids": np.array([str(s) for s in ds.ids], dtype=str),
        f"{prefix}.labels": ds.labels,
        f"{prefix}.directions": np.array(["" if d is None else Direction(d).value for d in ds.directions], dtype=str),
        f"{prefix}.has_fafsa": ds.has_fafsa,
        f"{prefix}.semester_mask": ds.semester_mask,
        f"{prefix}.year_mask": ds.year_mask,
    }
    for name in BLOCKS:
        out[f"{prefix}.{name}"] = ds.block(name).values
    return out


def _layout(ds: Dataset) -> dict:
    return {
        "blocks": {name: {"columns": ds.block(name).columns, "groups": ds.block(name).groups} for name in BLOCKS},
        "categories": ds.categories,
        "encoded": ds.encoded,
    }


def _write_npz(path: Path, arrays: dict[str, np.ndarray]) -> None:
    # fixed zip timestamps so identical inputs give identical bytes
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for key in sorted(arrays):
            buf = io.BytesIO()
            np.save(buf, np.ascontiguousarray(arrays[key]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{key}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, buf.getvalue())


def save_scenario(sd: ScenarioData, path: str | Path, meta: dict | None = None) -> None:
    arrays: dict[str, np.ndarray] = {}
    for part in PARTS:
        arrays.update(_dataset_arrays(part, getattr(sd, part)))
        arrays[f"y.{part}"] = getattr(sd, f"y_{part}")
    header = {
        "meta": meta or {},
        "scenario": sd.scenario.name,
        "catalog": serialize_catalog(sd.train.catalog),
        "layout": _layout(sd.train),
        "transform": json.loads(sd.transform.to_json()),
        "train_unbalanced": sd.train_unbalanced,
    }
    arrays["header"] = np.array(json.dumps(header, sort_keys=True))
    _write_npz(Path(path), arrays)


def load_scenario(path: str | Path) -> tuple[ScenarioData, dict]:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"].reshape(-1)[0]))
        catalog = parse_catalog(header["catalog"])
        layout = header["layout"]

        def ds(part):
            blocks = {name: Block(list(layout["blocks"][name]["columns"]),
                                  {k: list(v) for k, v in layout["blocks"][name]["groups"].items()},
                                  z[f"{part}.{name}"].copy()) for name in BLOCKS}
            return Dataset(
                catalog=catalog,
                ids=z[f"{part}.ids"].astype(object),
                labels=z[f"{part}.labels"].copy(),
                directions=np.array([Direction(d) if d else None for d in z[f"{part}.directions"]] + [None],
                                    dtype=object)[:-1],
                has_fafsa=z[f"{part}.has_fafsa"].copy(),
                fixed=blocks["fixed"], semesters=blocks["semesters"], years=blocks["years"],
                semester_mask=z[f"{part}.semester_mask"].copy(),
                year_mask=z[f"{part}.year_mask"].copy(),
                categories={k: list(v) for k, v in layout["categories"].items()},
                encoded=layout["encoded"],
            )

        sd = ScenarioData(
            scenario=Scenario[header["scenario"]],
            transform=Transform.from_json(json.dumps(header["transform"])),
            train=ds("train"), dev=ds("dev"), test=ds("test"),
            y_train=z["y.train"].copy(), y_dev=z["y.dev"].copy(), y_test=z["y.test"].copy(),
            train_unbalanced=int(header["train_unbalanced"]),
        )
    return sd, header["meta"]
