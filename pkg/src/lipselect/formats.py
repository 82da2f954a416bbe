"""Canonical report emission and document (de)serialization.

Reports must be byte-identical across repeated runs, so floats are written
with a fixed 17-significant-digit format (which round-trips doubles
exactly), object keys are emitted sorted, and no locale- or
platform-dependent formatting is used.
"""

from __future__ import annotations

import json
import math
from typing import Any, Dict, List

import numpy as np

from .errors import SchemaError
from .iteration import (
    IterationConfig,
    RoundRecord,
    Selection,
    SelectionSequence,
)
from .metric import SampledMetricSpace, SeparationHierarchy, SeparationRound


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise SchemaError("reports must not contain non-finite numbers")
    return format(x, ".17g")


def _canonical(obj: Any, out: List[str]) -> None:
    if obj is None or obj is True or obj is False:
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj, key=str)):
            if i:
                out.append(",")
            out.append(json.dumps(str(key), ensure_ascii=True))
            out.append(":")
            _canonical(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _canonical(item, out)
        out.append("]")
    elif isinstance(obj, np.ndarray):
        _canonical(obj.tolist(), out)
    else:
        raise SchemaError(f"cannot serialize {type(obj).__name__} into a report")


def dumps_canonical(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, 17-significant-digit floats."""
    out: List[str] = []
    _canonical(obj, out)
    out.append("\n")
    return "".join(out)


def write_report(path, obj: Any) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps_canonical(obj))


def selection_csv_text(space: SampledMetricSpace, selection: Selection) -> str:
    dim = len(next(iter(selection.values.values())))
    header = "point_id," + ",".join(f"x{j + 1}" for j in range(dim))
    lines = [header]
    for a in space.point_ids:
        row = selection.values[a]
        lines.append(str(a) + "," + ",".join(format_float(x) for x in row))
    return "\n".join(lines) + "\n"


def profile_csv_text(profiles) -> str:
    lines = ["point_id,r,ratio"]
    for profile in profiles:
        for r, ratio in profile.rows:
            lines.append(f"{profile.point},{format_float(r)},{format_float(ratio)}")
    return "\n".join(lines) + "\n"


# -- selection sequences -------------------------------------------------------


def sequence_to_dict(seq: SelectionSequence) -> dict:
    """Exportable view of a run: config, hierarchy, per-round evidence, and
    the selection tables (anchored local selections are not exported)."""
    return {
        "config": seq.config.to_json_dict(),
        "hierarchy": seq.hierarchy.to_json_dict(),
        "rounds": [
            {
                "n": record.n,
                "B": list(record.members),
                "new": list(record.new_points),
                "deltas": {str(b): float(d) for b, d in record.deltas.items()},
                "sup_change": float(record.sup_change),
            }
            for record in seq.rounds
        ],
        "selections": [sel.to_json_dict() for sel in seq.selections],
    }


def _resolve_ids(space: SampledMetricSpace, raw_ids) -> list:
    by_str = {str(a): a for a in space.point_ids}
    out = []
    for raw in raw_ids:
        key = str(raw)
        if key not in by_str:
            raise SchemaError(f"unknown point id {raw!r} in stored sequence")
        out.append(by_str[key])
    return out


def sequence_from_dict(doc: dict, correspondence) -> SelectionSequence:
    """Rebuild a stored sequence against its correspondence for re-checking.

    Local anchored selections are not stored, so records carry empty tables;
    the verification checks do not need them.
    """
    for key in ("config", "hierarchy", "rounds", "selections"):
        if key not in doc:
            raise SchemaError(f"sequence document is missing {key!r}")
    space = correspondence.space
    cfg = doc["config"]
    config = IterationConfig(
        alpha=cfg["alpha"],
        beta=cfg["beta"],
        epsilon=cfg.get("epsilon"),
        rounds=cfg["rounds"],
        delta_min=cfg.get("delta_min", 1e-9),
        tol=cfg.get("tol", 1e-9),
    )
    hierarchy = SeparationHierarchy(
        rounds=tuple(
            SeparationRound(
                n=rd["n"], r=rd["r"], members=tuple(_resolve_ids(space, rd["B"]))
            )
            for rd in doc["hierarchy"]["rounds"]
        )
    )
    rounds = []
    for rd in doc["rounds"]:
        members = tuple(_resolve_ids(space, rd["B"]))
        new_points = tuple(_resolve_ids(space, rd["new"]))
        deltas_raw = rd["deltas"]
        deltas = {
            b: float(deltas_raw[str(b)]) for b in new_points
        }
        rounds.append(
            RoundRecord(
                n=int(rd["n"]),
                members=members,
                new_points=new_points,
                deltas=deltas,
                local_selections={},
                sup_change=float(rd["sup_change"]),
            )
        )
    selections = []
    for sel_doc in doc["selections"]:
        raw = sel_doc["values"]
        values: Dict = {}
        for a in space.point_ids:
            key = str(a)
            if key not in raw:
                raise SchemaError(f"stored selection is missing point {key}")
            values[a] = np.asarray(raw[key], dtype=float)
        selections.append(Selection(values=values, round_index=int(sel_doc["round"])))
    if len(selections) != len(rounds) + 1:
        raise SchemaError("stored sequence must hold one selection per round plus f0")
    return SelectionSequence(
        correspondence=correspondence,
        config=config,
        hierarchy=hierarchy,
        selections=selections,
        rounds=rounds,
    )
