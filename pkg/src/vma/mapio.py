"""Canonical JSON (de)serialization for maps and trajectories.

Map JSON layout:

    {"schema_version": 1,
     "frame": {"name": str, "unit": "meter"|"pixel",
               "transform": {"theta": f, "tx": f, "ty": f}?},
     "elements": [{"id": str, "kind": "line"|"discrete"|"area",
                   "semantic": str, "points": [[x, y], ...],
                   "attrs": {str: str}, "confidence": f}, ...]}

Numbers round-trip at full double precision. In strict mode unknown fields
raise SchemaError; in lenient mode they are ignored.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from vma.errors import SchemaError
from vma.model import Frame, GeomKind, MapElement, VectorizedMap

SCHEMA_VERSION = 1

_FRAME_KEYS = {"name", "unit", "transform"}
_TRANSFORM_KEYS = {"theta", "tx", "ty"}
_ELEMENT_KEYS = {"id", "kind", "semantic", "points", "attrs", "confidence"}
_MAP_KEYS = {"schema_version", "frame", "elements"}


def _reject_unknown(obj: dict, allowed: set[str], where: str, strict: bool) -> None:
    if not strict:
        return
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"unknown fields {sorted(unknown)} in {where}")


def frame_to_dict(frame: Frame) -> dict[str, Any]:
    d: dict[str, Any] = {"name": frame.name, "unit": frame.unit}
    if not frame.is_global:
        d["transform"] = {"theta": frame.theta, "tx": frame.tx, "ty": frame.ty}
    return d


def frame_from_dict(obj: Any, strict: bool = True) -> Frame:
    if not isinstance(obj, dict):
        raise SchemaError("frame must be an object")
    _reject_unknown(obj, _FRAME_KEYS, "frame", strict)
    try:
        name = obj["name"]
        unit = obj["unit"]
    except KeyError as exc:
        raise SchemaError(f"frame missing field {exc}") from exc
    tr = obj.get("transform")
    if tr is None:
        return Frame(name=name, unit=unit)
    _reject_unknown(tr, _TRANSFORM_KEYS, "frame.transform", strict)
    try:
        return Frame(name=name, unit=unit, theta=float(tr["theta"]), tx=float(tr["tx"]), ty=float(tr["ty"]))
    except KeyError as exc:
        raise SchemaError(f"frame.transform missing field {exc}") from exc


def element_to_dict(e: MapElement) -> dict[str, Any]:
    return {
        "id": e.id,
        "kind": e.kind.value,
        "semantic": e.semantic,
        "points": [[x, y] for x, y in e.points],
        "attrs": dict(e.attrs),
        "confidence": e.confidence,
    }


def element_from_dict(obj: Any, strict: bool = True) -> MapElement:
    if not isinstance(obj, dict):
        raise SchemaError("element must be an object")
    _reject_unknown(obj, _ELEMENT_KEYS, f"element {obj.get('id')!r}", strict)
    try:
        kind = GeomKind(obj["kind"])
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"element has missing or unknown kind: {exc}") from exc
    try:
        points = tuple((float(p[0]), float(p[1])) for p in obj["points"])
        return MapElement(
            id=obj["id"],
            kind=kind,
            semantic=obj["semantic"],
            points=points,
            attrs=dict(obj.get("attrs", {})),
            confidence=float(obj.get("confidence", 1.0)),
        )
    except KeyError as exc:
        raise SchemaError(f"element missing field {exc}") from exc
    except (TypeError, IndexError) as exc:
        raise SchemaError(f"malformed element: {exc}") from exc


def map_to_dict(m: VectorizedMap) -> dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "frame": frame_to_dict(m.frame),
        "elements": [element_to_dict(e) for e in m.elements],
    }


def map_from_dict(obj: Any, strict: bool = True) -> VectorizedMap:
    if not isinstance(obj, dict):
        raise SchemaError("map must be an object")
    _reject_unknown(obj, _MAP_KEYS, "map", strict)
    version = obj.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version}")
    try:
        frame = frame_from_dict(obj["frame"], strict=strict)
        elements = tuple(element_from_dict(e, strict=strict) for e in obj["elements"])
    except KeyError as exc:
        raise SchemaError(f"map missing field {exc}") from exc
    return VectorizedMap(frame=frame, elements=elements)


def dumps_map(m: VectorizedMap) -> str:
    return json.dumps(map_to_dict(m), indent=2)


def loads_map(text: str, strict: bool = True) -> VectorizedMap:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return map_from_dict(obj, strict=strict)


def save_map(m: VectorizedMap, path) -> None:
    Path(path).write_text(dumps_map(m) + "\n", encoding="utf-8")


def load_map(path, strict: bool = True) -> VectorizedMap:
    return loads_map(Path(path).read_text(encoding="utf-8"), strict=strict)


def save_json(obj: Any, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def load_json(path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))
