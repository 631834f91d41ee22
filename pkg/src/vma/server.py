"""HTTP service exposing a map to the human verification client.

Mutations (element edits, status changes) are serialized through a single
writer lock and journaled append-only as JSON lines, so the exported map is
exactly reproducible by replaying the journal over the original file.
"""
from __future__ import annotations

import json
import logging
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from vma.errors import SchemaError, VmaError
from vma.mapio import element_from_dict, element_to_dict, load_json, map_to_dict
from vma.model import MapElement, VectorizedMap

log = logging.getLogger(__name__)

_STATUSES = ("auto", "accepted", "edited", "deleted")


class MapSession:
    """Mutable review state over one loaded map, with an append-only journal."""

    def __init__(self, vmap: VectorizedMap, journal_path: Path | None = None):
        self.original = vmap
        self.order = [e.id for e in vmap.elements]
        self.elements: dict[str, MapElement] = {e.id: e for e in vmap.elements}
        self.status: dict[str, str] = {e.id: "auto" for e in vmap.elements}
        self.journal_path = journal_path
        self.lock = threading.Lock()
        if journal_path is not None and journal_path.exists():
            for line in journal_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._apply(json.loads(line))

    def _apply(self, entry: dict) -> None:
        op = entry["op"]
        eid = entry["id"]
        if eid not in self.elements:
            raise VmaError(f"journal references unknown element {eid!r}")
        if op == "patch":
            self.elements[eid] = element_from_dict(entry["element"], strict=True)
            self.status[eid] = "edited"
        elif op == "status":
            self.status[eid] = entry["status"]
        else:
            raise VmaError(f"unknown journal op {op!r}")

    def _journal(self, entry: dict) -> None:
        if self.journal_path is None:
            return
        with self.journal_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, separators=(",", ":")) + "\n")

    def patch(self, eid: str, element: MapElement) -> None:
        with self.lock:
            entry = {"op": "patch", "id": eid, "element": element_to_dict(element)}
            self._apply(entry)
            self._journal(entry)

    def set_status(self, eid: str, status: str) -> None:
        with self.lock:
            entry = {"op": "status", "id": eid, "status": status}
            self._apply(entry)
            self._journal(entry)

    def current_map(self) -> VectorizedMap:
        return VectorizedMap(
            self.original.frame,
            tuple(self.elements[eid] for eid in self.order),
        )

    def export_map(self) -> VectorizedMap:
        kept = tuple(
            self.elements[eid] for eid in self.order if self.status[eid] != "deleted"
        )
        return VectorizedMap(self.original.frame, kept)

    def summary(self) -> dict[str, int]:
        out = {s: 0 for s in _STATUSES}
        for s in self.status.values():
            out[s] += 1
        return out


def replay_journal(vmap: VectorizedMap, journal_lines: list[str]) -> VectorizedMap:
    """Apply a mutation journal to the original map and return what an
    export at that point would contain.
    """
    session = MapSession(vmap)
    for line in journal_lines:
        if line.strip():
            session._apply(json.loads(line))
    return session.export_map()


def create_app(
    map_path,
    report_path=None,
    journal_path=None,
    export_path=None,
    ui_dir=None,
) -> FastAPI:
    from vma.mapio import dumps_map, load_map

    map_path = Path(map_path)
    vmap = load_map(map_path)
    journal_path = Path(journal_path) if journal_path else map_path.with_suffix(".journal.jsonl")
    export_path = Path(export_path) if export_path else map_path.with_suffix(".verified.json")
    session = MapSession(vmap, journal_path)
    app = FastAPI(title="vma verification service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.session = session

    def _error(code: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=code, content={"detail": message})

    @app.get("/map")
    def get_map():
        return map_to_dict(session.current_map())

    @app.get("/status")
    def get_status():
        return {"status": dict(session.status), "summary": session.summary()}

    @app.get("/elements/{element_id}")
    def get_element(element_id: str):
        e = session.elements.get(element_id)
        if e is None:
            return _error(404, f"unknown element {element_id!r}")
        return element_to_dict(e)

    @app.patch("/elements/{element_id}")
    async def patch_element(element_id: str, request: Request):
        old = session.elements.get(element_id)
        if old is None:
            return _error(404, f"unknown element {element_id!r}")
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(422, "body is not valid JSON")
        if not isinstance(body, dict):
            return _error(422, "body must be an element object")
        body = dict(body)
        body.setdefault("id", element_id)
        try:
            element = element_from_dict(body, strict=True)
        except (SchemaError, VmaError) as exc:
            return _error(422, str(exc))
        if element.id != element_id:
            return _error(422, "element id must match the URL")
        if element.kind is not old.kind or element.semantic != old.semantic:
            return _error(422, "kind and semantic cannot change; edit points or attrs")
        session.patch(element_id, element)
        return element_to_dict(element)

    @app.post("/elements/{element_id}/status")
    async def set_status(element_id: str, request: Request):
        if element_id not in session.elements:
            return _error(404, f"unknown element {element_id!r}")
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(422, "body is not valid JSON")
        status = body.get("status") if isinstance(body, dict) else None
        if status not in ("accepted", "deleted"):
            return _error(422, "status must be 'accepted' or 'deleted'")
        session.set_status(element_id, status)
        return {"id": element_id, "status": status}

    @app.post("/export")
    def export():
        with session.lock:
            exported = session.export_map()
            export_path.write_text(dumps_map(exported) + "\n", encoding="utf-8")
            manifest = {
                "schema_version": 1,
                "source_map": str(map_path),
                "eligible_training_data": True,
                "element_status": dict(sorted(session.status.items())),
                "summary": session.summary(),
            }
            manifest_path = export_path.with_suffix(".manifest.json")
            manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        return {
            "path": str(export_path),
            "manifest_path": str(manifest_path),
            "summary": session.summary(),
        }

    @app.get("/report")
    def get_report():
        if report_path is None or not Path(report_path).exists():
            return _error(404, "no evaluation report available")
        return load_json(report_path)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
