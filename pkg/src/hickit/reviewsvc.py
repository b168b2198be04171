"""Expert review bookkeeping: sessions, an append-only assessment log, tallies.

A session pairs each source image with overlays from up to two model runs so
a reviewer can grade them side by side. Assessments are never updated in
place: every submission appends one JSON line, and the effective state is
the latest line per (reviewer, image, run). That makes the log the single
source of truth; a service restart replays it and arrives at exactly the
tally a live process would report.
"""

# No postponed annotations here: build_app relies on FastAPI reading the
# eagerly evaluated Request type from its locally imported handler signature.

import hashlib
import json
import threading
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import DatasetError, FormatError

RATINGS = ("unsatisfactory", "sufficient", "satisfactory")
OTHERS_DETECTED = ("yes", "no", "not_applicable")
COMPARISONS = ("a_better", "similar", "b_better")
RUN_IDS = ("run_a", "run_b")


class FieldErrors(DatasetError):
    """Validation failure carrying a per-field message map."""

    def __init__(self, errors: dict[str, str]):
        super().__init__("; ".join(f"{k}: {v}" for k, v in sorted(errors.items())))
        self.errors = errors


@dataclass(frozen=True)
class Assessment:
    """One reviewer's verdict on one run's overlay for one image.

    fp_count records how many marked regions the reviewer judged spurious.
    comparison relates the two runs on this image and may ride along on
    either run's assessment; the latest one submitted wins.
    """

    session_id: str
    reviewer: str
    image_id: str
    run_id: str
    rating: str
    others_detected: str
    fp_count: int
    comparison: str | None = None
    note: str | None = None

    @classmethod
    def from_payload(cls, payload: dict) -> "Assessment":
        errors: dict[str, str] = {}
        if not isinstance(payload, dict):
            raise FieldErrors({"body": "expected a JSON object"})

        def text(fieldname, required=True):
            value = payload.get(fieldname)
            if value is None:
                if required:
                    errors[fieldname] = "required"
                return None
            if not isinstance(value, str) or not value.strip():
                errors[fieldname] = "must be a non-empty string"
                return None
            return value

        session_id = text("session_id")
        reviewer = text("reviewer")
        image_id = text("image_id")
        run_id = text("run_id")
        rating = text("rating")
        others = text("others_detected")
        note = payload.get("note")
        if note is not None and not isinstance(note, str):
            errors["note"] = "must be a string"
        if run_id is not None and run_id not in RUN_IDS:
            errors["run_id"] = f"must be one of {list(RUN_IDS)}"
        if rating is not None and rating not in RATINGS:
            errors["rating"] = f"must be one of {list(RATINGS)}"
        if others is not None and others not in OTHERS_DETECTED:
            errors["others_detected"] = f"must be one of {list(OTHERS_DETECTED)}"
        fp_count = payload.get("fp_count")
        if not isinstance(fp_count, int) or isinstance(fp_count, bool) or fp_count < 0:
            errors["fp_count"] = "must be a non-negative integer"
        comparison = payload.get("comparison")
        if comparison is not None and comparison not in COMPARISONS:
            errors["comparison"] = f"must be one of {list(COMPARISONS)} or omitted"
        if errors:
            raise FieldErrors(errors)
        return cls(
            session_id=session_id,
            reviewer=reviewer,
            image_id=image_id,
            run_id=run_id,
            rating=rating,
            others_detected=others,
            fp_count=fp_count,
            comparison=comparison,
            note=note,
        )


def session_id_for(spec: dict) -> str:
    """Deterministic id: SHA-256 of the canonical spec JSON, 12 hex chars."""
    canon = json.dumps(spec, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def _validate_session_spec(spec: dict) -> dict[str, str]:
    errors = {}
    for key in ("run_a", "run_b"):
        if not isinstance(spec.get(key), str) or not spec[key]:
            errors[key] = "required run label"
    images = spec.get("images")
    if not isinstance(images, list) or not images:
        errors["images"] = "required non-empty list"
        return errors
    seen = set()
    for i, im in enumerate(images):
        if not isinstance(im, dict) or not isinstance(im.get("image_id"), str):
            errors[f"images[{i}]"] = "needs a string image_id"
            continue
        if im["image_id"] in seen:
            errors[f"images[{i}]"] = f"duplicate image_id {im['image_id']!r}"
        seen.add(im["image_id"])
        if not isinstance(im.get("original"), str):
            errors[f"images[{i}].original"] = "required asset path"
    return errors


class ReviewStore:
    """Directory-backed persistence: sessions.json plus assessments.jsonl.

    Appends are serialized under a lock and flushed per line, so concurrent
    submitters interleave but never lose writes. A half-written final line
    (crash artifact) is tolerated on load; anything else malformed aborts.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.sessions_path = self.root / "sessions.json"
        self.log_path = self.root / "assessments.jsonl"
        self._lock = threading.Lock()
        self.sessions: dict[str, dict] = {}
        if self.sessions_path.exists():
            try:
                self.sessions = json.loads(self.sessions_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{self.sessions_path}: corrupt: {exc.msg}") from exc
        self._log: list[Assessment] = []
        self._load_log()

    def _load_log(self) -> None:
        if not self.log_path.exists():
            return
        lines = self.log_path.read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        for lineno, line in enumerate(lines, start=1):
            try:
                raw = json.loads(line)
                raw.pop("seq", None)
                self._log.append(Assessment(**raw))
            except (json.JSONDecodeError, TypeError) as exc:
                if lineno == len(lines) and isinstance(exc, json.JSONDecodeError):
                    # Torn final line from an interrupted append; drop it.
                    break
                raise FormatError(
                    f"{self.log_path}: line {lineno}: corrupt assessment: {exc}"
                ) from exc

    def create_session(self, spec: dict) -> dict:
        """Register a session; identical specs map to the same id (idempotent)."""
        errors = _validate_session_spec(spec)
        if errors:
            raise FieldErrors(errors)
        sid = session_id_for(spec)
        with self._lock:
            if sid not in self.sessions:
                session = dict(spec)
                session["session_id"] = sid
                self.sessions[sid] = session
                self.sessions_path.write_text(
                    json.dumps(self.sessions, sort_keys=True, indent=1), encoding="utf-8"
                )
            return self.sessions[sid]

    def get_session(self, session_id: str) -> dict:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise DatasetError(f"unknown session {session_id!r}") from None

    def check_assets(self, session_id: str, asset_root: str | Path) -> list[str]:
        """Paths referenced by the session that do not exist under asset_root."""
        root = Path(asset_root)
        missing = []
        for im in self.get_session(session_id)["images"]:
            for key in ("original", "run_a_overlay", "run_b_overlay"):
                rel = im.get(key)
                if rel is not None and not (root / rel).is_file():
                    missing.append(f"{im['image_id']}: {rel}")
        return missing

    def record(self, assessment: Assessment) -> int:
        """Append one assessment; returns its 1-based sequence number."""
        session = self.get_session(assessment.session_id)
        image_ids = {im["image_id"] for im in session["images"]}
        if assessment.image_id not in image_ids:
            raise FieldErrors({"image_id": f"not part of session {assessment.session_id}"})
        with self._lock:
            self._log.append(assessment)
            seq = len(self._log)
            entry = {k: v for k, v in asdict(assessment).items() if v is not None}
            entry["seq"] = seq
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
                fh.flush()
            return seq

    def effective(self, session_id: str) -> dict[tuple[str, str, str], Assessment]:
        """Latest assessment per (reviewer, image, run) for one session."""
        out: dict[tuple[str, str, str], Assessment] = {}
        for a in self._log:
            if a.session_id == session_id:
                out[(a.reviewer, a.image_id, a.run_id)] = a
        return out

    def tally(self, session_id: str) -> dict:
        """Aggregate the effective assessments of a session.

        Ratings count per run over the latest submission per (reviewer,
        image, run). Comparisons are per (reviewer, image): the latest
        surviving assessment that carries one wins, whichever run it rode on.
        """
        self.get_session(session_id)
        effective = self.effective(session_id)
        ratings = {run: {r: 0 for r in RATINGS} for run in RUN_IDS}
        fp_total = {run: 0 for run in RUN_IDS}
        for a in effective.values():
            ratings[a.run_id][a.rating] += 1
            fp_total[a.run_id] += a.fp_count
        comparison_by_pair: dict[tuple[str, str], str] = {}
        for a in self._log:
            if a.session_id == session_id and a.comparison is not None:
                if (a.reviewer, a.image_id, a.run_id) in effective and \
                        effective[(a.reviewer, a.image_id, a.run_id)] is a:
                    comparison_by_pair[(a.reviewer, a.image_id)] = a.comparison
        comparisons = {c: 0 for c in COMPARISONS}
        for c in comparison_by_pair.values():
            comparisons[c] += 1
        images_assessed = {
            run: len({(rev, img) for (rev, img, r) in effective if r == run}) for run in RUN_IDS
        }
        return {
            "session_id": session_id,
            "ratings": ratings,
            "false_positives": fp_total,
            "comparisons": comparisons,
            "images_assessed": images_assessed,
            "n_assessments": len(effective),
        }


def build_app(store: ReviewStore, asset_root: str | Path, ui_dir: str | Path | None = None):
    """Assemble the HTTP facade over a store.

    Endpoints are JSON under /api, raw session assets under /assets, and an
    optional static UI bundle at the root.
    """
    from fastapi import FastAPI, Request
    from fastapi.responses import FileResponse, JSONResponse
    from fastapi.staticfiles import StaticFiles

    asset_root = Path(asset_root).resolve()
    app = FastAPI(title="honeycomb review service", version="0.1.0")

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/sessions")
    def list_sessions():
        return [
            {
                "session_id": sid,
                "name": s.get("name", sid),
                "run_a": s["run_a"],
                "run_b": s["run_b"],
                "n_images": len(s["images"]),
            }
            for sid, s in sorted(store.sessions.items())
        ]

    def _session_or_404(session_id: str):
        try:
            return store.get_session(session_id)
        except DatasetError:
            return None

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        session = _session_or_404(session_id)
        if session is None:
            return JSONResponse({"error": f"unknown session {session_id!r}"}, status_code=404)
        return session

    @app.get("/api/sessions/{session_id}/images")
    def get_images(session_id: str):
        session = _session_or_404(session_id)
        if session is None:
            return JSONResponse({"error": f"unknown session {session_id!r}"}, status_code=404)
        return session["images"]

    @app.get("/api/sessions/{session_id}/tally")
    def get_tally(session_id: str):
        if _session_or_404(session_id) is None:
            return JSONResponse({"error": f"unknown session {session_id!r}"}, status_code=404)
        return store.tally(session_id)

    @app.post("/api/assessments")
    async def post_assessment(request: Request):
        try:
            payload = await request.json()
        except json.JSONDecodeError:
            return JSONResponse({"errors": {"body": "invalid JSON"}}, status_code=400)
        try:
            assessment = Assessment.from_payload(payload)
        except FieldErrors as exc:
            return JSONResponse({"errors": exc.errors}, status_code=400)
        if assessment.session_id not in store.sessions:
            return JSONResponse(
                {"error": f"unknown session {assessment.session_id!r}"}, status_code=404
            )
        try:
            seq = store.record(assessment)
        except FieldErrors as exc:
            return JSONResponse({"errors": exc.errors}, status_code=400)
        return {"ok": True, "seq": seq}

    @app.get("/assets/{rel_path:path}")
    def get_asset(rel_path: str):
        target = (asset_root / rel_path).resolve()
        if not target.is_relative_to(asset_root) or not target.is_file():
            return JSONResponse({"error": f"no such asset {rel_path!r}"}, status_code=404)
        return FileResponse(target)

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
