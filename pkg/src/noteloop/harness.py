"""Dataset loading, run orchestration with resume, and report files."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from .core import DATASETS, QAItem, RunConfig, Trace
from .errors import ContractError, LoadError
from .evaluation import ItemResult, Report, aggregate, item_result
from .frameworks import run_framework
from .llm import Gateway, RecordingGateway, current_item
from .retrieval import Retriever
from .retrieval.bm25 import index_corpus
from .retrieval.http import LiveHttp, RecordingHttp

log = logging.getLogger(__name__)

# on-disk field names per dataset format; "aliases" is optional
DEFAULT_FIELDS: dict[str, dict[str, str]] = {
    "hotpotqa": {"id": "_id", "question": "question", "answer": "answer", "aliases": "answer_aliases"},
    "fanoutqa": {"id": "id", "question": "question", "answer": "answer", "aliases": "answer_aliases"},
    "frames": {"id": "id", "question": "Prompt", "answer": "Answer", "aliases": "answer_aliases"},
    "multihoprag": {"id": "id", "question": "query", "answer": "answer", "aliases": "answer_aliases"},
}

TRACES = "traces.jsonl"
FAILED = "failed.jsonl"
RESULTS = "results.jsonl"
MANIFEST = "manifest.json"


@dataclass(frozen=True)
class DatasetSpec:
    path: str
    format: str
    limit: Optional[int] = None
    fields: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.format not in DATASETS:
            raise ContractError(f"unknown dataset format {self.format!r}")
        if not Path(self.path).is_file():
            raise ContractError(f"dataset file not found: {self.path}")
        if self.limit is not None and self.limit < 0:
            raise ContractError("limit must be >= 0")

    @property
    def mapping(self) -> dict[str, str]:
        return {**DEFAULT_FIELDS[self.format], **self.fields}


def _answers(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, dict):
        value = list(value.values())
    if isinstance(value, (list, tuple)):
        return [a for v in value for a in _answers(v)]
    text = str(value).strip()
    return [text] if text else []


def _records(path: Path) -> list[tuple[int, dict]]:
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise LoadError(f"{path}: invalid JSON: {exc}")
        return list(enumerate(data, start=1))
    rows = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append((n, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise LoadError(f"{path}:{n}: invalid JSON: {exc}")
    return rows


def load_dataset(spec: DatasetSpec) -> list[QAItem]:
    m = spec.mapping
    path = Path(spec.path)
    items = []
    for n, rec in _records(path):
        if spec.limit is not None and len(items) >= spec.limit:
            break
        if not isinstance(rec, dict):
            raise LoadError(f"{path}:{n}: record is not an object")
        for key in ("question", "answer"):
            if m[key] not in rec:
                raise LoadError(f"{path}:{n}: missing field {m[key]!r}")
        golds = _answers(rec[m["answer"]]) + _answers(rec.get(m["aliases"]))
        golds = list(dict.fromkeys(golds))
        if not golds:
            raise LoadError(f"{path}:{n}: empty field {m['answer']!r}")
        question = str(rec[m["question"]]).strip()
        if not question:
            raise LoadError(f"{path}:{n}: empty field {m['question']!r}")
        item_id = rec.get(m["id"], rec.get("id"))
        items.append(QAItem(
            id=str(item_id) if item_id is not None else f"{spec.format}-{n}",
            question=question,
            gold_answers=tuple(golds),
            dataset=spec.format,
        ))
    ids = [i.id for i in items]
    if len(set(ids)) != len(ids):
        raise LoadError(f"{path}: duplicate item ids")
    return items


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# Manifest ------------------------------------------------------------------


@dataclass
class RunManifest:
    run_id: str
    config: RunConfig
    dataset: DatasetSpec
    dataset_digest: str
    out_dir: str
    retriever: str = "wikipedia_api"
    statuses: dict[str, str] = field(default_factory=dict)

    @classmethod
    def create(cls, config: RunConfig, dataset: DatasetSpec, out_dir: str | Path,
               retriever: str = "wikipedia_api", repeat: Optional[int] = None) -> RunManifest:
        digest = file_digest(dataset.path)
        blob = json.dumps(
            {"config": config.to_dict(), "dataset": digest, "format": dataset.format,
             "limit": dataset.limit, "retriever": retriever},
            sort_keys=True,
        )
        run_id = hashlib.sha256(blob.encode()).hexdigest()[:12]
        if repeat is not None:
            run_id = f"{run_id}-r{repeat}"
        return cls(run_id, config, dataset, digest, str(out_dir), retriever)

    @property
    def path(self) -> Path:
        return Path(self.out_dir)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "config": self.config.to_dict(),
            "dataset": {"path": self.dataset.path, "format": self.dataset.format,
                        "limit": self.dataset.limit, "fields": dict(self.dataset.fields)},
            "dataset_digest": self.dataset_digest,
            "out_dir": self.out_dir,
            "retriever": self.retriever,
            "statuses": dict(self.statuses),
        }

    def save(self) -> None:
        self.path.mkdir(parents=True, exist_ok=True)
        (self.path / MANIFEST).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, out_dir: str | Path) -> RunManifest:
        p = Path(out_dir) / MANIFEST
        try:
            d = json.loads(p.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise LoadError(f"cannot read run manifest {p}: {exc}")
        return cls(
            run_id=d["run_id"],
            config=RunConfig(**d["config"]),
            dataset=DatasetSpec(**d["dataset"]),
            dataset_digest=d["dataset_digest"],
            out_dir=str(out_dir),
            retriever=d.get("retriever", "wikipedia_api"),
            statuses=dict(d.get("statuses", {})),
        )

    def report_config(self) -> dict:
        return {
            "run_id": self.run_id,
            "dataset_digest": self.dataset_digest,
            "retriever": self.retriever,
            **self.config.to_dict(),
        }


# Running -------------------------------------------------------------------


def read_traces(path: Path) -> dict[str, Trace]:
    traces: dict[str, Trace] = {}
    if not path.exists():
        return traces
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            t = Trace.from_json(line)
        except (json.JSONDecodeError, KeyError) as exc:
            # a torn last line from a killed run is dropped and redone
            log.warning("%s:%d: unreadable trace skipped (%s)", path, n, exc)
            continue
        traces.setdefault(t.item_id, t)
    return traces


class _OrderedWriter:
    """Appends finished traces in dataset order, whatever order they finish in."""

    def __init__(self, order: Sequence[str], traces_path: Path, failed_path: Path):
        self._order = list(order)
        self._pos = 0
        self._pending: dict[str, Trace] = {}
        self._lock = threading.Lock()
        self._traces = traces_path
        self._failed = failed_path

    def put(self, trace: Trace) -> None:
        with self._lock:
            self._pending[trace.item_id] = trace
            while self._pos < len(self._order) and self._order[self._pos] in self._pending:
                t = self._pending.pop(self._order[self._pos])
                target = self._failed if t.terminated_by == "fatal_error" else self._traces
                with target.open("a", encoding="utf-8") as fh:
                    fh.write(t.to_json() + "\n")
                self._pos += 1


def run_benchmark(
    manifest: RunManifest,
    items: Sequence[QAItem],
    gateway: Gateway,
    retriever: Retriever,
    *,
    workers: int = 4,
    clock: Optional[Callable[[], float]] = None,
    prompt_dir: Optional[str] = None,
    on_event: Optional[Callable[[str, str], None]] = None,
) -> Report:
    """Run every pending item, persist traces, and return the run report.

    Items with a trace already in ``traces.jsonl`` are skipped, so a killed
    run can be re-invoked. Items that end in a fatal error go to
    ``failed.jsonl`` and are retried on the next invocation.
    """
    if workers < 1:
        raise ContractError("workers must be >= 1")
    out = manifest.path
    out.mkdir(parents=True, exist_ok=True)
    traces_path, failed_path = out / TRACES, out / FAILED
    done = read_traces(traces_path)
    if traces_path.exists():
        # rewrite so a torn tail line cannot corrupt later appends
        traces_path.write_text("".join(done[i.id].to_json() + "\n" for i in items if i.id in done), encoding="utf-8")
    failed_path.unlink(missing_ok=True)

    pending = [i for i in items if i.id not in done]
    manifest.statuses = {i.id: ("done" if i.id in done else "pending") for i in items}
    manifest.save()
    writer = _OrderedWriter([i.id for i in pending], traces_path, failed_path)

    def work(item: QAItem) -> Trace:
        if on_event:
            on_event("start", item.id)
        token = current_item.set(item.id)
        try:
            trace = run_framework(item, manifest.config, gateway, retriever, clock=clock, prompt_dir=prompt_dir)
        finally:
            current_item.reset(token)
            if on_event:
                on_event("end", item.id)
        writer.put(trace)
        return trace

    # scripted gateways hand out entries in request order, so keep runs sequential
    n_workers = min(workers, len(pending)) if gateway.parallel_safe else 1
    finished: dict[str, Trace] = {}
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            for trace in pool.map(work, pending):
                finished[trace.item_id] = trace
    else:
        for item in pending:
            trace = work(item)
            finished[trace.item_id] = trace

    all_traces = {**done, **finished}
    for item in items:
        failed = all_traces[item.id].terminated_by == "fatal_error"
        manifest.statuses[item.id] = "failed" if failed else "done"
    manifest.save()
    results = [item_result(all_traces[i.id], i) for i in items]
    write_results(out / RESULTS, results)
    report = aggregate(results, manifest.report_config())
    emit_report(report, out)
    return report


def write_results(path: Path, results: Sequence[ItemResult]) -> None:
    path.write_text("".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in results), encoding="utf-8")


def read_results(path: Path) -> list[ItemResult]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}")
    return [ItemResult.from_dict(json.loads(line)) for line in lines if line.strip()]


TABLE_COLUMNS = ("dataset", "framework", "mode", "f1_pct", "judge_pct", "avg_steps",
                 "main_in", "main_out", "notes_in", "notes_out")
_TOKEN_COLUMNS = {"main_in", "main_out", "notes_in", "notes_out"}


def emit_report(report: Report, directory: str | Path) -> tuple[Path, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    json_path, csv_path = d / "report.json", d / "table.csv"
    json_path.write_text(report.to_json(), encoding="utf-8")
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_COLUMNS)
        for row in report.rows:
            cells = []
            for col in TABLE_COLUMNS:
                v = getattr(row, col)
                if v is None:
                    v = ""
                elif col in _TOKEN_COLUMNS:
                    v = int(round(v))
                cells.append(v)
            w.writerow(cells)
    return json_path, csv_path


def load_report(directory: str | Path) -> Report:
    return Report.from_dict(json.loads((Path(directory) / "report.json").read_text(encoding="utf-8")))


def record_fixtures(gateway: Gateway, http: Optional[LiveHttp], directory: str | Path
                    ) -> tuple[RecordingGateway, Optional[RecordingHttp]]:
    """Wrap live clients so every LLM and retrieval exchange is captured as
    a playback script and an HTTP fixture file."""
    d = Path(directory)
    rec_http = RecordingHttp(http, d / "http.jsonl") if http is not None else None
    return RecordingGateway(gateway, d / "playback.jsonl"), rec_http


__all__ = [
    "DEFAULT_FIELDS",
    "DatasetSpec",
    "RunManifest",
    "emit_report",
    "file_digest",
    "index_corpus",
    "load_dataset",
    "load_report",
    "read_results",
    "read_traces",
    "record_fixtures",
    "run_benchmark",
    "write_results",
]
