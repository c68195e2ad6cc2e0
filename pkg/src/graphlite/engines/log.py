"""Execution log records and their newline-delimited JSON form."""
from __future__ import annotations

import base64
import json
import pickle
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class CommitRecord:
    machine: int
    seq: int
    vertex: int
    fn_id: int
    grant_ns: int
    release_ns: int
    commit_ns: int


@dataclass(frozen=True)
class SyncRecord:
    key: str
    value: object
    t_ns: int
    round: object = None


class LogFormatError(ValueError):
    pass


def _pack(value):
    return base64.b64encode(pickle.dumps(value, protocol=4)).decode()


def _unpack(text):
    return pickle.loads(base64.b64decode(text))


def write_log(path, records, sync_records=(), header=None):
    with open(path, "w") as fh:
        fh.write(json.dumps({"type": "header", **(header or {})}, sort_keys=True) + "\n")
        for r in records:
            fh.write(json.dumps({"type": "commit", **asdict(r)}) + "\n")
        for s in sync_records:
            fh.write(json.dumps({"type": "sync", "key": s.key, "value": _pack(s.value),
                                 "t_ns": s.t_ns, "round": str(s.round)}) + "\n")
        fh.write(json.dumps({"type": "end", "commits": len(records),
                             "syncs": len(sync_records)}) + "\n")


def read_log(path):
    """Returns (header, commit records, sync records); raises LogFormatError if damaged."""
    header, records, syncs, end = None, [], [], None
    with open(path) as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for i, line in enumerate(lines):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogFormatError(f"line {i + 1}: {exc}") from exc
        kind = obj.pop("type", None)
        if kind == "header":
            header = obj
        elif kind == "commit":
            records.append(CommitRecord(**obj))
        elif kind == "sync":
            syncs.append(SyncRecord(obj["key"], _unpack(obj["value"]), obj["t_ns"], obj.get("round")))
        elif kind == "end":
            end = obj
        else:
            raise LogFormatError(f"line {i + 1}: unknown record type {kind!r}")
    if header is None:
        raise LogFormatError("missing header record")
    if end is None:
        raise LogFormatError("log truncated: no end record")
    if end["commits"] != len(records) or end["syncs"] != len(syncs):
        raise LogFormatError("log truncated: record counts disagree with end record")
    return header, records, syncs
