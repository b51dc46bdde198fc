"""Trace and golden-model persistence, plus profiler CSV ingestion.

Trace format, version 1 (UTF-8, LF line endings, comma separated)::

    #kernelscope-trace,1
    #device,<num_sms>,<sm_group_size>,<window_cycles>,<clock_mhz>
    #event,<name>,<category>,<instance_granularity>      (one per event, in order)
    #meta,<name>,<gx>,<gy>,<gz>,<bx>,<by>,<bz>,<input_size>,<config_id>   (optional)
    window_index,event_name,instance_id,count
    <one row per window, event and instance, zeros included>

Golden models are a single JSON document with sorted keys.
"""

from __future__ import annotations

import csv
import io
import json
from typing import BinaryIO, Optional

import numpy as np

from .errors import IoFailure, MissingInstance, ParseError, UnknownEvent, VersionMismatch
from .golden import GoldenModel, ReferenceSegment, ValidationPolicy
from .model import Category, ConfigTable, DeviceConfig, EventGroup, EventSpec, KernelMetadata, Trace
from .segmentation import MarkerSpec

TRACE_MAGIC = "#kernelscope-trace"
GOLDEN_FORMAT = "kernelscope-golden"
FORMAT_VERSION = 1
DATA_HEADER = ("window_index", "event_name", "instance_id", "count")
PROFILER_COLUMNS = ("sample_ordinal", "event_name", "instance_id", "value")


def _write(sink: BinaryIO, data: bytes):
    try:
        sink.write(data)
    except (OSError, ValueError) as exc:
        raise IoFailure(f"cannot write: {exc}") from exc


def _read(source) -> str:
    try:
        data = source.read() if hasattr(source, "read") else source
    except (OSError, ValueError) as exc:
        raise IoFailure(f"cannot read: {exc}") from exc
    if isinstance(data, bytes):
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(1, f"not UTF-8: {exc}") from exc
    return data


def dumps_trace(trace: Trace) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    d = trace.device
    w.writerow([TRACE_MAGIC, FORMAT_VERSION])
    w.writerow(["#device", d.num_sms, d.sm_group_size, d.window_cycles, repr(float(d.clock_mhz))])
    for e in trace.group.events:
        w.writerow(["#event", e.name, e.category.value, e.instance_granularity])
    if trace.meta is not None:
        m = trace.meta
        w.writerow(["#meta", m.kernel_name, *m.grid_dims, *m.block_dims, m.input_size, m.config_id])
    w.writerow(DATA_HEADER)
    names = trace.group.names
    n_inst = trace.group.instances
    for win, block in zip(trace.windows.tolist(), trace.counts.tolist()):
        for name, row in zip(names, block):
            for inst in range(n_inst):
                w.writerow((win, name, inst, row[inst]))
    return buf.getvalue().encode("utf-8")


def write_trace(trace: Trace, sink: BinaryIO) -> None:
    _write(sink, dumps_trace(trace))


def _int(field: str, line: int, what: str) -> int:
    try:
        return int(field)
    except ValueError:
        raise ParseError(line, f"{what} {field!r} is not an integer") from None


def _header(rows, kind: str) -> tuple:
    """Parse header lines; returns (device, group, meta, index of the first data row)."""
    if not rows or not rows[0] or rows[0][0] != TRACE_MAGIC:
        raise ParseError(1, f"missing {TRACE_MAGIC} header")
    if len(rows[0]) != 2:
        raise ParseError(1, "malformed version line")
    if _int(rows[0][1], 1, "format version") != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported {kind} format version {rows[0][1]}")
    device, events, meta = None, [], None
    i = 1
    while i < len(rows) and rows[i] and rows[i][0].startswith("#"):
        row, line = rows[i], i + 1
        tag = row[0]
        try:
            if tag == "#device" and len(row) == 5:
                device = DeviceConfig(*(_int(f, line, "device field") for f in row[1:4]), float(row[4]))
            elif tag == "#event" and len(row) == 4:
                events.append(EventSpec(row[1], Category(row[2]), _int(row[3], line, "granularity")))
            elif tag == "#meta" and len(row) == 10:
                v = [_int(f, line, "meta field") for f in row[2:]]
                meta = KernelMetadata(row[1], tuple(v[0:3]), tuple(v[3:6]), v[6], v[7])
            else:
                raise ParseError(line, f"unrecognized header line {tag!r} with {len(row)} fields")
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(line, str(exc)) from exc
        except ParseError:
            raise
        except Exception as exc:  # InvalidModel from the constructors
            raise ParseError(line, str(exc)) from exc
        i += 1
    if device is None:
        raise ParseError(i + 1, "missing #device line")
    if not events:
        raise ParseError(i + 1, "no #event lines")
    try:
        group = EventGroup(tuple(events))
    except Exception as exc:
        raise ParseError(i, f"invalid event group: {exc}") from exc
    return device, group, meta, i


def loads_trace(data) -> Trace:
    text = _read(data)
    rows = list(csv.reader(io.StringIO(text, newline="")))
    device, group, meta, i = _header(rows, "trace")
    if i >= len(rows) or tuple(rows[i]) != DATA_HEADER:
        raise ParseError(i + 1, "missing column header line")
    names = {n: k for k, n in enumerate(group.names)}
    n_ev, n_inst = len(group), group.instances
    per_window = n_ev * n_inst
    body = rows[i + 1 :]
    if len(body) % per_window:
        line = i + 2 + (len(body) // per_window) * per_window
        raise ParseError(line, f"incomplete window: expected {per_window} rows per window")
    n_win = len(body) // per_window
    counts = np.zeros((n_win, n_ev, n_inst), dtype=np.int64)
    windows = np.zeros(n_win, dtype=np.int64)
    for r, row in enumerate(body):
        line = i + 2 + r
        if len(row) != 4:
            raise ParseError(line, f"expected 4 fields, got {len(row)}")
        w, k = divmod(r, per_window)
        ev, inst = divmod(k, n_inst)
        win = _int(row[0], line, "window index")
        if k == 0:
            windows[w] = win
        elif win != windows[w]:
            raise ParseError(line, f"window index {win} inside window {windows[w]}")
        if names.get(row[1]) != ev or _int(row[2], line, "instance id") != inst:
            raise ParseError(line, f"expected event {group.names[ev]!r} instance {inst}")
        value = _int(row[3], line, "count")
        if value < 0:
            raise ParseError(line, "negative count")
        counts[w, ev, inst] = value
    try:
        return Trace(group, device, counts, windows, meta)
    except Exception as exc:
        raise ParseError(i + 2, str(exc)) from exc


def read_trace(source: BinaryIO) -> Trace:
    return loads_trace(source)


def ingest_profiler_csv(source, group: EventGroup, device: DeviceConfig) -> Trace:
    """Reshape a profiler export (one row per sample, event and instance) into a Trace."""
    text = _read(source)
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != PROFILER_COLUMNS:
        raise ParseError(1, f"expected columns {','.join(PROFILER_COLUMNS)}")
    names = {n: k for k, n in enumerate(group.names)}
    n_inst = group.instances
    cells: dict = {}
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ParseError(line, f"expected 4 fields, got {len(row)}")
        ordinal = _int(row[0], line, "sample ordinal")
        event = row[1].strip()
        if event not in names:
            raise UnknownEvent(f"line {line}: event {event!r} is not in the group")
        inst = _int(row[2], line, "instance id")
        if not 0 <= inst < n_inst:
            raise ParseError(line, f"instance {inst} out of range 0..{n_inst - 1}")
        value = _int(row[3], line, "value")
        if value < 0 or ordinal < 0:
            raise ParseError(line, "negative value or sample ordinal")
        block = cells.setdefault(ordinal, {})
        if (event, inst) in block:
            raise ParseError(line, f"duplicate row for sample {ordinal}, {event}, instance {inst}")
        block[(event, inst)] = value
    ordinals = sorted(cells)
    counts = np.zeros((len(ordinals), len(group), n_inst), dtype=np.int64)
    for w, ordinal in enumerate(ordinals):
        block = cells[ordinal]
        for name, ev in names.items():
            for inst in range(n_inst):
                if (name, inst) not in block:
                    raise MissingInstance(f"sample {ordinal}: no value for {name} instance {inst}")
                counts[w, ev, inst] = block[(name, inst)]
    return Trace(group, device, counts, np.array(ordinals, dtype=np.int64))


def _group_doc(group: EventGroup) -> list:
    return [{"name": e.name, "category": e.category.value, "instances": e.instance_granularity} for e in group.events]


def _device_doc(d: DeviceConfig) -> dict:
    return {"num_sms": d.num_sms, "sm_group_size": d.sm_group_size, "window_cycles": d.window_cycles,
            "clock_mhz": float(d.clock_mhz)}


def golden_to_dict(model: GoldenModel) -> dict:
    marker = None
    if model.marker is not None:
        m = model.marker
        marker = {"event": m.marker_event, "presence_threshold": m.presence_threshold,
                  "amplitude_tolerance": m.amplitude_tolerance,
                  "expected_amplitude": [[cid, amp] for cid, amp in sorted(m.expected_amplitude.items())]}
    p = model.policy
    return {
        "format": GOLDEN_FORMAT,
        "version": FORMAT_VERSION,
        "device": _device_doc(model.device),
        "group": _group_doc(model.group),
        "config_table": [
            {"id": cid, "kernel_name": k[0], "grid": list(k[1]), "block": list(k[2]), "input_size": k[3]}
            for k, cid in model.config_table.items()
        ],
        "policy": {"tau_corr": p.tau_corr, "reject_run_len": p.reject_run_len,
                   "amplitude_tolerance": p.amplitude_tolerance, "marker_threshold": p.marker_threshold,
                   "min_overlap_frac": p.min_overlap_frac},
        "sequence": list(model.sequence),
        "marker": marker,
        "refs": [
            {"config_id": cid, "support": r.support, "series": r.series.tolist(),
             "spread": r.per_window_spread.tolist()}
            for cid, r in model.refs.items()
        ],
    }


def golden_from_dict(doc: dict) -> GoldenModel:
    if doc.get("format") != GOLDEN_FORMAT:
        raise ParseError(1, "not a golden-model document")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported golden format version {doc.get('version')}")
    try:
        device = DeviceConfig(**doc["device"])
        group = EventGroup(tuple(EventSpec(e["name"], Category(e["category"]), e["instances"]) for e in doc["group"]))
        table = ConfigTable()
        for e in doc["config_table"]:
            table.register(KernelMetadata(e["kernel_name"], tuple(e["grid"]), tuple(e["block"]), e["input_size"]), e["id"])
        policy = ValidationPolicy(**doc["policy"])
        marker = None
        if doc.get("marker") is not None:
            m = doc["marker"]
            marker = MarkerSpec(m["event"], m["presence_threshold"], {c: a for c, a in m["expected_amplitude"]},
                                m["amplitude_tolerance"])
        refs = {}
        for r in doc["refs"]:
            series = np.array(r["series"], dtype=np.float64)
            spread = np.array(r["spread"], dtype=np.float64)
            refs[r["config_id"]] = ReferenceSegment(r["config_id"], series, spread, r["support"])
        return GoldenModel(group, device, refs, table, policy, tuple(doc.get("sequence", ())), marker)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(1, f"malformed golden document: {exc}") from exc


def dumps_golden(model: GoldenModel) -> bytes:
    return (json.dumps(golden_to_dict(model), sort_keys=True, indent=1) + "\n").encode("utf-8")


def loads_golden(data) -> GoldenModel:
    text = _read(data)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, exc.msg) from exc
    if not isinstance(doc, dict):
        raise ParseError(1, "golden document must be a JSON object")
    return golden_from_dict(doc)


def write_golden(model: GoldenModel, sink: BinaryIO) -> None:
    _write(sink, dumps_golden(model))


def read_golden(source: BinaryIO) -> GoldenModel:
    return loads_golden(source)


def save(path, data: bytes) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load(path) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
