import io

import numpy as np
import pytest
from hypothesis import given, settings

from kernelscope.errors import IoFailure, MissingInstance, ParseError, UnknownEvent, VersionMismatch
from kernelscope.golden import GoldenModel
from kernelscope.model import Category, ConfigTable, DeviceConfig, EventGroup, EventSpec, KernelMetadata, Trace
from kernelscope.presets import DEVICE, compute_group
from kernelscope.traceio import (
    dumps_golden, dumps_trace, ingest_profiler_csv, loads_golden, loads_trace, read_golden, read_trace,
    write_golden, write_trace,
)
from strategies import golden_models, traces

G = EventGroup((EventSpec("a", Category.SM, 2),))
D = DeviceConfig(2, 1, 100, 1000.0)


@given(traces())
def test_trace_round_trip(t):
    buf = io.BytesIO()
    write_trace(t, buf)
    assert read_trace(io.BytesIO(buf.getvalue())) == t


@given(traces())
def test_trace_writer_deterministic(t):
    assert dumps_trace(t) == dumps_trace(loads_trace(dumps_trace(t)))


@settings(max_examples=50)
@given(golden_models())
def test_golden_round_trip(model):
    buf = io.BytesIO()
    write_golden(model, buf)
    back = read_golden(io.BytesIO(buf.getvalue()))
    assert back == model
    assert dumps_golden(back) == buf.getvalue()


def test_empty_golden_model():
    model = GoldenModel(G, D, {}, ConfigTable())
    assert loads_golden(dumps_golden(model)) == model


def test_empty_trace_is_header_only():
    text = dumps_trace(Trace(G, D, [])).decode()
    assert text.splitlines()[-1] == "window_index,event_name,instance_id,count"


def test_one_window_two_instances_gives_two_rows():
    text = dumps_trace(Trace(G, D, np.array([[[3, 5]]]))).decode()
    lines = text.splitlines()
    assert lines[-2:] == ["0,a,0,3", "0,a,1,5"]
    assert "\r" not in text


def test_truncated_row_reports_line_number():
    data = dumps_trace(Trace(G, D, np.array([[[3, 5]], [[1, 2]]])))
    lines = data.decode().splitlines()
    broken = "\n".join(lines[:-1] + ["1,a,1"]) + "\n"
    with pytest.raises(ParseError) as err:
        loads_trace(broken.encode())
    assert err.value.line == len(lines)


def test_missing_row_is_parse_error():
    data = dumps_trace(Trace(G, D, np.array([[[3, 5]]]))).decode().splitlines()
    with pytest.raises(ParseError):
        loads_trace(("\n".join(data[:-1]) + "\n").encode())


def test_bad_count_is_parse_error():
    data = dumps_trace(Trace(G, D, np.array([[[3, 5]]]))).decode().replace("0,a,1,5", "0,a,1,five")
    with pytest.raises(ParseError) as err:
        loads_trace(data.encode())
    assert "five" in str(err.value)


def test_unknown_version():
    data = dumps_trace(Trace(G, D, [])).replace(b"#kernelscope-trace,1", b"#kernelscope-trace,2")
    with pytest.raises(VersionMismatch):
        loads_trace(data)
    with pytest.raises(ParseError):
        loads_trace(b"hello\n")


def test_golden_version_mismatch():
    data = dumps_golden(GoldenModel(G, D, {}, ConfigTable())).replace(b'"version": 1', b'"version": 9')
    with pytest.raises(VersionMismatch):
        loads_golden(data)
    with pytest.raises(ParseError):
        loads_golden(b"{not json")


class Broken(io.RawIOBase):
    def writable(self):
        return True

    def write(self, b):
        raise OSError("disk full")

    def read(self, n=-1):
        raise OSError("gone")


def test_io_failure():
    with pytest.raises(IoFailure):
        write_trace(Trace(G, D, []), Broken())
    with pytest.raises(IoFailure):
        read_trace(Broken())


def profiler_csv(group, windows, skip=None, extra=None):
    rows = ["sample_ordinal,event_name,instance_id,value"]
    for w in windows:
        for name in group.names:
            for i in range(group.instances):
                if skip == (w, name, i):
                    continue
                rows.append(f"{w},{name},{i},{(w * 7 + i) % 13}")
    if extra:
        rows.append(extra)
    return ("\n".join(rows) + "\n").encode()


def test_ingest_reshapes_rows():
    group = compute_group()
    t = ingest_profiler_csv(profiler_csv(group, range(10)), group, DEVICE)
    assert len(t) == 10 and t.counts.shape == (10, 4, 80)
    assert t.counts[3, 2, 5] == (3 * 7 + 5) % 13


def test_ingest_orders_by_sample_ordinal():
    data = profiler_csv(G, [5, 2])
    t = ingest_profiler_csv(data, G, D)
    assert list(t.windows) == [2, 5]


def test_ingest_unknown_event_and_missing_instance():
    group = compute_group()
    with pytest.raises(UnknownEvent):
        ingest_profiler_csv(profiler_csv(group, range(2), extra="0,bogus,0,1"), group, DEVICE)
    with pytest.raises(MissingInstance):
        ingest_profiler_csv(profiler_csv(group, range(3), skip=(2, "inst_executed", 79)), group, DEVICE)
    with pytest.raises(ParseError):
        ingest_profiler_csv(b"a,b\n", group, DEVICE)
