"""Hypothesis strategies for domain objects."""

import numpy as np
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kernelscope.golden import GoldenModel, ReferenceSegment, ValidationPolicy
from kernelscope.model import Category, ConfigTable, DeviceConfig, EventGroup, EventSpec, KernelMetadata, Trace
from kernelscope.segmentation import MarkerSpec

names = st.text(st.characters(blacklist_characters=",\n\r#", blacklist_categories=("Cs", "Cc")),
                min_size=1, max_size=12)


@st.composite
def devices(draw):
    group_size = draw(st.integers(1, 4))
    return DeviceConfig(group_size * draw(st.integers(1, 8)), group_size, draw(st.integers(1, 10**6)),
                        draw(st.floats(1.0, 3000.0, allow_nan=False)))


@st.composite
def groups(draw, max_instances=4):
    n = draw(st.integers(1, 4))
    event_names = draw(st.lists(names, min_size=n, max_size=n, unique=True))
    inst = draw(st.integers(1, max_instances))
    cats = draw(st.lists(st.sampled_from(list(Category)), min_size=n, max_size=n))
    return EventGroup(tuple(EventSpec(nm, c, inst) for nm, c in zip(event_names, cats)))


@st.composite
def metas(draw, config_id=None):
    dims = st.tuples(st.integers(1, 1024), st.integers(1, 64), st.integers(1, 8))
    cid = draw(st.integers(-1, 50)) if config_id is None else config_id
    return KernelMetadata(draw(names), draw(dims), draw(dims), draw(st.integers(0, 10**9)), cid)


@st.composite
def traces(draw, max_windows=6):
    group = draw(groups())
    t = draw(st.integers(0, max_windows))
    counts = draw(arrays(np.int64, (t, len(group), group.instances), elements=st.integers(0, 2**40)))
    gaps = draw(st.lists(st.integers(1, 5), min_size=t, max_size=t))
    windows = np.cumsum(gaps) + draw(st.integers(-1, 100)) if t else None
    meta = draw(st.none() | metas())
    return Trace(group, draw(devices()), counts, windows, meta)


@st.composite
def golden_models(draw):
    group = draw(groups())
    device = draw(devices())
    n_cfg = draw(st.integers(0, 4))
    table = ConfigTable()
    for cid in range(n_cfg):
        table.register(KernelMetadata(f"k{cid}", (cid + 1, 1, 1), (32, 1, 1), cid), cid)
    refs = {}
    finite = st.floats(-1e9, 1e9, allow_nan=False, allow_infinity=False)
    for cid in draw(st.lists(st.integers(0, max(0, n_cfg - 1)), unique=True, max_size=n_cfg)) if n_cfg else []:
        t = draw(st.integers(1, 5))
        series = draw(arrays(np.float64, (len(group), t), elements=finite))
        spread = draw(arrays(np.float64, (len(group), t), elements=st.floats(0, 1e6)))
        refs[cid] = ReferenceSegment(cid, series, spread, draw(st.integers(1, 100)))
    sequence = draw(st.lists(st.integers(0, n_cfg - 1), max_size=6)) if n_cfg else []
    policy = ValidationPolicy(draw(st.floats(0.01, 0.99)), draw(st.integers(1, 8)), draw(st.floats(0, 0.5)),
                              draw(st.integers(1, 10)), draw(st.floats(0.1, 1.0)))
    marker = None
    if draw(st.booleans()):
        amps = {cid: 100 + 50 * cid for cid in range(n_cfg)}
        marker = MarkerSpec(group.names[0], 1, amps, 0.1)
    return GoldenModel(group, device, refs, table, policy, tuple(sequence), marker)
