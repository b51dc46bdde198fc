"""Campaign configuration and the experiments the CLI drives.

One configuration document describes a whole experiment.  Every random
stream is derived from ``seed`` and a trace's role and ordinal, so reruns
reproduce the same traces (and the same output bytes) regardless of how many
workers generated them.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from .attacks import DEFAULT_MAGNITUDE, DEFAULT_PAYLOAD_FRACTION, AttackKind, AttackSpec, apply_attack
from .errors import ConfigError
from .golden import GoldenModel, ValidationPolicy, build_golden
from .gpusim import NoiseSpec, program_as_profile, sampling_decimate, simulate
from .hwsim.sim import HwSimConfig, build_hw_golden, program_cycles, run_hwsim
from .hwsim.validator import HwValidatorConfig
from .model import Decision, DeviceConfig, Verdict
from .presets import DEVICE, PRESET_NAMES, Workload, event_group, preset
from .segmentation import MarkerSpec, segment_trace
from .similarity import channel_flatten, dtw_similarity
from .validator import VERDICT_COLUMNS, summarize, validate_trace

NORMAL_SEED_OFFSET = 100_000
ATTACK_SEED_OFFSET = 200_000
ATTACK_SEED_STRIDE = 10_000
NOISE_SEED_OFFSET = 300_000
GROUPS = ("auto", "compute", "memory")
MODES = ("software", "hardware")
# Attacks the hardware model can run: they change the victim program itself.
HW_ATTACKS = (AttackKind.BUFFER_OVERFLOW, AttackKind.MIND_CONTROL)


@dataclass(frozen=True)
class AttackTemplate:
    """An attack to run on every trace of the attack dataset; unset fields take defaults."""

    kind: AttackKind
    magnitude: Optional[float] = None
    target_kernel: Optional[int] = None
    payload_fraction: float = DEFAULT_PAYLOAD_FRACTION

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", AttackKind(self.kind))
        except ValueError:
            raise ConfigError(f"unknown attack kind {self.kind!r}") from None

    def spec(self, seed: int) -> AttackSpec:
        target = self.target_kernel
        if target is None and self.kind is AttackKind.MIND_CONTROL:
            target = 1
        magnitude = DEFAULT_MAGNITUDE[self.kind] if self.magnitude is None else self.magnitude
        return AttackSpec(self.kind, target, magnitude, seed, self.payload_fraction)

    @property
    def effective_magnitude(self) -> float:
        return DEFAULT_MAGNITUDE[self.kind] if self.magnitude is None else float(self.magnitude)


@dataclass(frozen=True)
class NoiseStudyConfig:
    target: str = "alexnet"
    self_preset: str = "alexnet"
    external_preset: str = "vecAdd"
    levels: tuple = (0, 1, 2, 3)
    traces: int = 20
    golden: int = 20
    occupancy: float = 0.1
    group: str = "compute"

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
        if self.traces < 1 or self.golden < 1 or any(v < 0 for v in self.levels):
            raise ConfigError("noise study sizes must be >= 1 and levels >= 0")


@dataclass(frozen=True)
class HwStudyConfig:
    runs: int = 5
    golden_runs: int = 32
    bandwidths: tuple = (0.2, 0.25, 0.3, 0.5, math.inf)
    sim: HwSimConfig = field(default_factory=HwSimConfig)

    def __post_init__(self):
        object.__setattr__(self, "bandwidths", tuple(_float(b) for b in self.bandwidths))
        if self.runs < 1 or self.golden_runs < 1 or not self.bandwidths:
            raise ConfigError("hwsim runs and golden_runs must be >= 1, with at least one bandwidth")


@dataclass(frozen=True)
class CampaignConfig:
    presets: tuple = ("alexnet",)
    mode: str = "software"
    group: str = "auto"
    seed: int = 0
    dispersion: Optional[float] = None
    keep_every: tuple = (1,)
    sizes: dict = field(default_factory=lambda: {"golden": 100, "normal": 100, "attack": 100})
    attacks: tuple = ()
    policy: ValidationPolicy = field(default_factory=ValidationPolicy)
    device: DeviceConfig = DEVICE
    golden_dir: Optional[str] = None
    output: Optional[str] = None
    workers: int = 1
    noise: NoiseStudyConfig = field(default_factory=NoiseStudyConfig)
    hwsim: HwStudyConfig = field(default_factory=HwStudyConfig)

    def __post_init__(self):
        presets = (self.presets,) if isinstance(self.presets, str) else tuple(self.presets)
        object.__setattr__(self, "presets", presets)
        keep = (self.keep_every,) if isinstance(self.keep_every, int) else tuple(self.keep_every)
        object.__setattr__(self, "keep_every", tuple(int(k) for k in keep))
        sizes = {"golden": 100, "normal": 100, "attack": 100}
        unknown = set(self.sizes) - set(sizes)
        if unknown:
            raise ConfigError(f"unknown dataset size keys {sorted(unknown)}")
        sizes.update({k: int(v) for k, v in self.sizes.items()})
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "attacks", tuple(
            a if isinstance(a, AttackTemplate) else AttackTemplate(a) for a in self.attacks))
        for name in presets:
            if name not in PRESET_NAMES:
                raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
        if not presets:
            raise ConfigError("at least one preset is required")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.group not in GROUPS:
            raise ConfigError(f"group must be one of {GROUPS}")
        if min(sizes.values()) < 1:
            raise ConfigError("dataset sizes must be >= 1")
        if not self.keep_every or min(self.keep_every) < 1:
            raise ConfigError("keep_every values must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.dispersion is not None and self.dispersion < 0:
            raise ConfigError("dispersion must be >= 0")
        if self.mode == "hardware":
            bad = [a.kind.value for a in self.attacks if a.kind not in HW_ATTACKS]
            if bad:
                raise ConfigError(f"the hardware model cannot run {bad}; it supports "
                                  f"{[k.value for k in HW_ATTACKS]}")

    @classmethod
    def from_dict(cls, doc: Optional[dict]) -> "CampaignConfig":
        doc = dict(doc or {})
        known = {f.name for f in fields(cls)} | {"preset"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
        if "preset" in doc:
            if "presets" in doc:
                raise ConfigError("give either 'preset' or 'presets', not both")
            doc["presets"] = doc.pop("preset")
        try:
            if "policy" in doc:
                doc["policy"] = ValidationPolicy(**(doc["policy"] or {}))
            if "device" in doc:
                doc["device"] = DeviceConfig(**(doc["device"] or {}))
            if "attacks" in doc:
                doc["attacks"] = tuple(_attack_from(a) for a in (doc["attacks"] or ()))
            if "noise" in doc:
                doc["noise"] = NoiseStudyConfig(**(doc["noise"] or {}))
            if "hwsim" in doc:
                doc["hwsim"] = _hw_from(doc["hwsim"] or {})
            return cls(**doc)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        """Canonical, JSON-friendly form (paths excluded so reports do not depend on them)."""
        hw = self.hwsim
        sim = asdict(hw.sim)
        return {
            "presets": list(self.presets),
            "mode": self.mode,
            "group": self.group,
            "seed": self.seed,
            "dispersion": self.dispersion,
            "keep_every": list(self.keep_every),
            "sizes": dict(self.sizes),
            "attacks": [
                {"kind": a.kind.value, "magnitude": a.effective_magnitude, "target_kernel": a.target_kernel,
                 "payload_fraction": a.payload_fraction} for a in self.attacks
            ],
            "policy": asdict(self.policy),
            "device": asdict(self.device),
            "noise": asdict(self.noise) | {"levels": list(self.noise.levels)},
            "hwsim": {"runs": hw.runs, "golden_runs": hw.golden_runs,
                      "bandwidths": [_json_float(b) for b in hw.bandwidths],
                      "sim": sim | {"validator": _validator_dict(hw.sim.validator)}},
        }


def _float(v) -> float:
    if isinstance(v, str) and v.strip().lower() in ("inf", "+inf", ".inf", "infinity"):
        return math.inf
    return float(v)


def _json_float(v: float):
    return "inf" if math.isinf(v) else v


def _validator_dict(v: HwValidatorConfig) -> dict:
    d = asdict(v)
    d["tau_override"] = None if v.tau_override is None else list(v.tau_override)
    return d


def _attack_from(a) -> AttackTemplate:
    if isinstance(a, str):
        return AttackTemplate(a)
    if not isinstance(a, dict) or "kind" not in a:
        raise ConfigError(f"attack entries need a 'kind': {a!r}")
    return AttackTemplate(**a)


def _hw_from(doc: dict) -> HwStudyConfig:
    doc = dict(doc)
    sim = dict(doc.pop("sim", None) or {})
    if "validator" in sim:
        sim["validator"] = HwValidatorConfig(**(sim["validator"] or {}))
    if "link_bandwidth" in sim:
        sim["link_bandwidth"] = _float(sim["link_bandwidth"])
    return HwStudyConfig(sim=HwSimConfig(**sim), **doc)


def _pmap(fn, jobs: Sequence, workers: int) -> list:
    """Ordered map, in a process pool when ``workers > 1``."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def workload(cfg: CampaignConfig, name: str) -> Workload:
    return preset(name, device=cfg.device, dispersion=cfg.dispersion)


def marker_for(w: Workload, policy: ValidationPolicy) -> MarkerSpec:
    m = w.marker
    return MarkerSpec(m.marker_event, policy.marker_threshold, m.expected_amplitude, policy.amplitude_tolerance)


def group_for(cfg: CampaignConfig, kind: Optional[AttackKind]) -> str:
    """``auto`` watches DRAM/L2 events for the memory attacks and SM events otherwise."""
    if cfg.group != "auto":
        return cfg.group
    return "memory" if kind in (AttackKind.ROWHAMMER, AttackKind.SLOWDOWN) else "compute"


def campaign_groups(cfg: CampaignConfig) -> list:
    kinds = [a.kind for a in cfg.attacks] or [None]
    return sorted({group_for(cfg, k) for k in kinds})


def golden_seeds(cfg: CampaignConfig) -> range:
    return range(cfg.seed, cfg.seed + cfg.sizes["golden"])


def normal_seeds(cfg: CampaignConfig) -> range:
    base = cfg.seed + NORMAL_SEED_OFFSET
    return range(base, base + cfg.sizes["normal"])


def attack_seeds(cfg: CampaignConfig, index: int) -> range:
    base = cfg.seed + ATTACK_SEED_OFFSET + ATTACK_SEED_STRIDE * index
    return range(base, base + cfg.sizes["attack"])


def _simulate_job(job) -> object:
    program, device, group, spec = job
    noise = None
    if spec is not None:
        program, noise = apply_attack(program, group, spec)
    return simulate(program, device, group, noise)


def _trial_job(job) -> tuple:
    """Simulate one trace and validate it at every decimation factor."""
    program, device, group, spec, keep_every, models = job
    trace = _simulate_job((program, device, group, spec))
    return tuple(validate_trace(sampling_decimate(trace, k), m) for k, m in zip(keep_every, models))


def golden_traces(cfg: CampaignConfig, w: Workload, group_name: str) -> list:
    group = event_group(group_name, cfg.device)
    jobs = [(w.program.with_seed(s), cfg.device, group, None) for s in golden_seeds(cfg)]
    return _pmap(_simulate_job, jobs, cfg.workers)


def build_models(cfg: CampaignConfig, w: Workload, group_name: str, traces=None) -> list:
    """One golden model per decimation factor, all from the same golden traces."""
    traces = golden_traces(cfg, w, group_name) if traces is None else traces
    marker = marker_for(w, cfg.policy)
    return [build_golden([sampling_decimate(t, k) for t in traces], marker, w.table, cfg.policy)
            for k in cfg.keep_every]


def golden_filename(preset_name: str, group_name: str, keep_every: int = 1) -> str:
    suffix = "" if keep_every == 1 else f"_k{keep_every}"
    return f"golden_{preset_name}_{group_name}{suffix}.json"


@dataclass(frozen=True)
class DatasetResult:
    benchmark: str
    group: str
    keep_every: int
    attack: Optional[AttackTemplate]
    normal: tuple
    attack_verdicts: tuple

    @property
    def report(self):
        return summarize(self.normal, self.attack_verdicts)


@dataclass(frozen=True)
class CampaignResult:
    config: CampaignConfig
    datasets: tuple  # DatasetResult

    def _pooled(self, attr: str) -> Optional[float]:
        verdicts = [v for d in self.datasets for v in getattr(d, attr)]
        if attr == "normal":
            # each (benchmark, group, keep_every) normal set is shared by its attacks; count it once
            seen, verdicts = set(), []
            for d in self.datasets:
                key = (d.benchmark, d.group, d.keep_every)
                if key not in seen:
                    seen.add(key)
                    verdicts.extend(d.normal)
        if not verdicts:
            return None
        return sum(v.decision is not Decision.BENIGN for v in verdicts) / len(verdicts)

    @property
    def tpr(self) -> Optional[float]:
        return self._pooled("attack_verdicts")

    @property
    def fpr(self) -> Optional[float]:
        return self._pooled("normal")

    def to_dict(self) -> dict:
        entries = []
        for d in self.datasets:
            r = d.report.to_dict()
            entries.append({
                "benchmark": d.benchmark,
                "group": d.group,
                "keep_every": d.keep_every,
                "attack": None if d.attack is None else d.attack.kind.value,
                "magnitude": None if d.attack is None else d.attack.effective_magnitude,
                **r,
            })
        return {"format": "kernelscope-campaign", "version": 1, "mode": self.config.mode,
                "tpr": self.tpr, "fpr": self.fpr, "results": entries, "config": self.config.to_dict()}

    def report_json(self) -> bytes:
        return (json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8")

    def verdicts_csv(self) -> bytes:
        buf = io.StringIO()
        cols = ("benchmark", "group", "keep_every", "attack") + VERDICT_COLUMNS
        w = csv.DictWriter(buf, cols, lineterminator="\n")
        w.writeheader()
        for d in self.datasets:
            label = "none" if d.attack is None else d.attack.kind.value
            shared = self._normal_written(d)
            for row in d.report.verdict_rows():
                is_normal = row["trace_id"].startswith("normal")
                if is_normal and shared:
                    continue
                w.writerow({"benchmark": d.benchmark, "group": d.group, "keep_every": d.keep_every,
                            "attack": "none" if is_normal else label, **row})
        return buf.getvalue().encode("utf-8")

    def _normal_written(self, d: DatasetResult) -> bool:
        # normal rows go out once per shared normal set, with the first dataset using it
        for other in self.datasets:
            if (other.benchmark, other.group, other.keep_every) == (d.benchmark, d.group, d.keep_every):
                return other is not d
        return False

    def plot_rows(self) -> list:
        rows = []
        for d in self.datasets:
            r = d.report
            rows.append({
                "benchmark": d.benchmark,
                "group": d.group,
                "keep_every": d.keep_every,
                "attack": "none" if d.attack is None else d.attack.kind.value,
                "magnitude": "" if d.attack is None else repr(d.attack.effective_magnitude),
                "tpr": "" if r.tpr is None else f"{r.tpr:.4f}",
                "fpr": "" if r.fpr is None else f"{r.fpr:.4f}",
                "n_normal": len(d.normal),
                "n_attack": len(d.attack_verdicts),
            })
        return rows

    def plot_csv(self) -> bytes:
        return _csv_bytes(PLOT_COLUMNS, self.plot_rows())


PLOT_COLUMNS = ("benchmark", "group", "keep_every", "attack", "magnitude", "tpr", "fpr", "n_normal", "n_attack")


def _csv_bytes(columns, rows) -> bytes:
    buf = io.StringIO()
    w = csv.DictWriter(buf, columns, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue().encode("utf-8")


def load_models(cfg: CampaignConfig, w: Workload, group_name: str) -> list:
    from .traceio import load, loads_golden
    import os

    return [loads_golden(load(os.path.join(cfg.golden_dir, golden_filename(w.name, group_name, k))))
            for k in cfg.keep_every]


def run_software_campaign(cfg: CampaignConfig, models: Optional[dict] = None) -> CampaignResult:
    """Normal and attack datasets for every preset, validated against golden models.

    ``models`` maps ``(preset, group)`` to the per-``keep_every`` model list;
    missing entries are loaded from ``golden_dir`` or built from the golden seeds.
    """
    models = dict(models or {})
    datasets = []
    for name in cfg.presets:
        w = workload(cfg, name)
        for group_name in campaign_groups(cfg):
            group = event_group(group_name, cfg.device)
            key = (name, group_name)
            if key not in models:
                models[key] = load_models(cfg, w, group_name) if cfg.golden_dir else build_models(cfg, w, group_name)
            ms = models[key]
            jobs = [(w.program.with_seed(s), cfg.device, group, None, cfg.keep_every, ms) for s in normal_seeds(cfg)]
            normal = _pmap(_trial_job, jobs, cfg.workers)
            attacks = [(i, a) for i, a in enumerate(cfg.attacks) if group_for(cfg, a.kind) == group_name]
            per_attack = []
            for i, a in attacks:
                jobs = [(w.program.with_seed(s), cfg.device, group, a.spec(s), cfg.keep_every, ms)
                        for s in attack_seeds(cfg, i)]
                per_attack.append((a, _pmap(_trial_job, jobs, cfg.workers)))
            for j, k in enumerate(cfg.keep_every):
                nv = tuple(v[j] for v in normal)
                if not per_attack:
                    datasets.append(DatasetResult(name, group_name, k, None, nv, ()))
                for a, av in per_attack:
                    datasets.append(DatasetResult(name, group_name, k, a, nv, tuple(v[j] for v in av)))
    return CampaignResult(cfg, tuple(datasets))


def _hw_verdict(res) -> Verdict:
    flagged = res.flagged_kernel
    max_run = 1 if res.decision is Decision.COMPROMISED else 0
    return Verdict((), max_run, res.decision, flagged, tuple(res.diagnostics))


def _hw_job(job):
    program, sim, golden = job
    return run_hwsim(program, sim, True, golden)


def run_hardware_campaign(cfg: CampaignConfig) -> CampaignResult:
    """TPR/FPR of the on-chip validator model (per-window checks, halt on flag)."""
    sim = cfg.hwsim.sim
    datasets = []
    for name in cfg.presets:
        w = workload(cfg, name)
        golden = build_hw_golden(w.program, sim, golden_seeds(cfg))
        normal = _pmap(_hw_job, [(w.program.with_seed(s), sim, golden) for s in normal_seeds(cfg)], cfg.workers)
        nv = tuple(_hw_verdict(r) for r in normal)
        if not cfg.attacks:
            datasets.append(DatasetResult(name, "hw", 1, None, nv, ()))
        for i, a in enumerate(cfg.attacks):
            jobs = []
            for s in attack_seeds(cfg, i):
                program, _ = apply_attack(w.program.with_seed(s), event_group("compute", cfg.device), a.spec(s))
                jobs.append((program, sim, golden))
            av = tuple(_hw_verdict(r) for r in _pmap(_hw_job, jobs, cfg.workers))
            datasets.append(DatasetResult(name, "hw", 1, a, nv, av))
    return CampaignResult(cfg, tuple(datasets))


def run_campaign_config(cfg: CampaignConfig, models: Optional[dict] = None) -> CampaignResult:
    if cfg.mode == "hardware":
        return run_hardware_campaign(cfg)
    return run_software_campaign(cfg, models)


def decimation_sweep(name: str, keep_every: Sequence[int], n_golden: int = 100, n_normal: int = 100,
                     seed: int = 0, group: str = "compute") -> dict:
    """FPR of a benign dataset at each decimation factor; ``{k: fpr}``."""
    cfg = CampaignConfig(presets=(name,), group=group, seed=seed, keep_every=tuple(keep_every),
                         sizes={"golden": n_golden, "normal": n_normal, "attack": 1})
    result = run_software_campaign(cfg)
    return {d.keep_every: d.report.fpr for d in result.datasets}


# Noise study -------------------------------------------------------------

NOISE_COLUMNS = ("noise", "concurrency", "mean_dtw", "traces")


def dtw_score(trace, model: GoldenModel) -> float:
    """Mean per-kernel DTW similarity of a trace against its golden references."""
    segments = segment_trace(trace, model.marker)
    return float(np.mean([dtw_similarity(channel_flatten(s), model.refs[s.config_id].series).similarity
                          for s in segments]))


def _noise_job(job) -> float:
    program, device, group, noise, model = job
    return dtw_score(simulate(program, device, group, noise), model)


def noise_study(cfg: CampaignConfig) -> list:
    """Mean DTW similarity with 0..n concurrent copies of a self or an external program.

    Each concurrent copy is a whole other program run (its own seed, launched
    at window 0) occupying a fraction of the SMs.
    """
    ns = cfg.noise
    group = event_group(ns.group, cfg.device)
    target = workload(cfg, ns.target)
    sources = {"self": workload(cfg, ns.self_preset), "external": workload(cfg, ns.external_preset)}
    traces = [simulate(target.program.with_seed(s), cfg.device, group) for s in range(cfg.seed, cfg.seed + ns.golden)]
    model = build_golden(traces, marker_for(target, cfg.policy), target.table, cfg.policy)
    base = cfg.seed + NOISE_SEED_OFFSET

    def noise_for(src: Workload, s: int, level: int) -> Optional[NoiseSpec]:
        if level == 0:
            return None
        return NoiseSpec(tuple(
            (program_as_profile(src.program.with_seed(base + 100 * (s + 1) + j), f"noise{j}", ns.occupancy), 0)
            for j in range(level)))

    rows = []
    cells = [("baseline", 0)] if 0 in ns.levels else []
    cells += [(kind, level) for level in ns.levels if level > 0 for kind in ("self", "external")]
    for kind, level in cells:
        src = sources.get(kind, target)
        jobs = [(target.program.with_seed(base + s), cfg.device, group, noise_for(src, s, level), model)
                for s in range(ns.traces)]
        scores = _pmap(_noise_job, jobs, cfg.workers)
        rows.append({"noise": kind, "concurrency": level, "mean_dtw": float(np.mean(scores)), "traces": ns.traces})
    return rows


def noise_csv(rows) -> bytes:
    return _csv_bytes(NOISE_COLUMNS, [r | {"mean_dtw": f"{r['mean_dtw']:.6f}"} for r in rows])


# Hardware model sweep ----------------------------------------------------

HW_COLUMNS = ("config", "cycles_on", "cycles_off", "overhead", "verdict", "dtw")


def overhead(cycles_on: int, cycles_off: int) -> float:
    return (cycles_on - cycles_off) / cycles_off


def _hw_sweep_job(job) -> list:
    label, program, sim, golden, bandwidths = job
    rows = []
    for bw in bandwidths:
        s = replace(sim, link_bandwidth=bw)
        on = run_hwsim(program, s, True, golden)
        off = run_hwsim(program, s, False)
        cycles_off = off.cycles
        if on.executed_cycles != off.executed_cycles:
            # halted: compare against the same executed work without validation
            cycles_off = program_cycles(program, s, False, on.executed_cycles)
        rows.append({
            "config": f"{label}:bw={_json_float(bw)}",
            "cycles_on": on.cycles,
            "cycles_off": cycles_off,
            "overhead": overhead(on.cycles, cycles_off),
            "verdict": on.decision.value,
            "dtw": min(on.dtw) if on.dtw else float("nan"),
        })
    return rows


def hwsim_study(cfg: CampaignConfig) -> list:
    """Validation on/off runs of benign and control-flow-attacked programs over a bandwidth sweep.

    When the validator halts a program, the validation-off baseline is the
    same executed prefix, so overhead always compares equal work.
    """
    hw = cfg.hwsim
    sim = hw.sim
    jobs = []
    for name in cfg.presets:
        w = workload(cfg, name)
        golden = build_hw_golden(w.program, sim, range(cfg.seed, cfg.seed + hw.golden_runs))
        for r, s in enumerate(range(cfg.seed + NORMAL_SEED_OFFSET, cfg.seed + NORMAL_SEED_OFFSET + hw.runs)):
            jobs.append((f"{name}:benign:run={r}", w.program.with_seed(s), sim, golden, hw.bandwidths))
        for i, a in enumerate(cfg.attacks):
            if a.kind not in HW_ATTACKS:
                continue
            base = cfg.seed + ATTACK_SEED_OFFSET + ATTACK_SEED_STRIDE * i
            for r, s in enumerate(range(base, base + hw.runs)):
                program, _ = apply_attack(w.program.with_seed(s), event_group("compute", cfg.device), a.spec(s))
                jobs.append((f"{name}:{a.kind.value}:run={r}", program, sim, golden, hw.bandwidths))
    return [row for rows in _pmap(_hw_sweep_job, jobs, cfg.workers) for row in rows]


def hwsim_csv(rows) -> bytes:
    return _csv_bytes(HW_COLUMNS, [
        r | {"overhead": f"{r['overhead']:.6f}", "dtw": f"{r['dtw']:.6f}"} for r in rows])
