import math

import pytest

from kernelscope.campaign import (
    AttackTemplate, CampaignConfig, campaign_groups, decimation_sweep, golden_filename, group_for, hwsim_study,
    noise_study, run_campaign_config, run_software_campaign,
)
from kernelscope.attacks import AttackKind
from kernelscope.errors import ConfigError

SMALL = {"golden": 8, "normal": 6, "attack": 6}


def test_config_defaults_and_parsing():
    cfg = CampaignConfig.from_dict({"preset": "vecAdd", "attacks": ["Rowhammer", {"kind": "BufferOverflow",
                                                                                 "magnitude": 0.3}]})
    assert cfg.presets == ("vecAdd",) and cfg.sizes == {"golden": 100, "normal": 100, "attack": 100}
    assert cfg.attacks[1].effective_magnitude == 0.3 and cfg.attacks[0].effective_magnitude == 20.0
    assert campaign_groups(cfg) == ["compute", "memory"]
    assert group_for(cfg, AttackKind.SLOWDOWN) == "memory"
    assert CampaignConfig.from_dict({"hwsim": {"bandwidths": [0.5, ".inf"]}}).hwsim.bandwidths == (0.5, math.inf)


@pytest.mark.parametrize("doc", [
    {"bogus": 1}, {"preset": "resnet"}, {"sizes": {"golden": 0}}, {"sizes": {"extra": 3}},
    {"attacks": ["Nope"]}, {"mode": "hardware", "attacks": ["Rowhammer"]}, {"keep_every": [0]},
    {"policy": {"tau_corr": 2}}, {"preset": "vecAdd", "presets": ["vecAdd"]},
])
def test_config_errors(doc):
    with pytest.raises(ConfigError):
        CampaignConfig.from_dict(doc)


def test_config_to_dict_round_trips():
    cfg = CampaignConfig.from_dict({"presets": ["alexnet", "matMul"], "attacks": ["MindControl"], "seed": 4})
    assert CampaignConfig.from_dict(cfg.to_dict() | {"hwsim": {"runs": 5}}).to_dict()["presets"] == cfg.to_dict()["presets"]


def test_software_campaign_small():
    cfg = CampaignConfig(presets=("alexnet",), sizes=SMALL,
                         attacks=(AttackTemplate("BufferOverflow"), AttackTemplate("Rowhammer")))
    res = run_software_campaign(cfg)
    assert [(d.group, d.attack.kind.value) for d in res.datasets] == [("compute", "BufferOverflow"),
                                                                       ("memory", "Rowhammer")]
    assert res.tpr == 1.0 and res.fpr == 0.0
    rows = res.plot_rows()
    assert {r["attack"] for r in rows} == {"BufferOverflow", "Rowhammer"}
    csv = res.verdicts_csv().decode().splitlines()
    assert len(csv) == 1 + 2 * (6 + 6)


def test_empty_attack_set_reports_null_tpr():
    res = run_software_campaign(CampaignConfig(presets=("matMul",), sizes=SMALL))
    assert res.tpr is None and res.to_dict()["tpr"] is None
    assert res.plot_rows()[0]["tpr"] == ""


def test_report_schema_is_stable_across_presets():
    keys = None
    for name in ("vecAdd", "cifarnet"):
        d = run_software_campaign(CampaignConfig(presets=(name,), sizes=SMALL,
                                                 attacks=(AttackTemplate("Slowdown"),))).to_dict()
        shape = (sorted(d), sorted(d["results"][0]))
        assert keys is None or shape == keys
        keys = shape


def test_workers_do_not_change_results():
    cfg = CampaignConfig(presets=("histogram",), sizes=SMALL, attacks=(AttackTemplate("BufferOverflow"),))
    a = run_software_campaign(cfg).report_json()
    b = run_software_campaign(CampaignConfig(**{**cfg.__dict__, "workers": 2})).report_json()
    assert a == b


def test_hardware_campaign_small():
    cfg = CampaignConfig(presets=("alexnet",), mode="hardware", sizes={"golden": 16, "normal": 3, "attack": 3},
                         attacks=(AttackTemplate("BufferOverflow"), AttackTemplate("MindControl")))
    res = run_campaign_config(cfg)
    assert res.fpr == 0.0 and res.tpr == 1.0


def test_decimation_sweep_keys():
    fpr = decimation_sweep("bitonicSort", (1, 2), n_golden=6, n_normal=4)
    assert set(fpr) == {1, 2} and all(0 <= v <= 1 for v in fpr.values())


def test_noise_study_zero_dispersion_baseline_is_one():
    cfg = CampaignConfig.from_dict({"dispersion": 0.0, "noise": {"levels": [0], "traces": 3, "golden": 3}})
    rows = noise_study(cfg)
    assert rows == [{"noise": "baseline", "concurrency": 0, "mean_dtw": 1.0, "traces": 3}]


def test_hwsim_study_rows():
    cfg = CampaignConfig.from_dict({"preset": "cifarnet", "attacks": ["BufferOverflow", "Rowhammer"],
                                    "hwsim": {"runs": 1, "golden_runs": 8, "bandwidths": [0.2, 0.5, "inf"]}})
    rows = hwsim_study(cfg)
    assert len(rows) == 2 * 3  # rowhammer has no hardware-model form
    for r in rows:
        assert r["overhead"] >= 0
        if r["config"].endswith("bw=inf"):
            assert r["overhead"] == 0
    assert all(r["dtw"] < 0.1 for r in rows if "BufferOverflow" in r["config"])


def test_golden_filename():
    assert golden_filename("alexnet", "compute") == "golden_alexnet_compute.json"
    assert golden_filename("alexnet", "memory", 4) == "golden_alexnet_memory_k4.json"
