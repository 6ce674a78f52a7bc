import math

import numpy as np
import pytest

from qrepeater.model import (
    PRESETS,
    HardwarePreset,
    MemoryKind,
    MemoryModel,
    ParameterError,
    Scheme,
    SchemeParams,
    derive_link_geometry,
    load_preset,
    register_preset,
)


def params(**kw):
    base = dict(scheme="2+2", total_distance_m=100e3, eta_s=0.5, eta_d=0.95, eta_m=0.7, tau_m_s=1e-3)
    base.update(kw)
    return SchemeParams(**base)


@pytest.mark.parametrize("text, scheme", [
    ("1+1", Scheme.SPS_1BSM), ("2+2", Scheme.DPPS_2BSM), ("2~+1", Scheme.NDPPS_1BSM),
    ("2̃+2", Scheme.NDPPS_2BSM), ("~2+2", Scheme.NDPPS_2BSM), ("2t+1", Scheme.NDPPS_1BSM),
    (" 2 + 2 ", Scheme.DPPS_2BSM), ("NDPPS_2BSM", Scheme.NDPPS_2BSM),
])
def test_scheme_parse_spellings(text, scheme):
    assert Scheme.parse(text) is scheme


def test_scheme_parse_unknown_names_field():
    with pytest.raises(ParameterError) as err:
        Scheme.parse("3+3")
    assert err.value.field == "scheme"


def test_scheme_bsm_photons():
    assert [s.bsm_photons for s in Scheme] == [1, 2, 1, 2]
    assert Scheme.NDPPS_1BSM.label == "2̃+1"


def test_derived_geometry_100km():
    p = params()
    g = derive_link_geometry(p)
    assert g.l0_m == 50e3
    assert g.t0_s == pytest.approx(2.5e-4, rel=1e-15)
    # exp(-50/22) evaluated directly; it is 0.1030..., not 0.1031
    assert g.eta_t == math.exp(-50.0 / 22.0)
    assert g.eta_t == pytest.approx(0.103031, abs=1e-6)
    assert g.r == pytest.approx(2.5e-4 / 1e-3)


def test_perfect_memory_has_zero_decay_ratio():
    assert params(tau_m_s=math.inf).r == 0.0


def test_postselected_arrangement_keeps_link_length():
    p = params(scheme="1+1", gamma=0.2, num_links=4)
    assert p.postselected
    assert p.l0_m == 50e3


@pytest.mark.parametrize("field, value", [
    ("eta_s", 0.0), ("eta_d", 1.5), ("eta_m", -0.1), ("eta_m", float("nan")),
    ("tau_m_s", 0.0), ("total_distance_m", -1.0), ("total_distance_m", math.inf),
    ("num_links", 3), ("l_att_m", 0.0), ("c_fiber_m_per_s", 0.0),
])
def test_invalid_values_name_their_field(field, value):
    with pytest.raises(ParameterError) as err:
        params(**{field: value})
    assert err.value.field == field


@pytest.mark.parametrize("gamma", [None, 0.0, 1.0])
def test_sps_scheme_requires_gamma_in_open_interval(gamma):
    with pytest.raises(ParameterError) as err:
        params(scheme="1+1", gamma=gamma)
    assert err.value.field == "gamma"


def test_to_dict_from_dict_round_trip():
    p = params(scheme="1+1", gamma=0.2, tau_m_s=math.inf)
    d = p.to_dict()
    assert d["scheme"] == "1+1"
    assert SchemeParams.from_dict(d) == p


def test_from_dict_rejects_unknown_key():
    with pytest.raises(ParameterError) as err:
        SchemeParams.from_dict({**params().to_dict(), "colour": 1})
    assert err.value.field == "colour"


def test_presets_build_at_any_distance():
    assert sorted(PRESETS) == list("ABCDEF")
    for name in PRESETS:
        p = load_preset(name, 50e3)
        assert p.total_distance_m == 50e3
        assert p.eta_d == 0.95
    assert load_preset("a").scheme is Scheme.SPS_1BSM
    assert load_preset("C", eta_m=1.0).eta_m == 1.0


def test_preset_values():
    a, b, f = load_preset("A"), load_preset("B"), load_preset("F")
    assert (a.gamma, a.eta_s, a.eta_m, a.tau_m_s) == (0.2, 0.75, 0.70, 1e-3)
    assert (b.eta_s, b.eta_m, b.tau_m_s) == (0.15, 0.75, 0.220)
    assert f.scheme is Scheme.NDPPS_2BSM and f.eta_s == 0.03


def test_unknown_preset_lists_available():
    with pytest.raises(KeyError, match="available: A, B, C, D, E, F"):
        load_preset("Q")


def test_register_preset_validates():
    with pytest.raises(ParameterError):
        register_preset(HardwarePreset("BAD", Scheme.SPS_1BSM, "no gamma", {"eta_s": 0.5, "eta_d": 0.9, "eta_m": 0.5}))
    register_preset(HardwarePreset("G", Scheme.DPPS_2BSM, "test", {"eta_s": 0.5, "eta_d": 0.9, "eta_m": 0.5}))
    try:
        assert load_preset("G").scheme is Scheme.DPPS_2BSM
    finally:
        del PRESETS["G"]


def test_memory_models():
    exp = MemoryModel.exponential()
    assert exp.survival(0.5, 1.0) == pytest.approx(math.exp(-0.5))
    assert np.all(exp.survival([1.0, 1e9], math.inf) == 1.0)
    cut = MemoryModel.hard_cutoff(2.0)
    assert cut.kind is MemoryKind.CUTOFF
    assert list(cut.survival([0.0, 2.0, 2.0001], 1.0)) == [1.0, 1.0, 0.0]
    with pytest.raises(ParameterError):
        MemoryModel(MemoryKind.CUTOFF)
