import math

from hypothesis import given, settings, strategies as st

from qrepeater import analytic
from qrepeater.model import SchemeParams
from qrepeater.workbench import ResultTable, tables_equal

unit = st.floats(0.0, 1.0, allow_nan=False)
open_unit = st.floats(1e-6, 1.0, allow_nan=False, exclude_min=False)
r_values = st.floats(0.0, 20.0, allow_nan=False)


@given(unit, unit, unit)
def test_swap_outputs_in_unit_interval(a1, a2, eta_d):
    if a1 == 0.0 and a2 == 0.0:
        return
    single = analytic.swap_single_photon(a1, a2, eta_d)
    double = analytic.swap_two_photon(a1, a2, eta_d)
    for x in (single.alpha, single.p_s, double.alpha, double.p_s):
        assert 0.0 <= x <= 1.0


@given(open_unit)
def test_expectation_identity(p0):
    e = analytic.attempt_expectations(p0)
    assert math.isclose(e.exp_n_max, e.exp_n_min + e.exp_n_dif, rel_tol=1e-12)
    assert e.exp_n_min <= e.exp_n_max


@given(open_unit, r_values, st.sampled_from([1, 2]))
def test_decay_factor_is_a_probability(p0, r, m):
    d = analytic.expected_decay_factor(p0, r, m)
    assert analytic.ndif_pmf(0, p0) - 1e-12 <= d <= 1.0 + 1e-12


@settings(max_examples=60, deadline=None)
@given(scheme=st.sampled_from(["2+2", "2~+1", "2~+2"]), distance=st.floats(1e3, 300e3),
       eta_m=st.floats(0.01, 1.0), tau=st.floats(1e-5, 100.0))
def test_rate_bounds_ordered(scheme, distance, eta_m, tau):
    params = SchemeParams(scheme, distance, 0.5, 0.95, eta_m, tau)
    res = analytic.rate(params)
    if res.below_threshold:
        assert res.rate_hz == 0.0
        return
    assert res.edt_lower_s <= res.edt_mid_s <= res.edt_upper_s
    assert res.rate_hz > 0.0


cell = st.one_of(st.none(), st.booleans(), st.integers(-10**12, 10**12), st.floats(allow_nan=True),
                 st.sampled_from(["1+1", "2~+2", "a,b", "say \"hi\"", "beta≈1"]))


@settings(max_examples=60)
@given(st.lists(st.fixed_dictionaries({"a": cell, "b": cell, "c": cell}), min_size=1, max_size=5),
       st.sampled_from(["csv", "json"]))
def test_table_round_trip_property(rows, fmt):
    table = ResultTable.from_records(rows, ["a", "b", "c"])
    text = table.dumps(fmt)
    back = ResultTable.from_csv(text) if fmt == "csv" else ResultTable.from_json(text)
    assert tables_equal(table, back)
