import json
from fractions import Fraction

import pytest

from lssim.engine import Ensemble, SimConfig, SimResult
from lssim.errors import ConfigError, ContractError
from lssim.isa import parse_program, profile_program
from lssim.metrics import (HIST_HEADER, STACK_HEADER, TRADEOFF_HEADER, TradeoffEntry, cbpi, cbpi_stack, hist_csv,
                           path_length_histogram, stack_csv, stack_from_ensembles, suggest_distance_reduction,
                           summary_json, tradeoff_csv, tradeoff_table)
from lssim.plane import Plane, Role, build_floor_plan


def result(beats, instrs=100, lps=()):
    return SimResult(beats, instrs, {"path": 0, "magic": 0, "decoding": 0}, list(lps), 0.0, 0)


def ens(*beats):
    return Ensemble(sum(beats) / len(beats), 0.0, [result(b) for b in beats])


def test_cbpi_definition():
    assert cbpi(result(300, 100)) == 3.0
    with pytest.raises(ContractError):
        cbpi(result(0, 0))


def test_stack_parts_sum_exactly():
    st = stack_from_ensembles([ens(100, 101), ens(130, 133), ens(150, 151), ens(190, 197)])
    assert st.base + st.magic + st.path + st.decoding == st.total
    assert st.total == Fraction(387, 200)
    assert not st.clamped


def test_negative_component_is_clamped_with_warning(caplog):
    st = stack_from_ensembles([ens(100), ens(120), ens(110), ens(130)])
    assert st.path == 0 and st.clamped == ("path",)
    assert "clamped" in caplog.text


@pytest.fixture(scope="module")
def small_case():
    plane = build_floor_plan("1L-D", "Dense50", 16, 2, 3)
    prog = profile_program("FH-200", seed=0, scale=0.005, n_logical=16)
    return plane, prog


def test_stack_ablation_identity(small_case):
    plane, prog = small_case
    cfg = SimConfig(n_assignments=3, seed=1)
    assert cbpi_stack(plane, prog, cfg.ablated(infinite_magic=True)).magic == 0
    assert cbpi_stack(plane, prog, cfg.ablated(ignore_path_conflicts=True)).path == 0
    assert cbpi_stack(plane, prog, cfg.ablated(instant_decoding=True)).decoding == 0
    st = cbpi_stack(plane, prog, SimConfig(n_assignments=3, seed=1, infinite_magic=True,
                                             ignore_path_conflicts=True, instant_decoding=True))
    assert st.magic == st.path == st.decoding == 0


def test_histogram_adjacent_pairs_only():
    d = 3
    plane = Plane.from_grid([[Role.DATA, Role.DATA]], d)
    from lssim.engine import run
    prog = parse_program(".qubits 2\n" + "MEAS_ZZ q0 q1\n" * 5)
    res = run(plane, prog, SimConfig(), 0)
    hist = path_length_histogram(res)
    assert res.per_op_effective_lengths == [pytest.approx(2 + 1 / d)] * 5
    assert hist.rows() == [(2, 5)]
    assert hist.n_ops == 5


def test_histogram_accepts_values_and_results():
    h = path_length_histogram([2.2, 3.0, 3.9999999999, 5.5])
    assert h.rows() == [(2, 1), (3, 1), (4, 1), (5, 1)]
    h2 = path_length_histogram([result(1, 1, [2.5, 2.7]), result(1, 1, [4.0])])
    assert h2.rows() == [(2, 2), (3, 0), (4, 1)]
    assert h2.total_lprime == pytest.approx(9.2)


@pytest.mark.parametrize("ratio,expected", [(0.30, 2), (1.0, 0), (0.09, 4), (1.7, 0), (1e-30, 22)])
def test_distance_suggestion(ratio, expected):
    assert suggest_distance_reduction(ratio, 0.003, 0.01, 25).delta_d == expected


def test_distance_suggestion_monotone():
    deltas = [suggest_distance_reduction(r, 0.001, 0.01, 25).delta_d for r in (0.9, 0.5, 0.1, 0.05, 0.001)]
    assert deltas == sorted(deltas)
    assert suggest_distance_reduction(0.30, 0.003).new_d == 23


@pytest.mark.parametrize("kwargs", [dict(p=0.02), dict(total_Lprime_ratio=0), dict(d=4)])
def test_distance_suggestion_bad_input(kwargs):
    args = dict(total_Lprime_ratio=0.3, p=0.003, p_th=0.01, d=25) | kwargs
    with pytest.raises(ConfigError):
        suggest_distance_reduction(**args)


def test_tradeoff_table_base_first_and_ratios():
    rows = tradeoff_table([TradeoffEntry("prop", "Bypass", "Dense50-wide", 23, 83, 1.0),
                           TradeoffEntry("base", "1L-D", "Dense44", 25, 100, 1.73)], "base")
    assert [r.label for r in rows] == ["base", "prop"]
    assert rows[0].speedup == 1.0 and rows[0].qubit_delta == 0.0 and rows[0].is_base
    assert rows[1].speedup == pytest.approx(1.73)
    assert rows[1].qubit_delta == pytest.approx(-0.17)
    with pytest.raises(ConfigError):
        tradeoff_table(rows, "missing")


def test_emitters_have_stable_headers():
    st = stack_from_ensembles([ens(10), ens(10), ens(12), ens(15)])
    assert stack_csv([("x", st)]).splitlines() == [",".join(STACK_HEADER), "x,0.100000,0.000000,0.020000,0.030000,0.150000"]
    assert hist_csv(path_length_histogram([2.1])).splitlines() == [",".join(HIST_HEADER), "2,1"]
    rows = tradeoff_table([TradeoffEntry("b", "1L-D", "Dense44", 25, 10, 2.0)], "b")
    assert tradeoff_csv(rows).splitlines()[0] == ",".join(TRADEOFF_HEADER)
    doc = json.loads(summary_json(stacks=[("x", st)], hist=path_length_histogram([2.1]), tradeoff=rows))
    assert doc["stacks"][0]["total"] == pytest.approx(0.15)
    assert doc["histogram"]["bins"] == [[2, 1]]
    assert doc["tradeoff"][0]["label"] == "b"
