import numpy as np
import pytest

import oracles
from lssim.errors import ContractError
from lssim.isa import MAGIC, Instruction, Opcode
from lssim.plane import Plane, Role, build_floor_plan
from lssim.route import (Blocked, Path, avg_pairwise_effective_length, data_qubit_count, effective_length,
                         endpoint_lprime_matrices, find_path, occupancy_vector, router_for, static_path_lengths)

A, D = Role.ANCILLA, Role.DATA
ZZ = Instruction(Opcode.MEAS_ZZ, (0, 1))
XX = Instruction(Opcode.MEAS_XX, (0, 1))

# an XX merge between (0,2) and (2,2) takes the only free cell between the two ZZ operands
CORRIDOR = [[A, A, D, A, A],
            [D, A, A, A, D],
            [A, A, D, A, A]]


@pytest.mark.parametrize("L,d,bypass,expected", [(3, 5, False, 85), (3, 5, True, 65), (2, 7, False, 7 * 15)])
def test_data_qubit_count_examples(L, d, bypass, expected):
    assert data_qubit_count(L, d, bypass) == expected


def test_data_qubit_count_rejects_short_path():
    with pytest.raises(ContractError):
        data_qubit_count(1, 3)


def test_effective_length_examples():
    d = 5
    assert data_qubit_count(10, d) / d ** 2 == pytest.approx(11.8)
    assert data_qubit_count(10, d, True) / d ** 2 == pytest.approx(5.4)


def test_one_ancilla_between_operands():
    plane = Plane.from_grid([[D, A, D]], 5)
    p = find_path(plane, None, ZZ, [(0, 0, 0), (0, 0, 2)])
    assert isinstance(p, Path)
    assert p.cells == ((0, 0, 0), (0, 0, 1), (0, 0, 2))
    assert p.L == 3 and not p.via_bypass
    assert p.data_qubits == data_qubit_count(3, 5)
    assert effective_length(p).L_prime == pytest.approx(p.L_prime)


def test_effective_length_recosts_geometry():
    plane = Plane.from_grid([[D, A, A, D]], 3)
    p = find_path(plane, None, ZZ, [(0, 0, 0), (0, 0, 3)])
    assert effective_length(p, 7).data_qubits == data_qubit_count(4, 7)


def test_corridor_blocked_on_one_layer():
    plane = Plane.from_grid(CORRIDOR, 5)
    xx = find_path(plane, None, XX, [(0, 0, 2), (0, 2, 2)])
    occ = occupancy_vector(plane, xx.cells)
    res = find_path(plane, occ, ZZ, [(0, 1, 0), (0, 1, 4)])
    assert isinstance(res, Blocked)
    assert (0, 1, 2) in res.blockers or (0, 1, 1) in res.blockers


def test_corridor_routed_through_bypass():
    plane = Plane.from_grid(CORRIDOR, 5, "Bypass")
    xx = find_path(plane, None, XX, [(0, 0, 2), (0, 2, 2)])
    assert not xx.via_bypass
    occ = occupancy_vector(plane, xx.cells)
    zz = find_path(plane, occ, ZZ, [(0, 1, 0), (0, 1, 4)])
    assert isinstance(zz, Path) and zz.via_bypass
    assert not set(zz.cells) & set(xx.cells)
    assert zz.data_qubits == data_qubit_count(5, 5, via_bypass=True)


def test_bypass_beats_logic_path_for_long_rows():
    d = 5
    row = [[D] + [A] * 8 + [D]]
    p1 = find_path(Plane.from_grid(row, d), None, ZZ, [(0, 0, 0), (0, 0, 9)])
    p2 = find_path(Plane.from_grid(row, d, "Bypass"), None, ZZ, [(0, 0, 0), (0, 0, 9)])
    assert p1.data_qubits == data_qubit_count(10, d)
    assert p2.data_qubits == data_qubit_count(10, d, True)
    assert p2.L == 10


def test_xx_never_enters_bypass_at_endpoints():
    plane = Plane.from_grid([[A, A, A], [D, A, D], [A, A, A]], 3, "Bypass")
    p = find_path(plane, None, XX, [(0, 1, 0), (0, 1, 2)])
    assert p.cells[1][0] == 0 and p.cells[-2][0] == 0
    assert p.cells[1][1] != 1 and p.cells[-2][1] != 1


def test_zz_attaches_left_right_and_xx_top_bottom():
    plane = Plane.from_grid([[A, D, A], [A, A, A], [A, D, A]], 3)
    zz = find_path(plane, None, ZZ, [(0, 0, 1), (0, 2, 1)])
    xx = find_path(plane, None, XX, [(0, 0, 1), (0, 2, 1)])
    assert xx.cells == ((0, 0, 1), (0, 1, 1), (0, 2, 1))
    assert zz.cells[1] in ((0, 0, 0), (0, 0, 2))
    assert zz.L == 5


def test_paths_avoid_data_and_busy_cells():
    plane = build_floor_plan("1L-D", "Dense50", 30, 3, 3)
    data = plane.data_cells
    rng = np.random.default_rng(1)
    for _ in range(30):
        i, j = rng.choice(len(data), 2, replace=False)
        busy = [tuple(c) for c in np.argwhere(plane.logic == Role.ANCILLA)[rng.random(
            (plane.logic == Role.ANCILLA).sum()) < 0.15]]
        p = find_path(plane, occupancy_vector(plane, busy), ZZ, [data[i], data[j]])
        if isinstance(p, Path):
            inner = p.cells[1:-1]
            assert not set(inner) & set(busy)
            assert all(plane.logic[c] == Role.ANCILLA for c in inner)


def test_adding_occupancy_never_shortens():
    plane = build_floor_plan("Bypass", "Dense50", 40, 4, 3)
    data = plane.data_cells
    rng = np.random.default_rng(5)
    for _ in range(40):
        i, j = rng.choice(len(data), 2, replace=False)
        free = find_path(plane, None, ZZ, [data[i], data[j]])
        anc = [tuple(c) for c in np.argwhere(plane.logic == Role.ANCILLA)]
        busy = [anc[k] for k in rng.choice(len(anc), 5, replace=False)]
        p = find_path(plane, occupancy_vector(plane, busy), ZZ, [data[i], data[j]])
        assert isinstance(p, Blocked) or p.data_qubits >= free.data_qubits


def test_single_cell_ops_prefer_right_left_up_down():
    plane = Plane.from_grid([[A, A, A], [A, D, A], [A, A, A]], 3)
    h = Instruction(Opcode.OP_H, (0,))
    src = [(0, 1, 1)]
    order = [(0, 1, 2), (0, 1, 0), (0, 0, 1), (0, 2, 1)]
    busy = []
    for want in order:
        p = find_path(plane, occupancy_vector(plane, busy), h, src)
        assert p.cells == ((0, 1, 1), want)
        busy.append(want)
    res = find_path(plane, occupancy_vector(plane, busy), h, src)
    assert isinstance(res, Blocked) and res.blockers == frozenset(order)


def test_single_cell_measure_uses_only_its_cell():
    plane = Plane.from_grid([[D]], 3)
    p = find_path(plane, None, Instruction(Opcode.MEAS_Z, (0,)), [(0, 0, 0)])
    assert p.cells == ((0, 0, 0),) and p.L == 1


def test_magic_routes_to_nearest_pool():
    plane = build_floor_plan("1L-D", "Sparse25", 4, 2, 3)
    src = plane.data_cells[0]
    tel = Instruction(Opcode.MEAS_ZZ, (0, MAGIC))
    p = find_path(plane, None, tel, [src, plane.pools])
    assert p.target in plane.pools
    costs = [find_path(plane, None, tel, [src, pool]).data_qubits for pool in plane.pools]
    assert p.data_qubits == min(costs)


def test_contract_errors():
    plane = Plane.from_grid([[D, A, D]], 3)
    with pytest.raises(ContractError):
        find_path(plane, None, ZZ, [(0, 0, 1), (0, 0, 2)])
    with pytest.raises(ContractError):
        find_path(plane, None, ZZ, [(0, 0, 0), (0, 0, 9)])
    with pytest.raises(ContractError):
        find_path(plane, None, ZZ, [(0, 0, 0), (0, 0, 0)])
    with pytest.raises(ContractError):
        find_path(plane, None, Instruction(Opcode.MEAS_ZZ, (0, MAGIC)), [(0, 0, 0), (0, 0, 2)])


def test_two_layer_data_merge_through_layers():
    plane = Plane.from_grid([[D, A], [A, A]], 3, "2L-DD")
    p = find_path(plane, None, ZZ, [(0, 0, 0), (1, 0, 0)])
    assert p.cells == ((0, 0, 0), (1, 0, 0))
    assert p.data_qubits == data_qubit_count(2, 3)


def test_average_pairwise_two_neighbours():
    d = 5
    plane = Plane.from_grid([[A, A, A, A], [A, D, D, A], [A, A, A, A]], d)
    assert avg_pairwise_effective_length(plane) == pytest.approx(2 + 1 / d)


def test_sparse25_one_layer_vs_two_layer_dp_close():
    a = avg_pairwise_effective_length(build_floor_plan("1L-D", "Sparse25", 100, 12, 25))
    b = avg_pairwise_effective_length(build_floor_plan("2L-DP", "Sparse25", 100, 12, 25))
    assert abs(a - b) / a < 0.1


def test_endpoint_matrix_agrees_with_find_path():
    plane = build_floor_plan("Bypass", "Dense50", 20, 3, 5)
    dd, dp = endpoint_lprime_matrices(plane, "ZZ")
    data = plane.data_cells
    for i in range(0, len(data), 3):
        for j in range(len(data)):
            if i != j:
                p = find_path(plane, None, ZZ, [data[i], data[j]])
                assert dd[i, j] == pytest.approx(p.L_prime)
        for k, pool in enumerate(plane.pools):
            p = find_path(plane, None, Instruction(Opcode.MEAS_ZZ, (0, MAGIC)), [data[i], pool])
            assert dp[i, k] == pytest.approx(p.L_prime)


def test_static_path_lengths_follow_assignment():
    from lssim.isa import parse_program
    plane = Plane.from_grid([[D, A, A, D]], 3)
    prog = parse_program(".qubits 2\nMEAS_ZZ q0 q1 -> c0\nMEAS_Z q0 -> c1\n")
    assert static_path_lengths(plane, prog, [0, 1]) == [pytest.approx(data_qubit_count(4, 3) / 9)]


def test_router_is_cached_per_plane():
    plane = Plane.from_grid([[D, A, D]], 3)
    assert router_for(plane) is router_for(plane)


def test_path_geometry_matches_enumerator():
    plane = build_floor_plan("Bypass", "Dense50", 30, 2, 3)
    data = plane.data_cells
    for i in range(len(data)):
        for j in range(i + 1, len(data), 4):
            p = find_path(plane, None, ZZ, [data[i], data[j]])
            assert len(oracles.path_qubits(p.cells, 3, plane.n_logic)) == p.data_qubits
