"""Property-based checks over random programs, grids and occupancies."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from lssim.engine import SimConfig, run
from lssim.isa import MAGIC, Instruction, Opcode, Program, dependency_dag, emit_program, parse_program
from lssim.plane import Plane, Role, check_io_capable
from lssim.route import Blocked, find_path, occupancy_vector

ONE_Q = [Opcode.INIT_Z, Opcode.INIT_X, Opcode.OP_H, Opcode.OP_S, Opcode.MEAS_Z, Opcode.MEAS_X]


@st.composite
def programs(draw, max_qubits=4, max_len=25):
    n = draw(st.integers(2, max_qubits))
    instrs, regs = [], 0
    for _ in range(draw(st.integers(0, max_len))):
        kind = draw(st.sampled_from(["1q", "2q", "magic"]))
        if kind == "1q":
            op = draw(st.sampled_from(ONE_Q))
            q = draw(st.integers(0, n - 1))
            dest = None
            if op.is_measurement:
                dest, regs = regs, regs + 1
            cond = draw(st.sampled_from([None] + list(range(regs if dest is None else dest))))
            instrs.append(Instruction(op, (q,), dest, cond))
        elif kind == "2q":
            a, b = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
            op = draw(st.sampled_from([Opcode.MEAS_ZZ, Opcode.MEAS_XX]))
            instrs.append(Instruction(op, (a, b), regs))
            regs += 1
        else:
            q = draw(st.integers(0, n - 1))
            instrs.append(Instruction(Opcode.MEAS_ZZ, (q, MAGIC), regs))
            instrs.append(Instruction(Opcode.OP_S, (q,), None, regs))
            regs += 1
    return Program(tuple(instrs), n)


@settings(max_examples=150, deadline=None)
@given(programs())
def test_emit_parse_round_trip(prog):
    assert parse_program(emit_program(prog)) == prog


@settings(max_examples=150, deadline=None)
@given(programs())
def test_dag_edges_point_forward(prog):
    dag = dependency_dag(prog)
    assert all(u < v for u, v in dag.edges())
    assert dag.depth <= len(prog)


GRID_PLANE = Plane.from_grid(np.array([
    [1, 1, 1, 1, 1, 1],
    [1, 2, 1, 2, 2, 1],
    [1, 1, 1, 1, 1, 1],
    [1, 2, 2, 1, 2, 1],
    [1, 1, 1, 1, 1, 1],
]), 3)


@settings(max_examples=60, deadline=None)
@given(programs(max_qubits=6, max_len=20), st.integers(0, 2 ** 32 - 1))
def test_simulation_invariants(prog, seed):
    from lssim.plane import build_floor_plan
    plane = build_floor_plan("Bypass", "Dense50", 6, 2, 3)
    stages = [SimConfig(infinite_magic=True, ignore_path_conflicts=True, instant_decoding=True),
              SimConfig(ignore_path_conflicts=True, instant_decoding=True),
              SimConfig(instant_decoding=True), SimConfig()]
    results = [run(plane, prog, c, seed) for c in stages]
    beats = [r.total_beats for r in results]
    assert beats == sorted(beats)
    full = results[-1]
    assert full.instructions_executed == len(prog)
    assert all(v >= 0 for v in full.stall_beats_by_hazard.values())
    assert all(c <= p for c, p in zip(full.magic_consumed, full.magic_produced))
    assert results[0].total_beats == dependency_dag(prog).depth_beats


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 5), st.integers(0, 5), st.integers(0, 5), st.integers(0, 5),
       st.sets(st.tuples(st.integers(0, 4), st.integers(0, 5)), max_size=8), st.booleans())
def test_occupancy_monotone(a, b, c, e, busy, zz):
    data = GRID_PLANE.data_cells
    i, j = a % len(data), (a + 1 + b % (len(data) - 1)) % len(data)
    op = Instruction(Opcode.MEAS_ZZ if zz else Opcode.MEAS_XX, (0, 1))
    free = find_path(GRID_PLANE, None, op, [data[i], data[j]])
    busy = [(0, r, cc) for r, cc in busy if GRID_PLANE.logic[0, r, cc] == Role.ANCILLA]
    p = find_path(GRID_PLANE, occupancy_vector(GRID_PLANE, busy), op, [data[i], data[j]])
    if isinstance(p, Blocked):
        return
    assert p.data_qubits >= free.data_qubits
    assert not set(p.cells) & set(busy)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.data())
def test_io_check_matches_plain_enumeration(rows, cols, data):
    bits = data.draw(st.lists(st.booleans(), min_size=rows * cols, max_size=rows * cols))
    grid = [[Role.DATA if bits[r * cols + c] else Role.ANCILLA for c in range(cols)] for r in range(rows)]
    assert check_io_capable(np.array(grid)).capable == oracles.io_capable(grid)
