"""Lattice-surgery instruction set, programs, dependency DAGs and synthetic benchmarks."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import ConfigError, TraceSyntaxError, ValidationError

MAGIC = -1  # operand sentinel: "any pool holding a ready magic state"


class Opcode(Enum):
    INIT_Z = "INIT_Z"
    INIT_X = "INIT_X"
    OP_H = "OP_H"
    OP_S = "OP_S"
    MEAS_Z = "MEAS_Z"
    MEAS_X = "MEAS_X"
    MEAS_ZZ = "MEAS_ZZ"
    MEAS_XX = "MEAS_XX"

    @property
    def arity(self) -> int:
        return 2 if self in (Opcode.MEAS_ZZ, Opcode.MEAS_XX) else 1

    @property
    def duration(self) -> int:
        """Occupancy in code beats; one-cycle instructions take a full beat."""
        return {Opcode.OP_H: 3, Opcode.OP_S: 2}.get(self, 1)

    @property
    def is_measurement(self) -> bool:
        return self.value.startswith("MEAS")

    @property
    def basis(self) -> str | None:
        return {Opcode.MEAS_ZZ: "ZZ", Opcode.MEAS_XX: "XX"}.get(self)


@dataclass(frozen=True)
class Instruction:
    opcode: Opcode
    operands: tuple[int, ...]
    dest: int | None = None
    cond: int | None = None
    line: int | None = field(default=None, compare=False)

    @property
    def uses_magic(self) -> bool:
        return MAGIC in self.operands

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q in self.operands if q != MAGIC)

    @property
    def is_two_qubit(self) -> bool:
        return self.opcode.arity == 2 and not self.uses_magic

    def to_text(self) -> str:
        ops = " ".join("MAGIC" if q == MAGIC else f"q{q}" for q in self.operands)
        s = f"{self.opcode.value} {ops}"
        if self.dest is not None:
            s += f" -> c{self.dest}"
        if self.cond is not None:
            s += f" if c{self.cond}"
        return s


def _where(ins: Instruction, idx: int) -> str:
    return f"line {ins.line}" if ins.line is not None else f"instruction {idx}"


@dataclass(frozen=True, eq=True)
class Program:
    instructions: tuple[Instruction, ...]
    n_logical_qubits: int
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        self.validate()

    def __len__(self) -> int:
        return len(self.instructions)

    def validate(self) -> None:
        if self.n_logical_qubits < 0:
            raise ValidationError("n_logical_qubits must be >= 0")
        written: set[int] = set()
        for i, ins in enumerate(self.instructions):
            where = _where(ins, i)
            if len(ins.operands) != ins.opcode.arity:
                raise ValidationError(f"{where}: {ins.opcode.value} takes {ins.opcode.arity} operand(s)")
            for k, q in enumerate(ins.operands):
                if q == MAGIC:
                    if ins.opcode.arity != 2 or k != 1:
                        raise ValidationError(f"{where}: MAGIC is only allowed as the second operand "
                                              "of MEAS_ZZ/MEAS_XX")
                elif not 0 <= q < self.n_logical_qubits:
                    raise ValidationError(f"{where}: qubit q{q} out of range (program has "
                                          f"{self.n_logical_qubits} qubits)")
            if len(set(ins.operands)) != len(ins.operands):
                raise ValidationError(f"{where}: repeated operand")
            if ins.cond is not None and ins.cond not in written:
                raise ValidationError(f"{where}: register c{ins.cond} is read before any measurement writes it")
            if ins.dest is not None:
                if not ins.opcode.is_measurement:
                    raise ValidationError(f"{where}: only measurements write registers")
                if ins.dest in written:
                    raise ValidationError(f"{where}: register c{ins.dest} written twice")
                written.add(ins.dest)

    @property
    def registers(self) -> frozenset[int]:
        return frozenset(ins.dest for ins in self.instructions if ins.dest is not None)

    @cached_property
    def writer_of(self) -> dict[int, int]:
        return {ins.dest: i for i, ins in enumerate(self.instructions) if ins.dest is not None}


# ---------------------------------------------------------------------------
# Trace format
# ---------------------------------------------------------------------------

_QUBIT = re.compile(r"q(\d+)$")
_REG = re.compile(r"c(\d+)$")


def parse_program(text: str) -> Program:
    """Parse the line-oriented trace format into a validated :class:`Program`."""
    n_qubits = None
    name = None
    instrs: list[Instruction] = []
    max_q = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", line)]
        if not toks:
            continue
        head, col = toks[0]
        if head.startswith("."):
            if head == ".qubits":
                if len(toks) != 2 or not toks[1][0].isdigit():
                    raise TraceSyntaxError(".qubits expects one nonnegative integer", lineno, col)
                n_qubits = int(toks[1][0])
            elif head == ".name":
                if len(toks) < 2:
                    raise TraceSyntaxError(".name expects a value", lineno, col)
                name = line[toks[1][1] - 1:].strip()
            else:
                raise TraceSyntaxError(f"unknown directive {head}", lineno, col)
            continue
        try:
            op = Opcode(head)
        except ValueError:
            raise TraceSyntaxError(f"unknown opcode {head!r}", lineno, col) from None
        pos = 1
        operands = []
        while pos < len(toks) and toks[pos][0] not in ("->", "if"):
            tok, tcol = toks[pos]
            if tok == "MAGIC":
                operands.append(MAGIC)
            else:
                m = _QUBIT.match(tok)
                if not m:
                    raise TraceSyntaxError(f"expected qubit operand, got {tok!r}", lineno, tcol)
                operands.append(int(m.group(1)))
                max_q = max(max_q, operands[-1])
            pos += 1
        dest = cond = None
        while pos < len(toks):
            kw, kcol = toks[pos]
            if pos + 1 >= len(toks):
                raise TraceSyntaxError(f"{kw!r} expects a register", lineno, kcol)
            reg, rcol = toks[pos + 1]
            m = _REG.match(reg)
            if not m:
                raise TraceSyntaxError(f"expected register, got {reg!r}", lineno, rcol)
            if kw == "->" and dest is None and cond is None:
                dest = int(m.group(1))
            elif kw == "if" and cond is None:
                cond = int(m.group(1))
            else:
                raise TraceSyntaxError(f"unexpected {kw!r}", lineno, kcol)
            pos += 2
        if len(operands) != op.arity:
            raise TraceSyntaxError(f"{op.value} takes {op.arity} operand(s), got {len(operands)}", lineno, col)
        instrs.append(Instruction(op, tuple(operands), dest, cond, line=lineno))
    if n_qubits is None:
        n_qubits = max_q + 1
    return Program(tuple(instrs), n_qubits, name)


def emit_program(p: Program) -> str:
    lines = []
    if p.name is not None:
        lines.append(f".name {p.name}")
    lines.append(f".qubits {p.n_logical_qubits}")
    lines.extend(ins.to_text() for ins in p.instructions)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Dependencies and statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DependencyDag:
    preds: tuple[tuple[int, ...], ...]
    succs: tuple[tuple[int, ...], ...]
    depth: int  # longest chain, in instructions
    depth_beats: int  # longest chain weighted by durations

    @property
    def n_nodes(self) -> int:
        return len(self.preds)

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for v, ps in enumerate(self.preds) for u in ps]

    def topological_order(self) -> list[int]:
        # program order is a topological order since every edge points forward
        return list(range(self.n_nodes))


def dependency_dag(p: Program) -> DependencyDag:
    n = len(p.instructions)
    preds: list[tuple[int, ...]] = []
    last: dict[int, int] = {}
    writer = p.writer_of
    for i, ins in enumerate(p.instructions):
        ps = {last[q] for q in ins.qubits if q in last}
        if ins.cond is not None:
            ps.add(writer[ins.cond])
        preds.append(tuple(sorted(ps)))
        for q in ins.qubits:
            last[q] = i
    succs: list[list[int]] = [[] for _ in range(n)]
    for v, ps in enumerate(preds):
        for u in ps:
            succs[u].append(v)
    depth = [0] * n
    beats = [0] * n
    for i, ins in enumerate(p.instructions):
        depth[i] = 1 + max((depth[u] for u in preds[i]), default=0)
        beats[i] = ins.opcode.duration + max((beats[u] for u in preds[i]), default=0)
    return DependencyDag(tuple(preds), tuple(tuple(s) for s in succs),
                         max(depth, default=0), max(beats, default=0))


@dataclass(frozen=True)
class ProgramStats:
    total_ops: int
    one_qubit_ops: int
    two_qubit_ops: int
    magic_ops: int  # subset of one_qubit_ops: teleport blocks


def program_stats(p: Program) -> ProgramStats:
    """Classify instructions into one-qubit, two-qubit and magic operations.

    A magic teleport (MEAS with MAGIC plus the OP_S conditioned on its result)
    counts as a single one-qubit operation that is also a magic operation, so
    ``total = one_qubit + two_qubit``.
    """
    magic_regs = {ins.dest for ins in p.instructions if ins.uses_magic and ins.dest is not None}
    one = two = magic = 0
    for ins in p.instructions:
        if ins.uses_magic:
            one += 1
            magic += 1
        elif ins.is_two_qubit:
            two += 1
        elif ins.opcode is Opcode.OP_S and ins.cond in magic_regs:
            continue
        else:
            one += 1
    return ProgramStats(one + two, one, two, magic)


# ---------------------------------------------------------------------------
# Synthetic SELECT-like benchmarks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkProfile:
    name: str
    n_data_cells: int
    total_ops: int
    one_qubit_ops: int
    two_qubit_ops: int
    magic_ops: int

    @property
    def mix(self) -> dict[str, float]:
        return {
            "clifford": (self.one_qubit_ops - self.magic_ops) / self.total_ops,
            "two_qubit": self.two_qubit_ops / self.total_ops,
            "magic": self.magic_ops / self.total_ops,
        }


PROFILES = {
    p.name: p for p in [
        BenchmarkProfile("FH-32", 268, 6428, 3460, 2968, 928),
        BenchmarkProfile("FH-72", 340, 14810, 8348, 6462, 1760),
        BenchmarkProfile("FH-128", 428, 29000, 16772, 12228, 3040),
        BenchmarkProfile("FH-200", 532, 50198, 29500, 20698, 4768),
        BenchmarkProfile("Jellium-4", 316, 25448, 14516, 10932, 2848),
        BenchmarkProfile("H4-8", 244, 6088, 3236, 2852, 928),
        BenchmarkProfile("H4-18", 382, 105314, 61790, 43524, 10016),
    ]
}

MIX_KEYS = ("clifford", "two_qubit", "magic")


def _check_mix(mix: dict[str, float]) -> dict[str, float]:
    if set(mix) != set(MIX_KEYS):
        raise ConfigError(f"mix must have exactly the keys {MIX_KEYS}", field="mix")
    if any(not math.isfinite(v) or v < 0 for v in mix.values()):
        raise ConfigError("mix ratios must be finite and nonnegative", field="mix")
    if abs(sum(mix.values()) - 1.0) > 1e-9:
        raise ConfigError(f"mix ratios must sum to 1, got {sum(mix.values())}", field="mix")
    return dict(mix)


def _spread(total: int, n: int) -> list[int]:
    return [(total * (b + 1)) // n - (total * b) // n for b in range(n)]


def generate_select_like(n_logical: int, n_magic_ops: int, mix: dict[str, float] | str, seed: int,
                         n_ops: int | None = None, name: str | None = None) -> Program:
    """Deterministic synthetic program shaped like a multi-controlled SELECT sweep.

    Qubits are split into independent threads. Each thread executes a chain
    of Toffoli-like blocks on a few of its qubits: one magic teleport plus a
    share of Clifford and two-qubit operations. Blocks of different threads
    are interleaved round-robin. ``n_ops`` defaults to ``n_magic_ops /
    mix["magic"]``; category counts match the mix to within one operation.
    """
    if isinstance(mix, str):
        if mix not in PROFILES:
            raise ConfigError(f"unknown profile {mix!r}", field="mix")
        name = name or mix
        mix = PROFILES[mix].mix
    mix = _check_mix(mix)
    if n_logical < 2:
        raise ConfigError("n_logical must be >= 2", field="n_logical")
    if n_magic_ops < 0:
        raise ConfigError("n_magic_ops must be >= 0", field="n_magic_ops")
    if n_ops is None:
        if mix["magic"] > 0:
            n_ops = round(n_magic_ops / mix["magic"])
        elif n_magic_ops > 0:
            raise ConfigError("magic ops requested with a zero magic ratio", field="mix")
        else:
            n_ops = 8 * n_logical
    if n_ops < n_magic_ops or abs(n_magic_ops - n_ops * mix["magic"]) > 1 + 1e-9:
        raise ConfigError(f"magic ratio {mix['magic']:.4f} is infeasible for {n_magic_ops} magic ops "
                          f"in {n_ops} ops", field="mix")
    n_two = min(round(n_ops * mix["two_qubit"]), n_ops - n_magic_ops)
    n_cliff = n_ops - n_two - n_magic_ops

    rng = np.random.default_rng(seed)
    n_threads = min(16, max(1, n_logical // 16))
    thread_qubits = np.array_split(rng.permutation(n_logical), n_threads)

    n_blocks = n_magic_ops if n_magic_ops > 0 else max(1, math.ceil((n_cliff + n_two) / 8))
    # initialization counts against the Clifford budget when it fits
    init_budget = min(n_logical, n_cliff)
    cliff_q = _spread(n_cliff - init_budget, n_blocks)
    two_q = _spread(n_two, n_blocks)

    instrs: list[Instruction] = []
    reg = 0

    def meas(op: Opcode, operands: tuple[int, ...]) -> Instruction:
        nonlocal reg
        reg += 1
        return Instruction(op, operands, dest=reg - 1)

    for q in range(init_budget):
        instrs.append(Instruction(Opcode.INIT_Z if rng.random() < 0.5 else Opcode.INIT_X, (q,)))

    thread_blocks: list[list[list[Instruction]]] = [[] for _ in range(n_threads)]
    for b in range(n_blocks):
        t = b % n_threads
        qs = thread_qubits[t]
        block_q = [int(x) for x in rng.choice(qs, size=min(3, len(qs)), replace=False)]
        target = block_q[-1]
        nc = cliff_q[b]
        nt = two_q[b]
        ops: list[Instruction] = []

        def clifford():
            q = block_q[int(rng.integers(len(block_q)))]
            ops.append(Instruction(Opcode.OP_H if rng.random() < 0.5 else Opcode.OP_S, (q,)))

        def two_qubit():
            a, c = (int(x) for x in rng.choice(block_q, size=2, replace=False))
            ops.append(meas(Opcode.MEAS_ZZ if rng.random() < 0.5 else Opcode.MEAS_XX, (a, c)))

        for _ in range(nc // 2):
            clifford()
        for _ in range(nt // 2):
            two_qubit()
        if n_magic_ops > 0:
            # T-gate teleport: Z-parity with the magic state, S correction on its outcome
            tel = meas(Opcode.MEAS_ZZ, (target, MAGIC))
            ops.append(tel)
            ops.append(Instruction(Opcode.OP_S, (target,), cond=tel.dest))
        for _ in range(nt - nt // 2):
            two_qubit()
        for _ in range(nc - nc // 2):
            clifford()
        thread_blocks[t].append(ops)

    longest = max(len(bl) for bl in thread_blocks)
    for i in range(longest):
        for t in range(n_threads):
            if i < len(thread_blocks[t]):
                instrs.extend(thread_blocks[t][i])

    # registers were numbered at creation; renumber in emission order for readable traces
    remap: dict[int, int] = {}
    out = []
    for ins in instrs:
        dest = cond = None
        if ins.dest is not None:
            dest = remap.setdefault(ins.dest, len(remap))
        if ins.cond is not None:
            cond = remap[ins.cond]
        out.append(Instruction(ins.opcode, ins.operands, dest, cond))
    return Program(tuple(out), n_logical, name)


def profile_program(profile: str, seed: int = 0, scale: float = 1.0, n_logical: int | None = None) -> Program:
    """Program matching a named benchmark profile, optionally scaled down in op count."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}", field="profile")
    prof = PROFILES[profile]
    if not 0 < scale <= 1:
        raise ConfigError("scale must lie in (0, 1]", field="scale")
    n_magic = max(1, round(prof.magic_ops * scale))
    n_ops = max(n_magic, round(prof.total_ops * scale))
    return generate_select_like(n_logical or prof.n_data_cells, n_magic, prof.mix, seed,
                                n_ops=n_ops, name=f"{profile}@{scale:g}" if scale != 1 else profile)
