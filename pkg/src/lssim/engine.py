"""Beat-stepped simulation of a lattice-surgery program on a qubit plane.

Each code beat runs five phases in order: factory production, decoder
service, greedy in-order issue of ready instructions, NOP decoding load for
idle data cells, and retirement of instructions whose last beat just ended.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
import os
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigError, SimulationError
from .isa import Opcode, Program, dependency_dag
from .plane import FACTORIES, Plane, count_physical_qubits
from .route import Blocked, router_for

HAZARDS = ("path", "magic", "decoding")
_EPS = 1e-9


@dataclass(frozen=True)
class SimConfig:
    n_F: int = 12
    factory_period: int = 15
    tp_dec: float = 0.45
    infinite_magic: bool = False
    ignore_path_conflicts: bool = False
    instant_decoding: bool = False
    n_assignments: int = 1000
    seed: int = 0
    pool_capacity: int = 2
    decoder_policy: str = "fifo"  # or "priority": measurement tasks before NOP tasks
    reliability: str = "fifo"  # or "per_task": a register waits only for its own task
    watchdog_beats: int | None = None  # default 10 * factory_period
    workers: int = 1

    def __post_init__(self):
        if not self.tp_dec > 0:
            raise ConfigError("must be > 0", field="tp_dec")
        if self.factory_period < 1:
            raise ConfigError("must be >= 1", field="factory_period")
        if self.n_F < 1:
            raise ConfigError("must be >= 1", field="n_F")
        if self.n_assignments < 1:
            raise ConfigError("must be >= 1", field="n_assignments")
        if self.pool_capacity < 1:
            raise ConfigError("must be >= 1", field="pool_capacity")
        if self.decoder_policy not in ("fifo", "priority"):
            raise ConfigError(f"unknown policy {self.decoder_policy!r}", field="decoder_policy")
        if self.reliability not in ("fifo", "per_task"):
            raise ConfigError(f"unknown rule {self.reliability!r}", field="reliability")
        if self.watchdog_beats is not None and self.watchdog_beats < 1:
            raise ConfigError("must be >= 1", field="watchdog_beats")

    @property
    def watchdog(self) -> int:
        return self.watchdog_beats or 10 * self.factory_period

    def ablated(self, **flags) -> SimConfig:
        return replace(self, **flags)


@dataclass
class SimResult:
    total_beats: int
    instructions_executed: int
    stall_beats_by_hazard: dict[str, int]
    per_op_effective_lengths: list[float]  # MEAS_ZZ/MEAS_XX in issue order
    decoder_peak_backlog: float
    assignment_seed: int
    magic_produced: list[int] = field(default_factory=list)
    magic_consumed: list[int] = field(default_factory=list)
    retire_beat: list[int] = field(default_factory=list)
    issue_beat: list[int] = field(default_factory=list)

    @property
    def cbpi(self) -> float:
        return self.total_beats / self.instructions_executed

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True) + "\n"


class _Decoder:
    """Fluid FIFO decoder: partial progress on the head task carries over beats."""

    def __init__(self, capacity: float, policy: str, reliability: str):
        self.capacity = capacity
        self.policy = policy
        self.reliability = reliability
        self.meas: deque[list] = deque()  # [seq, remaining, register]
        self.nops: deque[list] = deque()
        self.seq = 0
        self.backlog = 0.0
        self.peak = 0.0
        self.done_regs: list[tuple[int, int]] = []  # (seq, register) finished but maybe gated

    def push(self, difficulty: float, register: int | None):
        if difficulty <= 0 and register is None:
            return
        task = [self.seq, float(difficulty), register]
        self.seq += 1
        if self.policy == "priority" and register is None:
            self.nops.append(task)
        else:
            self.meas.append(task)
        self.backlog += difficulty
        self.peak = max(self.peak, self.backlog)

    def _earliest_open(self) -> int:
        # under the priority policy NOP tasks no longer gate measurement results
        heads = [q[0][0] for q in (self.meas, self.nops) if q and (q is self.meas or self.policy != "priority")]
        return min(heads) if heads else self.seq

    def serve(self) -> tuple[list[int], bool]:
        """Spend one beat of capacity; returns newly reliable registers and whether work was done."""
        budget = self.capacity
        worked = False
        for q in (self.meas, self.nops):
            while q and budget > _EPS:
                task = q[0]
                use = min(task[1], budget)
                task[1] -= use
                budget -= use
                self.backlog -= use
                worked = worked or use > 0
                if task[1] <= _EPS:
                    q.popleft()
                    if task[2] is not None:
                        self.done_regs.append((task[0], task[2]))
            # zero-difficulty register tasks complete without capacity
            while q and q[0][1] <= _EPS:
                task = q.popleft()
                if task[2] is not None:
                    self.done_regs.append((task[0], task[2]))
        if self.backlog < _EPS:
            self.backlog = 0.0
        if not self.done_regs:
            return [], worked
        if self.reliability == "per_task":
            regs = [r for _, r in self.done_regs]
            self.done_regs = []
            return regs, worked
        gate = self._earliest_open()
        ready = [r for s, r in self.done_regs if s < gate]
        self.done_regs = [(s, r) for s, r in self.done_regs if s >= gate]
        return ready, worked


def decoder_capacity(plane: Plane, tp_dec: float) -> float:
    res = count_physical_qubits(plane)
    weighted = sum((p.cells_weighted for name, p in res.parts.items() if name != FACTORIES))
    return float(tp_dec * weighted)


def run(plane: Plane, program: Program, cfg: SimConfig, assignment_seed: int = 0) -> SimResult:
    """Simulate ``program`` on ``plane`` with a random qubit-to-data-cell assignment."""
    router = router_for(plane)
    g = router.g
    data_nodes = [g.lid(*c) for c in plane.data_cells]
    n_q = program.n_logical_qubits
    if n_q > len(data_nodes):
        raise ConfigError(f"program needs {n_q} data cells, plane has {len(data_nodes)}", field="program")
    if not router.pool_nodes and any(ins.uses_magic for ins in program.instructions):
        raise ConfigError("program uses MAGIC but the plane has no pools", field="plane")
    rng = np.random.default_rng(assignment_seed)
    assign = rng.permutation(len(data_nodes))[:n_q]
    qnode = [data_nodes[i] for i in assign]

    instrs = program.instructions
    n = len(instrs)
    dag = dependency_dag(program)
    missing = [len(p) for p in dag.preds]
    ready: list[int] = [i for i in range(n) if missing[i] == 0]

    P = cfg.factory_period
    n_pools = len(router.pool_nodes)
    stock = [0] * n_pools
    next_prod = [i % P for i in range(n_pools)]
    produced = [0] * n_pools
    consumed = [0] * n_pools

    paths_on = not cfg.ignore_path_conflicts
    busy = np.zeros(g.n_nodes, dtype=bool)
    data_busy = 0
    n_data = len(data_nodes)

    decoder = None
    if not cfg.instant_decoding:
        decoder = _Decoder(decoder_capacity(plane, cfg.tp_dec), cfg.decoder_policy, cfg.reliability)
    reliable: set[int] = set()

    stalls = dict.fromkeys(HAZARDS, 0)
    lprimes: list[float] = []
    issue_beat = [-1] * n
    retire_beat = [-1] * n
    ending: dict[int, list[tuple[int, tuple[int, ...], int]]] = {}
    epoch = 0
    failed_at: dict[int, tuple[int, tuple[int, ...]]] = {}
    retired = 0
    t = 0
    idle = 0

    while retired < n:
        # (1) factories
        if not cfg.infinite_magic:
            for i in range(n_pools):
                if t >= next_prod[i] and stock[i] < cfg.pool_capacity:
                    stock[i] += 1
                    produced[i] += 1
                    next_prod[i] = t + P
        progress = False

        # (2) decoder
        waiting_on_reg = False
        if decoder is not None:
            regs, worked = decoder.serve()
            reliable.update(regs)
            if worked:
                waiting_on_reg = any(instrs[i].cond is not None and instrs[i].cond not in reliable for i in ready)
                progress = progress or waiting_on_reg

        # (3) issue in program order
        still: list[int] = []
        stock_sig = tuple(stock)
        for i in ready:
            ins = instrs[i]
            if ins.cond is not None and ins.cond not in reliable:
                stalls["decoding"] += 1
                still.append(i)
                continue
            op = ins.opcode
            src = qnode[ins.operands[0]]
            if ins.uses_magic:
                if cfg.infinite_magic:
                    avail = list(range(n_pools))
                else:
                    avail = [k for k in range(n_pools) if stock[k] > 0]
                if paths_on:
                    avail = [k for k in avail if not busy[router.pool_nodes[k]]]
                if not avail:
                    # a stocked pool held by another merge is a path conflict, not a magic shortage
                    if cfg.infinite_magic or any(stock):
                        stalls["path"] += 1
                    else:
                        stalls["magic"] += 1
                    still.append(i)
                    continue
            key = (epoch, stock_sig)
            if paths_on and failed_at.get(i) == key:
                stalls["path"] += 1
                still.append(i)
                continue
            occ = busy if paths_on else None
            if op.arity == 1:
                path = router.single(op, src, occ)
            elif ins.uses_magic:
                path = router.route_magic(src, op.basis, occ, avail)
            else:
                path = router.route_pair(src, qnode[ins.operands[1]], op.basis, occ)
            if isinstance(path, Blocked):
                failed_at[i] = key
                stalls["path"] += 1
                still.append(i)
                continue
            # issue
            progress = True
            failed_at.pop(i, None)
            if ins.uses_magic and not cfg.infinite_magic:
                k = router.pool_index(path.nodes[-1])
                stock[k] -= 1
                consumed[k] += 1
            nodes = path.nodes
            if paths_on:
                busy[list(nodes)] = True
                epoch += 1
            n_dat = 1 + (1 if ins.is_two_qubit else 0)
            data_busy += n_dat
            dur = op.duration
            issue_beat[i] = t
            ending.setdefault(t + dur - 1, []).append((i, nodes, n_dat))
            if op in (Opcode.MEAS_ZZ, Opcode.MEAS_XX):
                lprimes.append(path.L_prime)
            if decoder is not None:
                decoder.push(path.L_prime * dur, ins.dest)
        ready = still

        # (4) NOP decoding load for idle data cells
        if decoder is not None:
            decoder.push(float(n_data - data_busy), None)

        # (5) retire
        for i, nodes, n_dat in ending.pop(t, ()):
            progress = True
            retired += 1
            retire_beat[i] = t
            data_busy -= n_dat
            if paths_on:
                busy[list(nodes)] = False
                epoch += 1
            if decoder is None and instrs[i].dest is not None:
                reliable.add(instrs[i].dest)
            for s in dag.succs[i]:
                missing[s] -= 1
                if missing[s] == 0:
                    bisect.insort(ready, s)

        t += 1
        idle = 0 if progress else idle + 1
        if idle >= cfg.watchdog and retired < n:
            blocked = sorted(ready)[:20]
            detail = ", ".join(f"#{i} {instrs[i].to_text()}" for i in blocked)
            raise SimulationError(f"no progress for {idle} beats at beat {t}; waiting: {detail}", blocked)

    return SimResult(
        total_beats=t,
        instructions_executed=retired,
        stall_beats_by_hazard=stalls,
        per_op_effective_lengths=lprimes,
        decoder_peak_backlog=0.0 if decoder is None else decoder.peak,
        assignment_seed=int(assignment_seed),
        magic_produced=produced,
        magic_consumed=consumed,
        retire_beat=retire_beat,
        issue_beat=issue_beat,
    )


def ensemble_seeds(cfg: SimConfig) -> list[int]:
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_assignments)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


@dataclass
class Ensemble:
    mean_beats: float
    std_beats: float
    results: list[SimResult]

    @property
    def mean_cbpi(self) -> float:
        return float(np.mean([r.cbpi for r in self.results]))

    @property
    def std_cbpi(self) -> float:
        return float(np.std([r.cbpi for r in self.results]))

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["assignment_seed", "total_beats", "instructions", "cbpi",
                    "stall_path", "stall_magic", "stall_decoding", "decoder_peak_backlog"])
        for r in self.results:
            s = r.stall_beats_by_hazard
            w.writerow([r.assignment_seed, r.total_beats, r.instructions_executed, f"{r.cbpi:.6f}",
                        s["path"], s["magic"], s["decoding"], f"{r.decoder_peak_backlog:.6f}"])
        return buf.getvalue()


def _run_one(args):
    plane, program, cfg, seed = args
    return run(plane, program, cfg, seed)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("LSSIM_WORKERS", "1")))
    except ValueError:
        raise ConfigError("LSSIM_WORKERS must be an integer", field="LSSIM_WORKERS") from None


def run_ensemble(plane: Plane, program: Program, cfg: SimConfig, workers: int | None = None) -> Ensemble:
    """``cfg.n_assignments`` runs with seeds derived from ``cfg.seed``; order-stable under parallelism."""
    seeds = ensemble_seeds(cfg)
    workers = workers or cfg.workers
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_one, [(plane, program, cfg, s) for s in seeds]))
    else:
        results = [run(plane, program, cfg, s) for s in seeds]
    beats = np.array([r.total_beats for r in results], dtype=float)
    return Ensemble(float(beats.mean()), float(beats.std()), results)
