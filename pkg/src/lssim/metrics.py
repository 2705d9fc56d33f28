"""CBPI, CBPI stacks, path-length statistics, distance suggestions and tradeoff tables."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .engine import Ensemble, SimConfig, SimResult, run_ensemble
from .errors import ConfigError, ContractError
from .isa import Program
from .plane import Plane

log = logging.getLogger(__name__)

STACK_PARTS = ("base", "magic", "path", "decoding")


def cbpi(result: SimResult) -> float:
    if result.instructions_executed <= 0:
        raise ContractError("CBPI is undefined for an empty run")
    return result.total_beats / result.instructions_executed


def _exact_mean_cbpi(ens: Ensemble) -> Fraction:
    beats = sum(r.total_beats for r in ens.results)
    instrs = ens.results[0].instructions_executed
    if instrs <= 0:
        raise ContractError("CBPI is undefined for an empty run")
    return Fraction(beats, instrs * len(ens.results))


@dataclass
class CbpiStack:
    """Four-part decomposition of mean CBPI; parts are exact rationals."""

    base: Fraction
    magic: Fraction
    path: Fraction
    decoding: Fraction
    total: Fraction
    stage_means: tuple[Fraction, ...] = ()
    stage_std_beats: tuple[float, ...] = ()
    clamped: tuple[str, ...] = ()

    def parts(self) -> dict[str, Fraction]:
        return {k: getattr(self, k) for k in STACK_PARTS}

    def as_floats(self) -> dict[str, float]:
        out = {k: float(v) for k, v in self.parts().items()}
        out["total"] = float(self.total)
        return out


def stage_configs(cfg: SimConfig) -> list[SimConfig]:
    """Base, +magic, +magic+path and full model, each keeping cfg's own ablations."""
    return [
        cfg.ablated(infinite_magic=True, ignore_path_conflicts=True, instant_decoding=True),
        cfg.ablated(ignore_path_conflicts=True, instant_decoding=True),
        cfg.ablated(instant_decoding=True),
        cfg,
    ]


def stack_from_ensembles(ensembles: Sequence[Ensemble]) -> CbpiStack:
    means = [_exact_mean_cbpi(e) for e in ensembles]
    parts = [means[0]] + [means[k] - means[k - 1] for k in range(1, 4)]
    clamped = []
    for k, name in enumerate(STACK_PARTS):
        if parts[k] < 0:
            log.warning("CBPI stack: negative %s component %.6g clamped to 0", name, float(parts[k]))
            clamped.append(name)
            parts[k] = Fraction(0)
    return CbpiStack(*parts, total=means[3], stage_means=tuple(means),
                     stage_std_beats=tuple(e.std_beats for e in ensembles), clamped=tuple(clamped))


def cbpi_stack(plane: Plane, program: Program, cfg: SimConfig, workers: int | None = None) -> CbpiStack:
    """Run the four cumulative-hazard ensembles (same seeds) and difference their mean CBPIs."""
    return stack_from_ensembles([run_ensemble(plane, program, c, workers) for c in stage_configs(cfg)])


@dataclass
class Histogram:
    counts: dict[int, int]
    total_lprime: float
    n_ops: int

    def rows(self) -> list[tuple[int, int]]:
        if not self.counts:
            return []
        lo, hi = min(self.counts), max(self.counts)
        return [(b, self.counts.get(b, 0)) for b in range(lo, hi + 1)]


def path_length_histogram(results: SimResult | Iterable[SimResult] | Iterable[float]) -> Histogram:
    """Unit-width histogram of L' over path-carrying two-operand instructions.

    Accepts one result, several results, or a plain sequence of L' values.
    """
    if isinstance(results, SimResult):
        values = list(results.per_op_effective_lengths)
    else:
        items = list(results)
        if items and isinstance(items[0], SimResult):
            values = [v for r in items for v in r.per_op_effective_lengths]
        else:
            values = [float(v) for v in items]
    counts: dict[int, int] = {}
    for v in values:
        b = math.floor(v + 1e-9)
        counts[b] = counts.get(b, 0) + 1
    return Histogram(dict(sorted(counts.items())), float(math.fsum(values)), len(values))


@dataclass(frozen=True)
class LerEstimate:
    p: float
    p_th: float
    d: int
    total_Lprime_ratio: float
    delta_d: int

    @property
    def new_d(self) -> int:
        return self.d - self.delta_d


def suggest_distance_reduction(total_Lprime_ratio: float, p: float, p_th: float = 0.01,
                               d: int = 25) -> LerEstimate:
    """Distance reduction allowed by shrinking total L' (and hence the logical error rate).

    With ``p_L ~ (p/p_th)^((d-1)/2)`` each step of 2 in ``d`` changes ``p_L`` by
    ``p/p_th``; a ``1/X`` improvement buys ``floor(log X / log(p_th/p))`` steps.
    """
    if not 0 < p < p_th:
        raise ConfigError("need 0 < p < p_th", field="p")
    if not total_Lprime_ratio > 0:
        raise ConfigError("ratio must be > 0", field="total_Lprime_ratio")
    if d < 3 or d % 2 == 0:
        raise ConfigError("code distance must be odd and >= 3", field="d")
    if total_Lprime_ratio >= 1:
        delta = 0
    else:
        steps = math.floor(math.log(total_Lprime_ratio) / math.log(p / p_th) + 1e-9)
        delta = max(0, min(2 * steps, d - 3))
    return LerEstimate(p, p_th, d, total_Lprime_ratio, delta)


@dataclass
class TradeoffEntry:
    label: str
    layout: str
    pattern: str
    d: int
    qubits: int  # Cells + Pools physical qubits
    mean_cbpi: float
    std_cbpi: float = 0.0


@dataclass
class TradeoffRow(TradeoffEntry):
    speedup: float = 1.0
    qubit_delta: float = 0.0  # relative to base, e.g. -0.17 for 17% fewer qubits
    is_base: bool = False


def tradeoff_table(entries: Sequence[TradeoffEntry], base_label: str) -> list[TradeoffRow]:
    """Speedup and qubit change of every entry relative to the base entry; base row first."""
    base = next((e for e in entries if e.label == base_label), None)
    if base is None:
        raise ConfigError(f"base configuration {base_label!r} missing", field="base")
    rows = []
    for e in sorted(entries, key=lambda e: (e.label != base_label, e.label)):
        rows.append(TradeoffRow(**asdict(e), speedup=base.mean_cbpi / e.mean_cbpi,
                                qubit_delta=e.qubits / base.qubits - 1.0, is_base=e.label == base_label))
    return rows


# ---------------------------------------------------------------------------
# Emitters
# ---------------------------------------------------------------------------

STACK_HEADER = ["label", "base", "magic", "path", "decoding", "total"]
HIST_HEADER = ["bin", "count"]
TRADEOFF_HEADER = ["label", "layout", "pattern", "d", "qubits_cells_pools", "mean_cbpi", "std_cbpi",
                   "speedup", "qubit_delta"]


def _csv(header: list[str], rows: Iterable[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _f(x: float) -> str:
    return f"{float(x):.6f}"


def stack_csv(stacks: Sequence[tuple[str, CbpiStack]]) -> str:
    return _csv(STACK_HEADER, [[label] + [_f(v) for v in s.as_floats().values()] for label, s in stacks])


def hist_csv(hist: Histogram) -> str:
    return _csv(HIST_HEADER, [[b, c] for b, c in hist.rows()])


def tradeoff_csv(rows: Sequence[TradeoffRow]) -> str:
    return _csv(TRADEOFF_HEADER, [[r.label, r.layout, r.pattern, r.d, r.qubits, _f(r.mean_cbpi), _f(r.std_cbpi),
                                   _f(r.speedup), _f(r.qubit_delta)] for r in rows])


def summary_json(stacks: Sequence[tuple[str, CbpiStack]] = (), hist: Histogram | None = None,
                 tradeoff: Sequence[TradeoffRow] = ()) -> str:
    doc = {
        "stacks": [{"label": label, **s.as_floats(), "clamped": list(s.clamped)} for label, s in stacks],
        "histogram": None if hist is None else {
            "bins": [[b, c] for b, c in hist.rows()], "total_lprime": hist.total_lprime, "n_ops": hist.n_ops},
        "tradeoff": [asdict(r) for r in tradeoff],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


__all__ = [
    "cbpi", "cbpi_stack", "stage_configs", "stack_from_ensembles", "CbpiStack", "Histogram",
    "path_length_histogram", "LerEstimate", "suggest_distance_reduction", "TradeoffEntry", "TradeoffRow",
    "tradeoff_table", "stack_csv", "hist_csv", "tradeoff_csv", "summary_json",
]
