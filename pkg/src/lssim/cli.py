"""Command-line front-end.

Configuration is a single JSON document (``--config``); command-line flags
override its fields. Exit codes: 0 success, 1 runtime failure, 2 invalid
input. ``LSSIM_WORKERS`` sets the number of worker processes for ensembles.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .engine import SimConfig, default_workers, run_ensemble
from .errors import ConfigError, LssimError, ValidationError
from .isa import PROFILES, emit_program, generate_select_like, parse_program, profile_program
from .metrics import (TradeoffEntry, cbpi_stack, hist_csv, path_length_histogram, stack_csv, summary_json,
                      tradeoff_csv, tradeoff_table)
from .plane import (ArrangementPattern, LayoutKind, PatternKind, Role, build_floor_plan, check_io_capable,
                    count_physical_qubits, generate_arrangement, max_density_bruteforce, pattern_grid)


@dataclass
class RunSpec:
    label: str = ""
    layout: str = "1L-D"
    pattern: str = "Dense50"
    shape: str = "square"
    height: int | None = None
    d: int = 25
    n_F: int = 12
    tp_dec: float = 0.45
    factory_period: int = 15
    infinite_magic: bool = False
    ignore_path_conflicts: bool = False
    instant_decoding: bool = False
    n_assignments: int = 20
    seed: int = 0
    pool_capacity: int = 2
    decoder_policy: str = "fifo"
    reliability: str = "fifo"
    n_data_cells: int | None = None
    program: dict | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> RunSpec:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown field(s) {', '.join(unknown)}", field=unknown[0])
        spec = cls(**doc)
        spec.validate()
        return spec

    def validate(self) -> None:
        LayoutKind.parse(self.layout)
        PatternKind.parse(self.pattern)
        self.arrangement()
        self.sim_config()
        if self.program is None:
            raise ConfigError("a program source is required (trace or profile)", field="program")
        if not isinstance(self.program, dict) or not {"trace", "profile", "generator"} & set(self.program):
            raise ConfigError("program needs one of 'trace', 'profile', 'generator'", field="program")
        if self.n_data_cells is not None and self.n_data_cells < 1:
            raise ConfigError("must be >= 1", field="n_data_cells")

    def arrangement(self) -> ArrangementPattern:
        if self.shape == "wide":
            return ArrangementPattern.wide(self.pattern, self.height)
        return ArrangementPattern(PatternKind.parse(self.pattern), self.shape, self.height)

    def sim_config(self) -> SimConfig:
        return SimConfig(n_F=self.n_F, factory_period=self.factory_period, tp_dec=self.tp_dec,
                         infinite_magic=self.infinite_magic, ignore_path_conflicts=self.ignore_path_conflicts,
                         instant_decoding=self.instant_decoding, n_assignments=self.n_assignments, seed=self.seed,
                         pool_capacity=self.pool_capacity, decoder_policy=self.decoder_policy,
                         reliability=self.reliability)

    def name(self) -> str:
        return self.label or f"{self.layout}-{self.arrangement().label()}-d{self.d}"

    def load_program(self, base_dir: Path):
        src = self.program
        if "trace" in src:
            path = Path(src["trace"])
            if not path.is_absolute():
                path = base_dir / path
            return parse_program(path.read_text())
        if "profile" in src:
            return profile_program(src["profile"], seed=int(src.get("seed", 0)), scale=float(src.get("scale", 1.0)),
                                   n_logical=src.get("n_logical"))
        gen = dict(src["generator"])
        return generate_select_like(gen.pop("n_logical"), gen.pop("n_magic_ops"), gen.pop("mix"),
                                    gen.pop("seed", 0), **gen)

    def build(self, base_dir: Path):
        program = self.load_program(base_dir)
        n_cells = self.n_data_cells or program.n_logical_qubits
        plane = build_floor_plan(self.layout, self.arrangement(), n_cells, self.n_F, self.d)
        return plane, program


OVERRIDES = {
    "layout": str, "pattern": str, "shape": str, "height": int, "d": int, "n_F": int, "tp_dec": float,
    "factory_period": int, "n_assignments": int, "seed": int, "n_data_cells": int, "label": str,
    "decoder_policy": str, "reliability": str, "pool_capacity": int,
}
FLAGS = ("infinite_magic", "ignore_path_conflicts", "instant_decoding")


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON configuration document")
    for name, typ in OVERRIDES.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None)
    for name in FLAGS:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, action="store_true", default=None)
    p.add_argument("--trace", type=Path, help="program trace file (overrides the config's program)")
    p.add_argument("--profile", choices=sorted(PROFILES), help="synthetic benchmark profile")
    p.add_argument("--scale", type=float, default=None, help="op-count scale for --profile")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def _load_doc(args) -> tuple[dict, Path]:
    if args.config is None:
        return {}, Path.cwd()
    try:
        doc = json.loads(args.config.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field="config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", field="config") from None
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object", field="config")
    return doc, args.config.resolve().parent


def _apply_overrides(doc: dict, args) -> dict:
    doc = dict(doc)
    for name in OVERRIDES:
        v = getattr(args, name, None)
        if v is not None:
            doc[name] = v
    for name in FLAGS:
        if getattr(args, name, None):
            doc[name] = True
    if getattr(args, "trace", None) is not None:
        doc["program"] = {"trace": str(args.trace.resolve())}
    elif getattr(args, "profile", None) is not None:
        doc["program"] = {"profile": args.profile, "scale": args.scale or 1.0, "seed": doc.get("seed", 0)}
    return doc


def _spec_from_args(args) -> tuple[RunSpec, Path, dict]:
    doc, base = _load_doc(args)
    body = {k: v for k, v in doc.items() if k not in ("sweep", "configs", "base", "compare")}
    return RunSpec.from_dict(_apply_overrides(body, args)), base, doc


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    spec, base, _ = _spec_from_args(args)
    plane, program = spec.build(base)
    ens = run_ensemble(plane, program, spec.sim_config(), default_workers())
    runs = [asdict(r) for r in ens.results]
    doc = {"label": spec.name(), "spec": asdict(spec), "mean_beats": ens.mean_beats, "std_beats": ens.std_beats,
           "mean_cbpi": ens.mean_cbpi, "std_cbpi": ens.std_cbpi, "runs": runs}
    _write(args.out, "runs.json", json.dumps(doc, sort_keys=True) + "\n")
    _write(args.out, "ensemble.csv", ens.summary_csv())
    _write(args.out, "hist.csv", hist_csv(path_length_histogram(ens.results)))
    print(f"{spec.name()}: CBPI {ens.mean_cbpi:.4f} +- {ens.std_cbpi:.4f} over {len(ens.results)} assignment(s)")
    return 0


def _stack_rows(specs: list[RunSpec], base: Path):
    # validate every spec before running anything
    built = [(s, *s.build(base)) for s in specs]
    rows = []
    for spec, plane, program in built:
        st = cbpi_stack(plane, program, spec.sim_config(), default_workers())
        rows.append((spec.name(), st))
        print(f"{spec.name()}: " + " ".join(f"{k}={v:.4f}" for k, v in st.as_floats().items()))
    return rows


def cmd_stack(args) -> int:
    spec, base, doc = _spec_from_args(args)
    specs = [spec]
    for extra in doc.get("compare", []):
        specs.append(RunSpec.from_dict({**asdict(spec), "label": "", **extra}))
    rows = _stack_rows(specs, base)
    _write(args.out, "stack.csv", stack_csv(rows))
    _write(args.out, "summary.json", summary_json(stacks=rows))
    return 0


def cmd_sweep(args) -> int:
    spec, base, doc = _spec_from_args(args)
    axes = doc.get("sweep")
    if not isinstance(axes, dict) or not axes:
        raise ConfigError("sweep needs an object of axis -> list of values", field="sweep")
    names = sorted(axes)
    specs = []
    for values in itertools.product(*(axes[n] for n in names)):
        combo = dict(zip(names, values))
        s = RunSpec.from_dict({**asdict(spec), **combo, "label": ""})
        s.label = s.name() + "".join(f"/{k}={v}" for k, v in combo.items())
        specs.append(s)
    rows = _stack_rows(specs, base)
    _write(args.out, "stack.csv", stack_csv(rows))
    _write(args.out, "summary.json", summary_json(stacks=rows))
    return 0


def _read_grid(path: Path) -> np.ndarray:
    chars = {"D": Role.DATA, "A": Role.ANCILLA, ".": Role.VOID}
    rows = [ln.strip() for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValidationError(f"{path}: grid rows must be nonempty and equally long")
    try:
        return np.array([[chars[ch] for ch in r] for r in rows], dtype=np.int8)
    except KeyError as exc:
        raise ValidationError(f"{path}: unknown cell character {exc.args[0]!r}") from None


def cmd_arrangement(args) -> int:
    if args.bruteforce:
        r, c = args.bruteforce
        res = max_density_bruteforce(r, c)
        out = {"rows": r, "cols": c, "max_r_data": float(res.max_ratio), "max_r_data_exact": str(res.max_ratio),
               "min_margin": res.min_margin,
               "best_grid": ["".join("D" if x == Role.DATA else "A" for x in row) for row in res.best_grid]}
    else:
        if args.grid is not None:
            grid = _read_grid(args.grid)
        elif args.pattern is not None and (args.rows or args.cols):
            if not (args.rows and args.cols):
                raise ConfigError("--rows and --cols go together", field="rows")
            grid = pattern_grid(args.pattern, args.rows, args.cols)
        elif args.pattern is not None:
            grid = generate_arrangement(ArrangementPattern.square(args.pattern), args.n)
        else:
            raise ConfigError("give a pattern, --grid FILE or --bruteforce ROWS COLS", field="pattern")
        rep = check_io_capable(grid)
        data = int((grid == Role.DATA).sum())
        out = {"capable": rep.capable, "shape": list(grid.shape), "r_data": data / grid.size,
               "cond1_violations": [list(x) for x in rep.cond1_violations],
               "cond2_violations": [[list(x) for x in comp] for comp in rep.cond2_violations]}
    print(json.dumps(out, sort_keys=True))
    return 0


def cmd_resources(args) -> int:
    spec, base, doc = _spec_from_args(args)
    configs = doc.get("configs")
    if not isinstance(configs, list) or not configs:
        raise ConfigError("resources needs a nonempty 'configs' list", field="configs")
    specs = [RunSpec.from_dict({**asdict(spec), "label": "", **c}) for c in configs]
    base_label = doc.get("base", specs[0].name())
    if base_label not in {s.name() for s in specs}:
        raise ConfigError(f"base {base_label!r} is not one of the configs", field="base")
    built = [(s, *s.build(base)) for s in specs]
    entries = []
    for s, plane, program in built:
        ens = run_ensemble(plane, program, s.sim_config(), default_workers())
        q = count_physical_qubits(plane).cells_and_pools_qubits
        entries.append(TradeoffEntry(s.name(), s.layout, s.arrangement().label(), s.d, q, ens.mean_cbpi,
                                     ens.std_cbpi))
    rows = tradeoff_table(entries, base_label)
    _write(args.out, "tradeoff.csv", tradeoff_csv(rows))
    _write(args.out, "summary.json", summary_json(tradeoff=rows))
    for r in rows:
        print(f"{r.label}: qubits {r.qubits} ({r.qubit_delta:+.1%}), CBPI {r.mean_cbpi:.4f}, speedup {r.speedup:.3f}")
    return 0


def cmd_gen(args) -> int:
    if args.profile:
        prog = profile_program(args.profile, seed=args.seed, scale=args.scale, n_logical=args.n_logical)
    else:
        if args.n_logical is None or args.magic is None:
            raise ConfigError("--n-logical and --magic are required without --profile", field="n_logical")
        mix = json.loads(args.mix) if args.mix else PROFILES["FH-200"].mix
        prog = generate_select_like(args.n_logical, args.magic, mix, args.seed, n_ops=args.ops)
    text = emit_program(prog)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lssim", description="Lattice-surgery architecture simulator")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, fn, help_ in [("simulate", cmd_simulate, "run an assignment ensemble"),
                            ("stack", cmd_stack, "compute CBPI stacks"),
                            ("sweep", cmd_sweep, "CBPI stacks over a parameter grid"),
                            ("resources", cmd_resources, "qubit/CBPI tradeoff table")]:
        p = sub.add_parser(name, help=help_)
        _add_spec_args(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("arrangement", help="check IO capability or bound the data density")
    p.add_argument("pattern", nargs="?", help="Sparse25, Dense44 or Dense50")
    p.add_argument("--n", type=int, default=16, help="data cells for a generated pattern")
    p.add_argument("--rows", type=int, help="cut the pattern to exactly ROWS x COLS cells")
    p.add_argument("--cols", type=int)
    p.add_argument("--grid", type=Path, help="text grid of D/A characters")
    p.add_argument("--bruteforce", type=int, nargs=2, metavar=("ROWS", "COLS"))
    p.set_defaults(func=cmd_arrangement)

    p = sub.add_parser("gen", help="emit a synthetic program trace")
    p.add_argument("--profile", choices=sorted(PROFILES))
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-logical", type=int)
    p.add_argument("--magic", type=int)
    p.add_argument("--ops", type=int)
    p.add_argument("--mix", help='JSON object with keys clifford, two_qubit, magic')
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_gen)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc), "field": getattr(exc, "field", None)}
        print(json.dumps(diag), file=sys.stderr)
        return 2
    except (LssimError, OSError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(diag), file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
