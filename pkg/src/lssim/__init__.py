"""Lattice-surgery architecture simulator: planes, routing, beat-level scheduling and CBPI stacks."""

__version__ = "0.1.0"

from .errors import ConfigError, ContractError, LssimError, SimulationError, TraceSyntaxError, ValidationError
from .plane import (ArrangementPattern, LayoutKind, PatternKind, Plane, Role, build_floor_plan, check_io_capable,
                    count_physical_qubits, generate_arrangement, max_density_bruteforce, optimize_wide_height)
from .isa import MAGIC, Instruction, Opcode, Program, dependency_dag, emit_program, generate_select_like, \
    parse_program, program_stats
from .route import Blocked, Path, avg_pairwise_effective_length, data_qubit_count, effective_length, find_path
from .engine import SimConfig, SimResult, run, run_ensemble
from .metrics import CbpiStack, cbpi, cbpi_stack, path_length_histogram, suggest_distance_reduction, \
    tradeoff_table
