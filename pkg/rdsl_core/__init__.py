"""
rdsl_core - Compiler and scheduler for RAN dataflow descriptions

Features:
- Frontend: RDSL flows and guarded modifiers, parsed with lark and pretty-printed back
- Constraints: apiVersion/kind timing documents resolved against symbols and labels
- Platform: processors, memories, ports and buffer movement patterns, incl. XML import
- Elaborator: flows flattened into a one-period task graph with sibling buffers
- Scheduler: greedy baseline, simulated annealing and an exhaustive oracle
- Verifier: multi-period replay with randomized guard outcomes and fault injection
"""

from .constraints import ConstraintDoc, ConstraintSet, parse_constraints, resolve_references
from .elaborator import elaborate, expand_siblings, merge_redundant_siblings
from .errors import Infeasible, RdslError, ScenarioError, TooLarge
from .expr import eval_expr, parse_expr
from .faults import FaultCase, inject
from .frontend import SourceUnit, parse_sources, parse_unit, pretty_print, validate_unit
from .generator import Instance, generate_instance
from .graph import TaskGraph
from .oracle import brute_force
from .platform import PlatformDesc, import_patterns_xml, parse_platform, serialize_platform
from .schedule import Objective, ObjectiveKind, Schedule, SolverConfig, score
from .scheduler import baseline_schedule, solve
from .sdk import SdkCatalog, parse_sdk_meta
from .symbols import SymbolTable, bind_symbols
from .verifier import VerifyReport, ViolationKind, simulate_timeline, verify

__all__ = [
    'ConstraintDoc', 'ConstraintSet', 'parse_constraints', 'resolve_references',
    'elaborate', 'expand_siblings', 'merge_redundant_siblings',
    'Infeasible', 'RdslError', 'ScenarioError', 'TooLarge',
    'eval_expr', 'parse_expr',
    'FaultCase', 'inject',
    'SourceUnit', 'parse_sources', 'parse_unit', 'pretty_print', 'validate_unit',
    'Instance', 'generate_instance',
    'TaskGraph',
    'brute_force',
    'PlatformDesc', 'import_patterns_xml', 'parse_platform', 'serialize_platform',
    'Objective', 'ObjectiveKind', 'Schedule', 'SolverConfig', 'score',
    'baseline_schedule', 'solve',
    'SdkCatalog', 'parse_sdk_meta',
    'SymbolTable', 'bind_symbols',
    'VerifyReport', 'ViolationKind', 'simulate_timeline', 'verify',
]

__version__ = "0.4.0"
