"""Case catalogue, configuration files, single runs and convergence studies."""

from .cases import BUILTIN, CaseSpec, CrackSpec, builtin_case
from .config import CASE_SCHEMA, dump_spec, load_spec, spec_from_dict, spec_to_dict
from .run import CaseResult, ModeResult, discretize, run_case, solve_case
from .study import StudyReport, convergence_study, loglog_slope

__all__ = [
    "BUILTIN", "CASE_SCHEMA", "CaseResult", "CaseSpec", "CrackSpec", "ModeResult", "StudyReport",
    "builtin_case", "convergence_study", "discretize", "dump_spec", "load_spec", "loglog_slope",
    "run_case", "solve_case", "spec_from_dict", "spec_to_dict",
]
