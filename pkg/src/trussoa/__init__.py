"""Mixed categorical truss sizing by bi-level outer approximation.

Each bar chooses a catalog entry (material and profile) and a continuous
cross-section area.  For fixed catalogs the areas are sized by MMA; the
catalog choice is driven by a MILP over linear cuts built from post-optimal
sensitivities of the sized weight.
"""
__version__ = "0.1.0"

from .catalog import CatalogEntry, CatalogSet, Material, ProfileShape, default_catalogs
from .cases import CaseFile, gen_case, load_case, save_case
from .driver import OracleResult, RunResult, TrussOracle, bilevel_oa, enumerate_baseline, hamming
from .fem import FemCounter, TrussModel, assemble_and_solve, state_sensitivity
from .master import MasterState, MilpOutcome, OACut, add_cut, brute_force_milp, solve_milp
from .model import ChoiceMatrix, Evaluation, evaluate, weight
from .postopt import ActiveSets, Multipliers, detect_active, kkt_multipliers, psi_gradient
from .slave import SlaveOptions, SlaveSolution, solve_slave

__all__ = [
    "ActiveSets", "CaseFile", "CatalogEntry", "CatalogSet", "ChoiceMatrix", "Evaluation",
    "FemCounter", "MasterState", "Material", "MilpOutcome", "Multipliers", "OACut",
    "OracleResult", "ProfileShape", "RunResult", "SlaveOptions", "SlaveSolution",
    "TrussModel", "TrussOracle", "add_cut", "assemble_and_solve", "bilevel_oa",
    "brute_force_milp", "default_catalogs", "detect_active", "enumerate_baseline",
    "evaluate", "gen_case", "hamming", "kkt_multipliers", "load_case", "psi_gradient",
    "save_case", "solve_milp", "solve_slave", "state_sensitivity", "weight",
]
