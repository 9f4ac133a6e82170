"""Tangency and transversality checks for submanifolds of foliated model spaces."""

from .config import Config, default_config
from .degree import degree_criterion_verdict, degree_report, mod2_degree, winding_degree
from .detline import det_section, w1_identity_check, w1_pairing
from .errors import FoliCheckError
from .report import run_check, run_sweep
from .scenarios import BUILTIN_IDS, builtin, load_scenario
from .tangency import perturb_until_generic

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_IDS",
    "Config",
    "FoliCheckError",
    "builtin",
    "default_config",
    "degree_criterion_verdict",
    "degree_report",
    "det_section",
    "load_scenario",
    "mod2_degree",
    "perturb_until_generic",
    "run_check",
    "run_sweep",
    "w1_identity_check",
    "w1_pairing",
    "winding_degree",
]
