"""Numerical tolerances shared across the pipeline."""

import os
from dataclasses import dataclass, replace

ENV_TOL_ND = "FOLICHECK_TOL_ND"


@dataclass(frozen=True)
class Config:
    tau_nd: float = 1e-4  # min |d det| at a zero
    delta_sep: float = 1e-3  # min separation between distinct zeros
    grid_1d: int = 512
    grid_2d: int = 256
    max_tries: int = 16
    closure_tol: float = 1e-9
    immersion_tol: float = 1e-8
    refine_tol: float = 1e-13
    preimage_grid: int = 1024

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def default_config():
    """Defaults, with ``FOLICHECK_TOL_ND`` applied if set."""
    cfg = Config()
    raw = os.environ.get(ENV_TOL_ND)
    if raw:
        cfg = replace(cfg, tau_nd=float(raw))
    return cfg
