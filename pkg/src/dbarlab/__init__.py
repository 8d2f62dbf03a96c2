"""dbarlab: numerical laboratory for the mNV, NV and DS-II flows.

Pseudospectral time evolution, the d-bar scattering transform and its
involution inverse, the Miura map with its Newton inverse and spectral
range classifier, and a diagnostics suite of norms and inequality checkers.
"""

from .core import (
    BandError,
    ContractViolation,
    Field,
    GridSpec,
    GridMismatchError,
    Multiplier,
    SupportLeakageWarning,
    TagMismatchError,
    UsageError,
    Wavenumber,
    anti_beurling,
    apply_multiplier,
    beurling,
    cauchy_transform,
    d,
    d_bar,
    exp_k,
    forward_transform,
    grid_inner,
    grid_integral,
    grid_norm,
    hat_transform,
    hat_transform_nodes,
    inverse_transform,
    read_field,
    resample_field,
    write_field,
)
from .evolution import (
    evolve_direct,
    evolve_ist,
    linear_flow,
    load_trajectory,
    model_dsii,
    model_mnv,
    model_nv,
    save_trajectory,
    stability_bound,
)
from .miura import (
    constraint_project,
    miura_forward,
    miura_inverse,
    nv_via_miura,
    schrodinger_min_eig,
    zero_mode,
)
from .scattering import (
    KGrid,
    ScatteringData,
    inverse_scattering,
    jost_identity_check,
    scattering_transform,
    solve_jost,
    solve_jost_pair,
)

__all__ = [
    "BandError",
    "ContractViolation",
    "Field",
    "GridSpec",
    "GridMismatchError",
    "KGrid",
    "Multiplier",
    "ScatteringData",
    "SupportLeakageWarning",
    "TagMismatchError",
    "UsageError",
    "Wavenumber",
    "anti_beurling",
    "apply_multiplier",
    "beurling",
    "cauchy_transform",
    "constraint_project",
    "d",
    "d_bar",
    "evolve_direct",
    "evolve_ist",
    "exp_k",
    "forward_transform",
    "grid_inner",
    "grid_integral",
    "grid_norm",
    "hat_transform",
    "hat_transform_nodes",
    "inverse_scattering",
    "inverse_transform",
    "jost_identity_check",
    "linear_flow",
    "load_trajectory",
    "miura_forward",
    "miura_inverse",
    "model_dsii",
    "model_mnv",
    "model_nv",
    "nv_via_miura",
    "read_field",
    "resample_field",
    "save_trajectory",
    "scattering_transform",
    "schrodinger_min_eig",
    "solve_jost",
    "solve_jost_pair",
    "stability_bound",
    "write_field",
    "zero_mode",
]

__version__ = "0.1.0"
