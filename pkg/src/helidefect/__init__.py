"""Helicity defect diagnostics for rough incompressible velocity fields.

Spectral field calculus on the periodic box, mollifier commutators and the
helicity defect ladder, fractional and Besov regularity estimators, flow
maps, and trace/flux machinery on the slab ``T^2 x (0, 1)``.
"""

__version__ = "0.1.0"

from .boundary import (
    SlabDomain,
    boundary_helicity_flux,
    cutoff_chi_r,
    distance_field,
    full_trace_estimate,
    helicity_budget,
    normal_trace_estimate,
    slab_curl,
    trace_pairing_limit,
)
from .calculus import (
    curl,
    divergence,
    euler_residual,
    gradient,
    helicity_density,
    leray_project,
    pressure_from_velocity,
    total_helicity,
)
from .fields_lab import (
    ABC,
    Gradient,
    RotatedShear,
    SyntheticBesov,
    TaylorGreen,
    cauchy_vorticity,
    flow_map_integrate,
    sample_recipe,
    synth_besov_field,
)
from .grid import (
    GridSpec,
    ScalarField,
    TensorField,
    VectorField,
    integrate,
    sample_at,
    to_physical,
    to_spectral,
)
from .mollify import (
    Mollifier,
    commutator_R,
    correction_current,
    defect_density,
    defect_ladder,
    helicity_current,
    mollify,
    verify_levi_civita_identities,
)
from .regularity import (
    BesovParams,
    besov_modulus,
    besov_seminorm,
    gagliardo_seminorm_mc,
    h_half_seminorm_fourier,
    scaling_exponent,
)
from .vf3 import read_field, write_field
