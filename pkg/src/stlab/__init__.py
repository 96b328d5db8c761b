"""stlab: a numerical laboratory for buoyancy-driven Stokes flow coupled to
pure transport in a periodic channel.

Subpackages by capability: `domain` (grids, fields, transforms, norms),
`stokes` (per-mode clamped flow solve and its spectrum), `dynamics` (time
integration and diagnostics), `rearrange` (decreasing vertical
rearrangement), `blprofiles` (self-similar wall-layer profiles and
predictions), `analysis` (rate fits and validation), `cli` (scenario runs).
"""

from .domain import (Grid, MeanFluctPair, RealField, SpectralField,
                     differentiate, integrate, l2_norm, load_snapshot,
                     save_snapshot, sobolev_norm, split_mean_fluct,
                     to_real, to_spectral)
from .stokes import (apply_L, clamped_spectrum, solve_bilaplacian,
                     solve_stream, velocity)
from .dynamics import (DiagnosticsRecord, State, StepperConfig, diagnose,
                       make_background, make_initial_theta, run, step)
from .rearrange import level_measure, vertical_rearrangement
from .blprofiles import (ProfileODEProblem, SimilarityProfile,
                         assemble_bl_linear, canonical_profile,
                         solve_profile_ode)
from .analysis import (extract_bl, fit_power_law, validate_prediction)

__version__ = "0.1.0"
