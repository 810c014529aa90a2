"""Numerical laboratory for steady flow in variable-width channels.

Submodules
----------
geometry
    Channel profiles, standing-assumption checks, weight integrals, the
    k/h window parameterization, and mapped grids.
flux_carrier
    The divergence-free flux carrier, its closed-form derivatives, and the
    support/size diagnostics.
ns_solver
    Steady Navier-Stokes on truncated channels in streamfunction-vorticity
    form, with energy and flux diagnostics.
functional_inequalities
    Numerical estimates of the Poincare, embedding, and divergence-problem
    constants.
comparison_lemmas
    The differential-inequality comparison toolkit.
estimate_harness
    Scenario-level scans that verify the growth, decay, convergence, and
    uniqueness estimates at desk scale.
cli_io
    Scenario configuration, command line entry points, and CSV/SVG output.
"""

from . import (
    cli_io,
    comparison_lemmas,
    estimate_harness,
    flux_carrier,
    functional_inequalities,
    geometry,
    ns_solver,
)

__version__ = "0.1.0"

__all__ = [
    "geometry",
    "flux_carrier",
    "ns_solver",
    "functional_inequalities",
    "comparison_lemmas",
    "estimate_harness",
    "cli_io",
    "__version__",
]
