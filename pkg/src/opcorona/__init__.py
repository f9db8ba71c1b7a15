"""Numerical toolkit for the matrix corona problem on the unit disk.

Modules
-------
disk        quadrature, Wirtinger derivatives, Green potentials, Carleson boxes
field       matrix polynomials, corona constants, boundary Fourier analysis
projection  orthogonal projections onto Ran F / ker F, bundle identities, witnesses
corona      left inverses, local Neumann inverses, generalized inverses
hankel      Hankel form, symbol fit, analytic projection pipeline
report      scenarios, orchestration, reports and plot tables
"""
from .corona import (
    InverseReport,
    co_outer_necessary_check,
    generalized_inverse_from_projections,
    local_left_inverse,
    nikolski_left_inverse,
    pointwise_left_inverse,
    projections_from_generalized_inverse,
)
from .disk import (
    DiskGrid,
    SampledField,
    carleson_constant,
    green_potential,
    green_potential_grid,
    greens_formula_residual,
    laplacian,
    quad_area,
    quad_boundary,
    quad_mu,
    wirtinger,
)
from .field import (
    AnalyticMatrixField,
    FieldError,
    analyticity_defect,
    boundary_trace,
    c1_refinement,
    corona_delta,
    field_defect,
    opnorm,
)
from .hankel import (
    analytic_projection,
    assemble_form,
    build_test_vectors,
    embedding_check,
    fit_symbol,
    main_estimate_check,
    run_pipeline,
)
from .projection import (
    ProjectionField,
    complementary_duality_check,
    dbar_formula,
    dilate,
    kernel_projection,
    necessity_checks,
    pdp_identity_report,
    range_projection,
    subharmonic_witness,
)
from .report import Scenario, compare_reports, emit_plot_data, load_scenario, run_scenario

__version__ = "0.1.0"
