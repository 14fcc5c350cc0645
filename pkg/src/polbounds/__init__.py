"""Precision bounds and receiver simulation for polarization estimation
of classical (coherent) light, with independent brute-force verification."""

__version__ = "0.1.0"

from .polcore import (ModalParams, Scenario, StokesVector, jacobian,
                      modal_from_stokes, sphere_grid, stokes_from_modal)
from .holevo import (HolevoResult, SpanBasis, XSet, assemble_x, build_basis,
                     holevo_cost, reparametrized_z, trace_norm_antisym,
                     z_matrix)
from .qfisher import (QfiMatrix, qcrb_closed_form, qcrb_cost, qfi_matrix,
                      sld_commutator_expectations)
from .fockoracle import (FockDensity, FockState, StokesOperators,
                         coherent_two_mode, numerical_qfi, phase_average,
                         stokes_operators)
from .receivers import (ArmMeans, FisherMatrix, ReceiverSpec, arm_means,
                        crb_cost, poisson_fisher, stokes_receiver_bound,
                        tetrahedron_optimize)
from .simkit import (CountRecord, MseReport, mle_estimate, mse_benchmark,
                     naive_stokes_estimate, sample_counts)
from .report import BoundReport, ScanTable, evaluate_bounds, run_scan

__all__ = [
    "__version__",
    "ModalParams", "Scenario", "StokesVector", "jacobian",
    "modal_from_stokes", "sphere_grid", "stokes_from_modal",
    "HolevoResult", "SpanBasis", "XSet", "assemble_x", "build_basis",
    "holevo_cost", "reparametrized_z", "trace_norm_antisym", "z_matrix",
    "QfiMatrix", "qcrb_closed_form", "qcrb_cost", "qfi_matrix",
    "sld_commutator_expectations",
    "FockDensity", "FockState", "StokesOperators", "coherent_two_mode",
    "numerical_qfi", "phase_average", "stokes_operators",
    "ArmMeans", "FisherMatrix", "ReceiverSpec", "arm_means", "crb_cost",
    "poisson_fisher", "stokes_receiver_bound", "tetrahedron_optimize",
    "CountRecord", "MseReport", "mle_estimate", "mse_benchmark",
    "naive_stokes_estimate", "sample_counts",
    "BoundReport", "ScanTable", "evaluate_bounds", "run_scan",
]
