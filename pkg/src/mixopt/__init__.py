"""Structure-preserving solvers for optimal mixing by stirring.

A passive scalar is advected by a time-dependent combination of
prescribed divergence-free stirring modes; the library provides the
conservative finite-volume transport solver (mass, energy and
state-adjoint pairing conserved to solver tolerance), the negative-index
mix-norm that scores how well stirred the scalar is, exact adjoint
gradients of the resulting objective, and a conjugate-gradient descent
loop that designs the stirring schedule.  The ``mixopt`` command runs
config-driven experiments; see ``demos/`` for scripted walkthroughs.
"""

from .mesh import (BOUNDARY, Cell, Face, Mesh, build_cartesian, build_polar,
                   project_initial_data)
from .flows import (DOSWELL_VBAR, BasisFlow, FluxTable, assemble_flux_table,
                    cellular_basis, check_discrete_incompressibility,
                    doswell_basis, five_cell_doswell_basis, l2_norm,
                    l2_normalized, rigid_rotation_flow)
from .transport import (AdvectionOperator, ControlSchedule, SolverError,
                        Trajectory, apply_divergence, cn_step, energy,
                        gmres_weighted, mass, pairing, solve_adjoint,
                        solve_forward)
from .elliptic import NeumannLaplacian, mix_norm, solve_poisson_zero_mean
from .objective import (evaluate_gradient, evaluate_objective,
                        finite_difference_gradient, objective_and_gradient)
from .optimizer import OptimizationReport, OptimizerConfig, optimize
from .experiments import (ConfigError, ScenarioConfig, TimeSeries,
                          dump_scenario, emit_snapshot, fit_decay_rate,
                          parse_scenario, parse_scenario_file, run_convergence,
                          run_grad_check, run_optimize, run_simulate)

__version__ = "0.1.0"
