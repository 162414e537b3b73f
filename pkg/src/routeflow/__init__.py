"""Multi-group traffic flow on road networks with route choice.

Per-destination driver groups share each road's capacity through a common
total density; junctions route them by per-group policies computed from one
of three information models (free-flow, frozen-density, full-history), and a
fixed-point search couples the full-history planner to its own outcome.
"""

from .equilibrium import (
    ConvergenceReport,
    XiState,
    density_distance,
    fixed_point_solve,
    serialize_report,
    xi_apply,
)
from .errors import (
    GridError,
    ParseError,
    RouteflowError,
    ScenarioError,
    SimulationError,
    ValidationError,
    ValueSolveError,
)
from .junctions import (
    Layout,
    Neighborhood,
    NetworkState,
    PathPopulation,
    SimContext,
    advance_slab,
    build_layout,
    init_path_populations,
    make_context,
    split_coefficients,
    total_mass,
    zero_state,
)
from .network import (
    Junction,
    Network,
    Road,
    load_network,
    parse_network,
    reachable_set,
    serialize_network,
    validate_network,
)
from .routing import (
    DensityHistory,
    PolicyTable,
    RunningCost,
    UNIT_COST,
    ValueTable,
    WeightSample,
    empty_road_weights,
    extract_next,
    frozen_road_weights,
    road_weight_frozen,
    road_weight_spacetime,
    travel_time_frozen,
    travel_time_spacetime,
    value_basic,
    value_from_weights,
    value_highly_rational,
    value_rational,
)
from .scenario import (
    Inflow,
    Scenario,
    benchmark_network,
    benchmark_scenario,
    emit_benchmark,
    load_scenario,
    parse_scenario,
    serialize_scenario,
    validate_scenario,
)
from .simulate import RunResult, Simulation, run_basic, run_rational
from .solver import (
    FluxParams,
    Grid,
    build_grid,
    check_cfl,
    demand,
    flux,
    godunov_numerical_flux,
    interface_flux,
    population_share,
    scheme_step,
    supply,
    velocity,
)

__version__ = "0.1.0"
