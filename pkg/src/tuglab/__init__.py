"""Tug-of-war games with noise: simulation, density analysis, and bounds.

The package splits into: the game engine and strategies (game, strategies),
the coupled cylinder walk and its estimators (cylinder), the ball-sum
density toolbox (density), closed-form inequalities and constants (bounds),
grid value iteration (dpp), and experiment orchestration (harness, cli).
"""

from .bounds import (
    PaperConstants,
    compute_paper_constants,
    gaussian_tail,
    hoeffding_bound,
    lemmaA_clock_bounds,
    nu_from_probs,
    reflection_identity_check,
    sin_inequality_check,
)
from .cylinder import (
    CylinderParams,
    estimate_bottom_exit,
    estimate_c_np,
    estimate_clock_window,
    estimate_event_B,
    run_cylinder_walk,
    theorem3_experiment,
)
from .density import (
    BesselTable,
    bessel_product_check,
    bessel_zeros,
    char_fn,
    density1d_exact,
    density1d_origin_bound,
    density_origin_inversion,
    lower_bound_check,
    mc_radial_profile,
    paper_constants,
)
from .dpp import GridValueField, compare_mc_vs_dpp, solve_dpp
from .errors import (
    AccuracyError,
    ConfigError,
    EstimationFailureError,
    NonConvergenceError,
    NumericError,
    ParameterError,
    StrategyViolationError,
    TruncationError,
    TugLabError,
)
from .game import (
    CoinOutcome,
    GameParams,
    GameTrace,
    compute_probabilities,
    draw_coin,
    estimate_value,
    play_episode,
    step,
)
from .geometry import (
    Domain,
    annulus,
    ball,
    box,
    box_minus_cone,
    from_descriptor,
    half_space_cap,
    interval,
)
from .harness import (
    ExperimentConfig,
    ResultRecord,
    estimate_measure_density,
    run_eps_ladder,
    run_regularity_experiment,
    write_records,
)
from .strategies import (
    CancellationStrategy,
    MirrorStrategy,
    PullStrategy,
    Strategy,
    adversary_roster,
    cancellation_strategy,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "BesselTable",
    "CancellationStrategy",
    "CoinOutcome",
    "ConfigError",
    "CylinderParams",
    "Domain",
    "EstimationFailureError",
    "ExperimentConfig",
    "GameParams",
    "GameTrace",
    "GridValueField",
    "MirrorStrategy",
    "NonConvergenceError",
    "NumericError",
    "PaperConstants",
    "ParameterError",
    "PullStrategy",
    "ResultRecord",
    "Strategy",
    "StrategyViolationError",
    "TruncationError",
    "TugLabError",
    "adversary_roster",
    "annulus",
    "ball",
    "bessel_product_check",
    "bessel_zeros",
    "box",
    "box_minus_cone",
    "cancellation_strategy",
    "char_fn",
    "compare_mc_vs_dpp",
    "compute_paper_constants",
    "compute_probabilities",
    "density1d_exact",
    "density1d_origin_bound",
    "density_origin_inversion",
    "draw_coin",
    "estimate_bottom_exit",
    "estimate_c_np",
    "estimate_clock_window",
    "estimate_event_B",
    "estimate_measure_density",
    "estimate_value",
    "from_descriptor",
    "gaussian_tail",
    "half_space_cap",
    "hoeffding_bound",
    "interval",
    "lemmaA_clock_bounds",
    "lower_bound_check",
    "mc_radial_profile",
    "nu_from_probs",
    "paper_constants",
    "play_episode",
    "reflection_identity_check",
    "run_cylinder_walk",
    "run_eps_ladder",
    "run_regularity_experiment",
    "sin_inequality_check",
    "solve_dpp",
    "step",
    "theorem3_experiment",
    "write_records",
]
