from ._core import (
    Problem,
    ProblemTemplate,
    Profile,
    __version__,
    cole_hopf_reference,
    grid_nodes,
    poincare_rate,
    run_command,
    solve_forward,
    v_norm,
)

__all__ = [
    "Problem",
    "ProblemTemplate",
    "Profile",
    "__version__",
    "cole_hopf_reference",
    "grid_nodes",
    "poincare_rate",
    "run_command",
    "solve_forward",
    "v_norm",
]
