"""Random walks on hyperbolic groups and the probability of landing on a
proper power."""

__version__ = "0.1.0"

from .groups import (  # noqa: E402
    Ball,
    FreeGroup,
    FreeProductCyclics,
    GroupElement,
    GroupModel,
    SmallCancellationBall,
    enumerate_ball,
    parse_group,
    surface_group,
)
from .walk import (  # noqa: E402
    Distribution,
    StepMeasure,
    lazy_uniform,
    n_step_distribution,
    parse_measure,
    validate_measure,
)

__all__ = [
    "Ball", "Distribution", "FreeGroup", "FreeProductCyclics", "GroupElement", "GroupModel",
    "SmallCancellationBall", "StepMeasure", "enumerate_ball", "lazy_uniform",
    "n_step_distribution", "parse_group", "parse_measure", "surface_group", "validate_measure",
]
