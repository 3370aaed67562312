"""Local exact controllability of semilinear evolution systems.

Finite-dimensional spectral models x' = A x + f(x) + B u are simulated
through their mild (variation-of-constants) form and steered to a target
state by Newton-type corrections built on the controllability Gramian.
The ``verify`` module measures the constants behind local steering.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlowUp,
    BoundViolation,
    ConfigError,
    DegenerateFit,
    HypothesisError,
    HypothesisFailed,
    NoConvergence,
    SemictrlError,
    SemigroupError,
    SingularGramian,
    SolverError,
    Stall,
)
from .linearized import gramian, lti_controllability_map, materialize_L, min_norm_control, solve_linearized  # noqa: E402
from .mild import PicardConfig, solution_map, solve_mild  # noqa: E402
from .model import (  # noqa: E402
    ControlSignal,
    CustomMap,
    DenseMatrix,
    DiagonalSpectral,
    PointwisePolynomial,
    SemilinearSystem,
    TimeGrid,
    Trajectory,
    ZeroMap,
    dirichlet_laplacian,
)
from .semigroup import SemigroupModel, build_semigroup  # noqa: E402
from .steering import SteeringResult, reachable_radius_probe, steer  # noqa: E402
