from .curvature import (
    CURVATURE_EPS,
    CurvatureBuffer,
    CurvaturePair,
    DenseInverseHessian,
    IdentityHessian,
    dense_from_pairs,
    initial_scaling,
    naq_hessian_update,
    two_loop_direction,
)
from .methods import (
    NAQ,
    ONAQ,
    SGD,
    SVRG,
    SVRG2,
    SVRNAQ,
    Adam,
    BatchSampler,
    DivergenceError,
    EpochReport,
    Optimizer,
    make_hessian,
    svrg_reduced_gradient,
)
from .schedule import StepSchedule, step_size
