"""ranswitch: randomly switched systems -- simulation, certificates, synthesis."""

from .switching import (
    ExponentialHolding,
    UniformHolding,
    PointMassHolding,
    TabulatedHolding,
    IidJumps,
    MarkovJumps,
    SwitchingLaw,
    SwitchingPath,
    sample_path,
)
from .dynamics import (
    LinearField,
    PolynomialField,
    ClosedLoopField,
    SubsystemFamily,
    Trajectory,
    evaluate_field,
    integrate,
    norm_series,
)
from .certificates import (
    QuadraticLyapunov,
    PolynomialLyapunov,
    CertificateFamily,
    lyapunov_value,
    lie_derivative,
    extract_lambda_quadratic,
    extract_lambda_matrix,
    extract_mu,
    strictify_mu,
    verify_pointwise,
    default_sample_points,
)
from .conditions import (
    ConditionVerdict,
    check_eh,
    check_uh,
    check_gh,
    eta_kappa,
    mean_bound_uh,
)
from .synthesis import (
    phi,
    universal_control,
    UniversalController,
    LinearGainController,
    PolynomialMap,
    PolynomialController,
    closed_loop_field,
    verify_clf_condition,
    verify_closed_loop_decrease,
    small_control_probe,
)
from .montecarlo import (
    Scenario,
    EnsembleStats,
    run_ensemble,
    decay_check,
    gasp_estimate,
    wilson_interval,
)

__version__ = "0.1.0"
