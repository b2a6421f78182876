"""Continuity-method laboratory for Calabi-symmetric metrics on X_{n,k}."""
from .analysis import (BoundReport, InsufficientSamples, RateFit, RunSeries, Verdict, VerdictConfig,
                       case_verdict, fit_rate, summarize, verify_bounds)
from .cohomology import (CaseReport, ClassState, InvalidParams, OutOfRange, SurfaceParams, class_at,
                         classify, singular_time)
from .curvature import (CollapseDiagnostics, CurvatureSample, collapse_diagnostics, curvature_profile,
                        scalar_cross_checks)
from .profile import (Grid, InvalidCoefficients, NonAdmissibleProfile, RadialProfile, derivatives,
                      reference_profile, validate_calabi)
from .runner import RunConfig, execute, write_artifacts
from .solver import (ContinuationStall, SolverConfig, continuation, newton_step, normalize_profile,
                     residual)

__version__ = "0.1.0"
