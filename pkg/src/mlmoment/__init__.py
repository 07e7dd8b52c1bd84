"""Multi-level iterative solvers for moment problems on nested spaces of
trigonometric polynomials, with an irregular-sampling reconstruction
harness."""

from .errors import (ConfigError, ConvergenceError, LevelTooLargeError, NyquistViolatedError,
                     SamplingSetError, SingularNormalMatrixError, SizeMismatchError,
                     ZeroDirectionError)
from .experiment import (ExperimentConfig, RunReport, add_noise, emit_report, generate_truth,
                         run_experiment)
from .operators import (MomentOperator, adjoint, analyze, empirical_frame_bounds, frame_apply,
                        make_operator, power_iteration)
from .oracle import DenseOperator, dense_frame_bounds, dense_least_squares, densify
from .sampling import (FrameBounds, SamplingSet, build_sampling_set, generate_jittered_set,
                       nyquist_level, theoretical_frame_bounds)
from .solvers import (MultiLevelResult, StopConfig, cgne_step, global_stop, landweber_step,
                      level_stop, raw_measurements, run_fixed_level, run_level, run_multilevel,
                      tail_update)
from .spaces import (GridSignal, Spectrum, dirichlet_kernel, eval_at, grid_points, project,
                     spectrum, synthesize, tail_energy)

__version__ = "0.1.0"
