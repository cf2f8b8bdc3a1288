"""lpcorrupt: uniform p-norm ball corruptions, robustness metrics, ball geometry.

Subpackages:

* sampler  — uniform ball/sphere sampling for 0 <= p <= inf, noise application
* sets     — built-in and file-defined corruption sets (test grids, training mixes)
* metrics  — mCE / mCE_xN / mCE_Lp / iCE from error tables or prediction logs
* geometry — ball volumes, volume factors, Monte Carlo overlap curves
* pipeline — reproducible dataset corruption with manifests
* cli      — the ``lpcorrupt`` command line
"""

from .images import ImageTensor
from .norms import PNorm, lp_distance, lp_norm
from .rng import DEFAULT_SEED, RngStream
from .sampler import (
    BALL,
    IDENTITY,
    SPHERE,
    CorruptionSpec,
    NoiseVector,
    RadialMode,
    apply_noise,
    sample,
    sample_finite_p,
    sample_l0,
    sample_linf,
)
from .sets import (
    BUILTIN_NAMES,
    CorruptionSet,
    EpsilonGrid,
    SpecGroup,
    builtin_set,
    draw_training_spec,
    expand_grid,
    parse_set_file,
    serialize_set,
)
from .metrics import (
    ErrorCell,
    ErrorTable,
    MetricReport,
    compute_report,
    errors_from_log,
    imperceptible_corruption_error,
    mean_corruption_error,
    mean_corruption_error_ex_noise,
    mean_corruption_error_lp,
)
from .geometry import (
    BallSpec,
    OverlapCurve,
    concentration_check,
    log_volume,
    mc_volume,
    overlap_curve,
    volume_factor,
)
from .pipeline import (
    CorruptionManifest,
    Dataset,
    corrupt_dataset,
    generate_corruptions,
    plan_corruption,
    regenerate,
    verify_distance,
)

__version__ = "0.1.0"
