"""Sequential Monte Carlo parameter estimation with strong or weak simulators."""

from lfpe.core import (
    BudgetExhausted,
    DegenerateCovariance,
    ParticleCloud,
    Prior,
    RngStream,
    SingularInformation,
    StrongModel,
    UniformPrior,
    WeakModel,
    ZeroPosterior,
    effective_sample_size,
    init_cloud,
)
from lfpe.likelihood_free import (
    ALE,
    BackendConfig,
    CallCounter,
    FixedM,
    SingleSample,
    add_gamma_estimate,
    beta_posterior_variance,
    run_lfpe,
)
from lfpe.models import PhotodetectorModel
from lfpe.smc import (
    PosteriorSummary,
    ResampleConfig,
    bayes_update,
    maybe_resample,
    posterior_summary,
    run_strong,
)

__version__ = "0.1.0"
