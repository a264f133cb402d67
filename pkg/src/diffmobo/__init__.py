"""Diffusion-model-guided multi-objective Bayesian optimization.

Core pieces: a benchmark problem suite, per-objective GP surrogates with
analytic mean gradients, a denoising diffusion model with entropy-weighted
gradient guidance, hypervolume-greedy batch selection, and an experiment
harness. A FastAPI service (``diffmobo.service``) wraps the harness for
long-running jobs, with ``diffmobo.cli`` as a thin client.
"""

from .diffusion import (
    DenoiseNet,
    GenerationConfig,
    NoiseSchedule,
    TrainConfig,
    denoise_step,
    forward_sample,
    generate_composite,
    guided_denoise_step,
    make_net,
    make_schedule,
    predict_noise,
    train,
)
from .guidance import (
    entropy_weights,
    extract_training_set,
    make_guidance,
    sde_fitness,
    weighted_gradient,
)
from .indicators import (
    dominates,
    hypervolume,
    hypervolume_mc,
    nondominated_filter,
    reference_point,
)
from .optimizer import (
    RunConfig,
    RunResult,
    SwitchState,
    batch_select,
    derive_seed,
    ga_offspring,
    run,
    update_switch,
)
from .problems import (
    Archive,
    ProblemSpec,
    evaluate,
    latin_hypercube,
    make_problem,
    register_problem,
    registered_problems,
)
from .surrogate import (
    GPModel,
    KernelHyper,
    fit_gp,
    posterior,
    posterior_batch,
    posterior_mean_gradient,
)

__version__ = "0.1.0"
