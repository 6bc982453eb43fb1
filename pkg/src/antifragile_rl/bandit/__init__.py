"""
Policy switching: discounted Thompson Sampling, ablation samplers,
synthetic regret runs and online deployment.
"""

from .samplers import (
    SAMPLER_KINDS,
    BetaArm,
    DtsConfig,
    posterior_stats,
    dts_select,
    dts_update,
    Sampler,
    DiscountedThompsonSampler,
    ThompsonSampler,
    EpsilonGreedySampler,
    UcbSampler,
    make_sampler
)
from .simulation import (
    load_calibration_fixture,
    RewardSchedule,
    RegretTrace,
    run_switching,
    run_many,
    mean_cumulative_regret,
    regret_growth_ratio
)
from .deployment import DeploymentResult, OnlineShiftFeed, deploy_switching

__all__ = [
    'SAMPLER_KINDS',
    'BetaArm',
    'DtsConfig',
    'posterior_stats',
    'dts_select',
    'dts_update',
    'Sampler',
    'DiscountedThompsonSampler',
    'ThompsonSampler',
    'EpsilonGreedySampler',
    'UcbSampler',
    'make_sampler',
    'load_calibration_fixture',
    'RewardSchedule',
    'RegretTrace',
    'run_switching',
    'run_many',
    'mean_cumulative_regret',
    'regret_growth_ratio',
    'DeploymentResult',
    'OnlineShiftFeed',
    'deploy_switching'
]
