"""remlab: exhaustive random energy model simulation and verification.

Simulates the random energy model with exponential-type site
distributions (density proportional to exp(-|x|**alpha / (alpha *
n**(alpha-1)))), streams over all 2**n configurations, and checks the
output against the exact limit laws: free energy and phase transition,
large deviations of the energy per site, Gibbs weight spectra against
Poisson-Dirichlet laws, and Poisson convergence of extreme energies.
"""

__version__ = "0.1.0"

from remlab.engine import (
    GibbsSpectrum,
    ReplicaResult,
    ReplicaSpec,
    energy_at,
    energy_block,
    exceedance_count,
    exceedance_positions,
    free_energy,
    log_sum_exp_stream,
    rate_estimate,
    run_replica,
)
from remlab.environment import Environment
from remlab.experiments import CheckResult, RunOutcome, run_experiment
from remlab.manifest import ExperimentManifest, ManifestError, PDBlock
from remlab.pointprocess import (
    PDParams,
    WeightSequence,
    l1_distance,
    sample_pd_poisson,
    sample_pd_stick,
    sample_poisson_points,
)
from remlab.stats import (
    ReplicaSummary,
    TestReport,
    chi_square_gof,
    ks_one_sample,
    ks_two_sample,
    summarize,
)
from remlab.theory import (
    LOG2,
    PhaseDiagnosis,
    Regime,
    classify_phase,
    critical_beta,
    free_energy_limit,
    poisson_count_pmf,
    rate_function,
    shift_constant,
    truncated_exp_moment,
)

__all__ = [
    "CheckResult",
    "Environment",
    "ExperimentManifest",
    "GibbsSpectrum",
    "LOG2",
    "ManifestError",
    "PDBlock",
    "PDParams",
    "PhaseDiagnosis",
    "Regime",
    "ReplicaResult",
    "ReplicaSpec",
    "ReplicaSummary",
    "RunOutcome",
    "TestReport",
    "WeightSequence",
    "chi_square_gof",
    "classify_phase",
    "critical_beta",
    "energy_at",
    "energy_block",
    "exceedance_count",
    "exceedance_positions",
    "free_energy",
    "free_energy_limit",
    "ks_one_sample",
    "ks_two_sample",
    "l1_distance",
    "log_sum_exp_stream",
    "poisson_count_pmf",
    "rate_estimate",
    "rate_function",
    "run_experiment",
    "run_replica",
    "sample_pd_poisson",
    "sample_pd_stick",
    "sample_poisson_points",
    "shift_constant",
    "summarize",
    "__version__",
]
