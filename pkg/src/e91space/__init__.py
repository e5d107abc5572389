"""Entanglement-based key distribution with spatially localized detectors.

The package simulates the Ekert protocol end to end, models the spatial part
of the two-particle wavefunction to get the detection factor g, decides by
linear programming when an eavesdropper can forge the observed correlations
with a local deterministic-strategy mixture, and exposes the whole pipeline
on the command line.
"""

from .lhv import (
    Alphabet,
    BellCertificate,
    DeterministicStrategy,
    Feasible,
    FeasibilityResult,
    Infeasible,
    LpDiagnosticError,
    StrategyMixture,
    enumerate_strategies,
    intercept_resend_correlation,
    intercept_resend_outcomes,
    lhv_feasibility,
    max_forgeable_scale,
    sample_forged_outcomes,
)
from .protocol import (
    Analysis,
    ChannelKind,
    ChshEstimate,
    Decision,
    DecisionPolicy,
    ForgeInfeasibleError,
    KeyResult,
    RunReport,
    SessionConfig,
    SourceSpec,
    TrialRecord,
    classify_pairs,
    decide_security,
    estimate_chsh,
    extract_key,
    run_session,
    sift,
    simulate_trial,
)
from .spatial import (
    FORGEABLE_THRESHOLD,
    Box,
    Detectability,
    GaussianPacket,
    GEstimate,
    Sphere,
    classify_detectability,
    effective_correlation,
    evolve,
    g_analytic,
    g_monte_carlo,
    g_quadrature,
    region_mass,
)
from .spin import (
    CHSH_CLASSICAL_BOUND,
    CHSH_QUANTUM_BOUND,
    CorrelationMatrix,
    Direction,
    SettingSet,
    chsh_statistic,
    ekert_settings,
    sample_singlet_outcomes,
    singlet_correlation,
    singlet_joint_distribution,
    tsirelson_settings,
)

__all__ = [
    "Alphabet",
    "Analysis",
    "BellCertificate",
    "Box",
    "CHSH_CLASSICAL_BOUND",
    "CHSH_QUANTUM_BOUND",
    "ChannelKind",
    "ChshEstimate",
    "CorrelationMatrix",
    "Decision",
    "DecisionPolicy",
    "Detectability",
    "DeterministicStrategy",
    "Direction",
    "Feasible",
    "FeasibilityResult",
    "ForgeInfeasibleError",
    "FORGEABLE_THRESHOLD",
    "GEstimate",
    "GaussianPacket",
    "Infeasible",
    "KeyResult",
    "LpDiagnosticError",
    "RunReport",
    "SessionConfig",
    "SettingSet",
    "SourceSpec",
    "Sphere",
    "StrategyMixture",
    "TrialRecord",
    "chsh_statistic",
    "classify_detectability",
    "classify_pairs",
    "decide_security",
    "effective_correlation",
    "ekert_settings",
    "enumerate_strategies",
    "estimate_chsh",
    "evolve",
    "extract_key",
    "g_analytic",
    "g_monte_carlo",
    "g_quadrature",
    "intercept_resend_correlation",
    "intercept_resend_outcomes",
    "lhv_feasibility",
    "max_forgeable_scale",
    "region_mass",
    "run_session",
    "sample_forged_outcomes",
    "sample_singlet_outcomes",
    "sift",
    "simulate_trial",
    "singlet_correlation",
    "singlet_joint_distribution",
    "tsirelson_settings",
]

__version__ = "0.1.0"
