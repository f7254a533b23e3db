"""qdeloc: Hilbert-space delocalization under brick-wall random qudit circuits.

Three engines compute how fast an initially localized state spreads over the
computational basis:

* :mod:`qdeloc.exactsim` - exact statevector Monte Carlo over gate ensembles;
* :mod:`qdeloc.replicatn` - exact gate-averaged contraction of the replica
  tensor network (one q!-dimensional spin per site);
* :mod:`qdeloc.oracles` - closed-form stationary values, fluctuations, and
  the absorbing-walk purity solution.

:mod:`qdeloc.harness` orchestrates experiments, fits the exponential
saturation law of the participation entropy, and cross-checks the engines.
"""

__version__ = "0.1.0"

from .errors import (CapacityError, ConfigurationError, DegeneracyError,
                     DomainError, FitWindowError, LayoutError, QdelocError,
                     UnsupportedRegionError)
from .exactsim import (BrickwallLayout, GateSampler, QuditState, apply_gate,
                       ensemble_run, evolve, haar_gate, participation, purity)
from .harness import DecayFit, ExperimentConfig, ObservableSeries, crosscheck, fit_decay, run
from .oracles import (AsymptoticConstants, HaarStationary, RandomWalkSolution,
                      decay_base, delocalization_time, entanglement_velocity,
                      haar_entropy, haar_ipr, haar_ipr_std, hopping_weight,
                      predicted_deficit, walk_absorption, walk_purity)
from .permutations import (Permutation, PermutationTable, WeingartenTable,
                           build_group, dual_weight, weingarten)
from .replicatn import (BoundaryVectors, ReplicaMPS, ReplicaSite, TwoSiteTransfer,
                        apply_layer, averaged_ipr, averaged_purity, build_transfer,
                        sum_over_bipartitions)

__all__ = [
    "__version__",
    # errors
    "QdelocError", "CapacityError", "ConfigurationError", "DegeneracyError",
    "DomainError", "FitWindowError", "LayoutError", "UnsupportedRegionError",
    # permutations
    "Permutation", "PermutationTable", "WeingartenTable", "build_group",
    "weingarten", "dual_weight",
    # exactsim
    "QuditState", "BrickwallLayout", "GateSampler", "haar_gate", "apply_gate",
    "evolve", "participation", "purity", "ensemble_run",
    # replicatn
    "ReplicaSite", "TwoSiteTransfer", "BoundaryVectors", "ReplicaMPS",
    "build_transfer", "apply_layer", "averaged_ipr", "averaged_purity",
    "sum_over_bipartitions",
    # oracles
    "HaarStationary", "RandomWalkSolution", "AsymptoticConstants",
    "haar_ipr", "haar_entropy", "haar_ipr_std", "hopping_weight", "decay_base",
    "entanglement_velocity", "predicted_deficit", "delocalization_time",
    "walk_absorption", "walk_purity",
    # harness
    "ExperimentConfig", "ObservableSeries", "DecayFit", "run", "fit_decay",
    "crosscheck",
]
