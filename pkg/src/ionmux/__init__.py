"""Multiplexed heralded-entanglement rate modeling for a trapped-ion
network node: effective branching ratios of the multiple-excitation
scheme, protocol timelines, entanglement rates and enhancement factors,
memory survival, and two-node coincidence heralding."""

__version__ = "0.1.0"

from .atomic import (AtomicParams, LevelState, PopulationVector,  # noqa: F401
                     excitation_map, pump_map, shelve_map)
from .engine import (EmissionProfile, PulseProgram, Strategy,  # noqa: F401
                     absorbing_distribution, effective_branching_ratio,
                     monte_carlo_oracle, run_program)
from .timing import (EnhancementCurve, LinkParams, enhancement,  # noqa: F401
                     enhancement_inhomogeneous, n_half_duty, t_eff)
from .protocol import (EfficiencyChain, MemoryParams, ProtocolSpec,  # noqa: F401
                       RateReport, link_efficiency, memory_fidelity,
                       memory_survival, simulate_rates)
from .optimize import (OptimizationProblem, OptimizationResult,  # noqa: F401
                       solve_dp, solve_exhaustive)
from .bsm import (NodePair, simulate_ion_ion, sweep_enhancement,  # noqa: F401
                  window_coincidence)
