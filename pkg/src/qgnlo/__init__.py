"""Quasi-1D metric-graph spectra, transition moments, and intrinsic
hyperpolarizabilities, with Monte Carlo geometry search over topology
classes."""

from .graphs import (Chain, DeltaSpec, Edge, GraphError, GraphSpec,
                     MotifInstance, Vertex, build_graph, effective_structure,
                     infer_topology_class, motif_decompose)
from .secular import (SecularSystem, SolverError, SpectralSolution,
                      assemble_composite, assemble_system,
                      enumerate_special_modes, find_roots, secular_3star,
                      secular_4star_explicit, secular_Nstar,
                      secular_delta_wire, secular_lollipop, solve_amplitudes,
                      solve_degenerate, solve_graph)
from .states import (MomentTable, SumRuleDiagnostics, normalize,
                     overlap_matrix, solve_moments, sum_rule,
                     sum_rule_diagnostics, transition_moments)
from .tensors import (BetaTensor, GammaTensor, TensorSet,
                      ThreeLevelDiagnostics, beta_tensor, compute_tensor_set,
                      f_three_level, g_three_level, gamma_tensor,
                      optimal_orientation, rotate_beta,
                      rotate_beta_components, rotate_gamma,
                      rotate_gamma_components, tensor_norms, three_level)

__version__ = "0.1.0"
