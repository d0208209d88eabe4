"""Off-diagonal series simulation of spin Hamiltonians with cost estimates.

Core pieces:

* ``spin`` and ``models``: Pauli algebra and the Rydberg / Floquet Ising models.
* ``pmr``: diagonal-plus-permutation decomposition ``H = D0 + sum_i D_i P_i``.
* ``divdiff``: divided differences of the exponential.
* ``ti_propagator`` and ``td_propagator``: truncated series propagators.
* ``truncation``: range cutoffs for long-range diagonal couplings.
* ``resources``: leading-order gate and qubit counts.
* ``oracles``: brute-force references used for verification.
"""

from .errors import (
    CapacityError,
    ConvergenceError,
    DDRangeError,
    DimensionError,
    PMRError,
    ValidationError,
)
from .spin import BasisState, DiagonalPolynomial, PauliTerm, pauli_product, pauli_to_dense, terms_to_dense
from .models import (
    FloquetTFIMParams,
    RydbergParams,
    build_rydberg_terms,
    build_tfim,
    lattice_edges,
    rydberg_alpha,
    rydberg_hamiltonian_terms,
)
from .pmr import PMRForm, TDPMRForm, delta_energy, pmr_decompose
from .divdiff import DDAccumulator, NodeSet, dd_exp, dd_exp_append, simplex_integral_mc
from .ti_propagator import assemble_segment, beta, evolve, select_Q, select_r
from .td_propagator import build_td_form, td_evolve, td_nodes, td_segment
from .truncation import cutoff_d0, cutoff_delta_d0, truncate_interaction
from .resources import (
    pmr_td_cost,
    pmr_ti_approx_cost,
    pmr_ti_cost,
    qhop_cost,
    qubitization_cost,
    sweep,
    verify_norm_bounds,
)

__version__ = "0.1.0"
