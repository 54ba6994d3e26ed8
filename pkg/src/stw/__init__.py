"""Scale-weighted tails: dyadic averaging, weighted limits, and shells.

The package studies bounded data through a ladder of dyadic scales: a
weight profile g fixes how much each scale counts, a synthesis operator
turns sequences into step functions on the half-line, a dyadic averaging
map reads them back per scale, and weighted Cesaro means compress the
scale ladder into limit functionals.  On top of that sit envelope and
verdict reports for almost convergence, scale-invariant functionals with
their classical ratio form, transport between weight profiles, and a
shell-by-shell comparison of model operators against their symbols.
"""

from .errors import AssertionFailure, DomainError, NumericError, StwError
from .seqcore import (DyadicSequence, ValueEnvelope, Verdict, Z_MINUS,
                      Z_PLUS, Z_TWO_SIDED, almost_convergent,
                      banach_envelope, invariance_residual, named_sequence,
                      ordering_numbers, sequence_from_spec, shift,
                      tail_envelope, window_average)
from .weights import (Weight, doubling_envelope, dyadic_sum_ratio,
                      get_weight, l1_check, primitive_eval, rv_check,
                      rv_tail_ratio, weight_names)
from .transforms import (MuFunction, StepFunction, cesaro_g, cesaro_inverse,
                         inv_residual_seq, lg_norm, log_mean, mu_from_spec,
                         n_map, phi_g, quasinorm_Lg, rearrange,
                         split_at_level, synth_D, transport_pushforward)
from .functionals import (dixmier_classic, dixmier_envelope, measurability,
                          support_split, transported_envelope)
from .connes import (ModelOperator, SymbolGrid, connes_measurability,
                     decay_estimate, diagonal_vs_symbol, modulation_check,
                     shell_integral, trace_formula_check)

__version__ = "0.1.0"

__all__ = [
    "AssertionFailure", "DomainError", "NumericError", "StwError",
    "DyadicSequence", "ValueEnvelope", "Verdict",
    "Z_MINUS", "Z_PLUS", "Z_TWO_SIDED",
    "almost_convergent", "banach_envelope", "invariance_residual",
    "named_sequence", "ordering_numbers", "sequence_from_spec", "shift",
    "tail_envelope", "window_average",
    "Weight", "doubling_envelope", "dyadic_sum_ratio", "get_weight",
    "l1_check", "primitive_eval", "rv_check", "rv_tail_ratio",
    "weight_names",
    "MuFunction", "StepFunction", "cesaro_g", "cesaro_inverse",
    "inv_residual_seq", "lg_norm", "log_mean", "mu_from_spec", "n_map",
    "phi_g", "quasinorm_Lg", "rearrange", "split_at_level", "synth_D",
    "transport_pushforward",
    "dixmier_classic", "dixmier_envelope", "measurability", "support_split",
    "transported_envelope",
    "ModelOperator", "SymbolGrid", "connes_measurability", "decay_estimate",
    "diagonal_vs_symbol", "modulation_check", "shell_integral",
    "trace_formula_check",
    "__version__",
]
