//! Twisted transfer operators on a collocation grid, b-norms and the
//! oscillatory cancellation machinery.

mod cancel;
mod contraction;
mod grid;
mod operator;
mod probes;
mod uni;
mod zeta;

pub use cancel::{
    assign_types, ball_family, cancellation_domination, chi_cutoff, cone_check, cone_iterate,
    damped_step, prop_fed_probe, random_cone_pair, Ball, BallFamily, BallType, CancelSetup,
    ChiCutoff, ConeCheck, ConePair, ConeRun, ConeStep, DominationReport, FedReport, Selection,
    DEFAULT_C4, DEFAULT_CANCEL_DELTA,
};
pub use contraction::{
    decay_window, norm_contraction_probe, test_dictionary, ContractionReport, ContractionRow,
    DecayWindow, DICTIONARY_NOISE,
};
pub use grid::GridFunction;
pub use operator::{
    apply_normalized, apply_normalized_power, apply_twisted, apply_twisted_batch, apply_word_fn,
    holder_norms, leading_eigendata, normalized_words_fn, words_of_length, EigenData,
    EigenOptions, HolderNorms, NormalizedOperator, TransferOperator, TwistParameter, DEFAULT_ABSCISSA, TAIL_TOLERANCE,
};
pub use probes::{lasota_yorke_probe, mass_conservation, LasotaYorkeReport, MassReport};
pub use uni::{psi, psi_grad, uni_estimate, UniReport};
pub use zeta::{hurwitz_zeta, ZetaValue};
