//! Young-tower inducing scheme on a cell grid: constants, the generation
//! step, and the empirical checks of every inequality used along the way.

mod constants;
mod edt;
mod partition;
mod reports;

pub use constants::{
    annulus_index, annulus_ratio, annulus_ratio_sup, derive_constants, least_l, AmbientSystem,
    ConstantOverrides, InducingConstants,
};
pub use edt::squared_distance;
pub use partition::{
    advance_generation, build_inducing, CellGrid, Component, GenerationRecord, InducingResult,
    PartitionState, FINISHED, LIVE, NO_COMPONENT, OUTSIDE,
};
pub use reports::{
    collar_census, keyfact_report, label_counts, markov_check, ratio_report, tail_fit,
    tail_fit_table, Collar, CollarCensus, KeyfactReport, MarkovReport, MarkovVerdict, RatioReport,
    RatioRow, TailFit, GRID_SLACK,
};
