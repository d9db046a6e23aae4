//! Suspension semiflows over the models: invariant sampling, correlation
//! decay, temporal distortion and the cohomology test.

mod cohomology;
mod correlation;
mod distortion;
mod suspension;

pub use cohomology::{
    cohomology_probe, uni_cohomology_consistency, CohomologyFit, ConsistencyRow, CONSISTENCY_DEGREE,
    CONSISTENCY_PAIRS,
};
pub use correlation::{
    correlation_series, decay_fit, CorrelationSeries, DecayFit, DecayVerdict, Observable, BATCHES,
    MIN_FIT_POINTS,
};
pub use distortion::{random_pair, temporal_distortion, DistortionValue, SkewGeometry, SkewPoint};
pub use suspension::{
    first_return_roof, sample_invariant, suspend, suspend_induced, FlowPoint, InducedSuspension,
    SuspensionSystem, STREAM_LEN,
};
