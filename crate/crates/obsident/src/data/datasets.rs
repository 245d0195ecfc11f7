//! Embedded outbreak data.

use crate::estimation::{Dataset, DofConvention};

/// Influenza in a boarding school: daily number of boys confined to bed.
pub const BOARDING_SCHOOL: [f64; 14] = [
    1.0, 6.0, 26.0, 73.0, 222.0, 293.0, 258.0, 237.0, 191.0, 124.0, 68.0, 26.0, 10.0, 3.0,
];

/// Plague in Bombay: weekly deaths.
pub const BOMBAY: [f64; 31] = [
    8.0, 10.0, 12.0, 16.0, 24.0, 48.0, 51.0, 92.0, 124.0, 178.0, 280.0, 387.0, 442.0, 644.0, 779.0, 702.0, 695.0,
    870.0, 925.0, 802.0, 578.0, 404.0, 296.0, 162.0, 106.0, 64.0, 46.0, 35.0, 27.0, 28.0, 24.0,
];

/// School population.
pub const BOARDING_SCHOOL_N: f64 = 763.0;

fn daily(values: &[f64]) -> Vec<f64> {
    (0..values.len()).map(|i| i as f64).collect()
}

/// 14 days of prevalence, observed as `y = I` with `S0 = 762`, `I0 = 1`.
pub fn dataset_boarding_school() -> Dataset {
    Dataset::single(
        "boarding-school",
        daily(&BOARDING_SCHOOL),
        BOARDING_SCHOOL.to_vec(),
        0,
        DofConvention::KnownX0,
    )
    .expect("embedded data is valid")
}

/// 31 weeks of deaths, observed as `y = γI` with unknown initial state.
pub fn dataset_bombay() -> Dataset {
    Dataset::single("bombay", daily(&BOMBAY), BOMBAY.to_vec(), 0, DofConvention::EstimatedX0)
        .expect("embedded data is valid")
}
