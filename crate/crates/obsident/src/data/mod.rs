//! Embedded datasets, case studies and plot data.

mod case_study;
mod datasets;
mod plot;

pub use case_study::{
    run_case_study, CaseStudy, CaseStudyId, CaseStudyReport, CaseStudyRun, Check, ExpectedValue, Rule,
};
pub use datasets::{dataset_bombay, dataset_boarding_school, BOARDING_SCHOOL, BOARDING_SCHOOL_N, BOMBAY};
pub use plot::{emit_plot_data, Table};
