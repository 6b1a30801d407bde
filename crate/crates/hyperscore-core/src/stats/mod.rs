//! Benchmark statistics: correlation metrics, the nonlinear mapping stage,
//! subjective-score screening, MOS computation, report tables, and the
//! view-averaged cosine baseline. All statistics run in `f64`.

mod baseline;
mod corr;
mod logistic;
mod screen;
mod tables;

pub use baseline::baseline_cosine_score;
pub use corr::{average_ranks, krcc, plcc, srcc};
pub use logistic::{logistic_map, LogisticFit};
pub use screen::{
    compute_mos, screen_bt500, screen_pipeline, screen_trapping, AnnotationMatrix, Bt500Config,
    RejectedSubject, SampleLabel, ScreeningOutcome, ScreeningReport, TrappingConfig, TrappingInfo,
};
pub use tables::{
    correlation_table, grouped_correlation_table, method_category_table, CorrelationRow, ScoreCell,
};
