//! Response scoring and the grounded-versus-ungrounded comparison.

pub mod asp;
pub mod experiment;
pub mod stats;

pub use asp::{asp, score_response, sentence_score, ResponseScore};
pub use experiment::{
    run_comparison, ArmResult, Cell, ComparisonOutcome, ExperimentGrid, ExperimentOptions, Observation,
};
pub use stats::{
    critical_values, paired_ttest, pearson, t_from_summary, StudentT, TTestReport,
};
