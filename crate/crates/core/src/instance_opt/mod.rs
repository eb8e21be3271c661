//! Instance-optimal search: the best tree of bounded depth under a natural
//! error metric, the smallest depth meeting an error target, and the exact
//! recovery of a bounded-error tree's function.

mod find;
mod metric;
mod nisan;

pub use find::{find, instance_opt, FindResult, Finder};
pub use metric::{metric_best_constant, metric_eval, ErrorMetric, MetricKind, Source};
pub use nisan::{
    bayes_error_of_target, check_bounded_error, nisan, verify_exact, NisanResult, MAX_ENUM_VARS,
};
