//! Independent oracles and randomized checks.

pub mod battery;
pub mod comparison;
pub mod inequalities;
pub mod radial;
pub mod uniqueness;

pub use battery::{run_battery, BatteryOptions, BatteryReport, SuiteResult};
pub use comparison::{comparison_experiment, comparison_suite, ComparisonSuiteReport, OrderingReport};
pub use inequalities::{empirical_ilt_epsilon, ilt_check, IltCheck};
pub use radial::{radial_shoot, RadialProfile};
pub use uniqueness::{uniqueness_experiment, UniquenessReport};
