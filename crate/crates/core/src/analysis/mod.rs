//! Checks of the inequalities and diagnostic quantities that govern
//! convergence and its failure.

pub mod fit;
pub mod gradient;
pub mod necessary;
pub mod random;
pub mod ratio;
pub mod report;
pub mod transitions;

pub use fit::{fit_rate, Observable, SegmentFit};
pub use gradient::{grad_inequality_general, grad_inequality_pl, GradCheckReport};
pub use necessary::{check_necessary_condition, NecessaryCondition};
pub use ratio::{phase_ratio, ratio_rate, ratio_residual};
pub use report::{CheckLine, Report};
pub use transitions::{
    check_h_bounds, check_um_bounds, fbar_amplitude, h_decomposition, oscillation_summary, transition_indices,
    transition_times, HBoundCheck, HDecomposition, OscillationSummary, TransitionIndices, UmBoundReport,
};
