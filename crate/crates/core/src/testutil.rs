//! Shared fixtures for unit tests.

use crate::chain::{Dist, Kernel};
use crate::ratio::q;
use crate::rule::{independent_transitions_rule, TransitionRule};

/// Lazy symmetric walk on `{0, 1, 2}` with holding probability 1/2 at the
/// ends; stationary law uniform, reversible.
pub fn lazy_walk_kernel() -> Kernel {
    Kernel::new(vec![
        Dist::new(vec![q(1, 2), q(1, 2), q(0, 1)]).unwrap(),
        Dist::new(vec![q(1, 2), q(0, 1), q(1, 2)]).unwrap(),
        Dist::new(vec![q(0, 1), q(1, 2), q(1, 2)]).unwrap(),
    ])
    .unwrap()
}

/// Monotone two-label rule for the lazy walk: one label slides everything
/// down, the other slides everything up.
pub fn two_map_rule() -> TransitionRule {
    TransitionRule::new(
        3,
        vec!["down".into(), "up".into()],
        vec![q(1, 2), q(1, 2)],
        vec![vec![0, 0, 1], vec![1, 2, 2]],
    )
    .unwrap()
}

/// Walk on `{0, 1, 2}` that sticks at the ends; stationary law
/// `(2/5, 1/5, 2/5)`, reversible.
pub fn sticky_walk_kernel() -> Kernel {
    Kernel::new(vec![
        Dist::new(vec![q(3, 4), q(1, 4), q(0, 1)]).unwrap(),
        Dist::new(vec![q(1, 2), q(0, 1), q(1, 2)]).unwrap(),
        Dist::new(vec![q(0, 1), q(1, 4), q(3, 4)]).unwrap(),
    ])
    .unwrap()
}

/// Independent-transitions rule of the sticky walk (eight labels).
pub fn sticky_independent_rule() -> TransitionRule {
    independent_transitions_rule(&sticky_walk_kernel()).unwrap()
}

/// Dominating upward-drifting walk for the cross-monotone tests: lies
/// stochastically above the lazy walk row by row and is itself monotone;
/// stationary law `(1/7, 2/7, 4/7)`.
pub fn dominating_walk_kernel() -> Kernel {
    Kernel::new(vec![
        Dist::new(vec![q(1, 2), q(1, 2), q(0, 1)]).unwrap(),
        Dist::new(vec![q(1, 4), q(1, 4), q(1, 2)]).unwrap(),
        Dist::new(vec![q(0, 1), q(1, 4), q(3, 4)]).unwrap(),
    ])
    .unwrap()
}
