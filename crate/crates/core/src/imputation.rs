//! Conditional laws of driving variables given observed transitions.
//!
//! Given a backward-generated trajectory, each step's driving value is
//! imputed independently from the law of `U` conditioned on
//! `phi(x_prev, U) = x_next`: the rule's measure restricted to the matching
//! labels and renormalized by the transition probability. For the
//! independent-transitions rule the same law factors by state coordinate,
//! which avoids materializing the full label set.

use num_traits::Zero;

use crate::chain::{CatSampler, Dist, Kernel, StateIx};
use crate::detection::{DrivingSequence, Trajectory};
use crate::error::{Error, Result};
use crate::ratio::Q;
use crate::rng::RngStream;
use crate::rule::{kernel_from_rule, LabelIx, TransitionRule};

/// Exact law of one driving value conditioned on a transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImputedDist {
    support: Vec<LabelIx>,
    weights: Vec<Q>,
}

impl ImputedDist {
    pub fn support(&self) -> &[LabelIx] {
        &self.support
    }

    pub fn weights(&self) -> &[Q] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (LabelIx, &Q)> + '_ {
        self.support.iter().copied().zip(self.weights.iter())
    }

    pub fn sample(&self, rng: &mut RngStream) -> LabelIx {
        self.support[CatSampler::new(&self.weights).sample(rng)]
    }
}

/// Law of `U` given `phi(x_prev, U) = x_next`:
/// `w(u) = mu(u) / k(x_prev, x_next)` over the matching labels.
pub fn impute_dist(
    rule: &TransitionRule,
    x_prev: StateIx,
    x_next: StateIx,
) -> Result<ImputedDist> {
    let k = kernel_from_rule(rule);
    impute_dist_given_kernel(rule, &k, x_prev, x_next)
}

/// As [`impute_dist`] with the rule's kernel precomputed by the caller;
/// used by the samplers and the oracle to avoid rebuilding it per step.
pub fn impute_dist_given_kernel(
    rule: &TransitionRule,
    rule_kernel: &Kernel,
    x_prev: StateIx,
    x_next: StateIx,
) -> Result<ImputedDist> {
    let mass = rule_kernel.get(x_prev, x_next);
    if mass.is_zero() {
        return Err(Error::ImpossibleTransition {
            from: x_prev,
            to: x_next,
        });
    }
    let mut support = Vec::new();
    let mut weights = Vec::new();
    for u in 0..rule.n_labels() {
        if rule.apply(x_prev, u) == x_next {
            support.push(u);
            weights.push(rule.mu(u) / mass);
        }
    }
    Ok(ImputedDist { support, weights })
}

/// Imputes a full driving sequence along a trajectory, one independent draw
/// per step.
pub fn impute_sequence(
    rule: &TransitionRule,
    traj: &Trajectory,
    rng: &mut RngStream,
) -> Result<DrivingSequence> {
    let k = kernel_from_rule(rule);
    let mut labels = Vec::with_capacity(traj.t());
    for s in 1..=traj.t() {
        let d = impute_dist_given_kernel(rule, &k, traj.state(s - 1), traj.state(s))?;
        labels.push(d.sample(rng));
    }
    Ok(DrivingSequence::new(labels))
}

/// Factored imputed law for the independent-transitions rule of a kernel:
/// one marginal per state coordinate, never materializing the label set. A
/// sampled value is the full transition map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactoredImputedDist {
    marginals: Vec<Dist>,
}

impl FactoredImputedDist {
    pub fn marginals(&self) -> &[Dist] {
        &self.marginals
    }

    /// Draws each coordinate independently from its marginal.
    pub fn sample(&self, rng: &mut RngStream) -> Vec<StateIx> {
        self.marginals.iter().map(|m| m.sample(rng)).collect()
    }

    /// Exact weight of a full map under the factored law.
    pub fn weight_of(&self, map: &[StateIx]) -> Q {
        self.marginals
            .iter()
            .zip(map)
            .map(|(m, &y)| m.get(y).clone())
            .product()
    }

    /// Enumerates the support as (map, weight) pairs.
    pub fn support_maps(&self) -> Vec<(Vec<StateIx>, Q)> {
        let mut out = vec![(Vec::new(), Q::from_integer(1.into()))];
        for m in &self.marginals {
            let mut next = Vec::with_capacity(out.len() * 2);
            for (prefix, w) in &out {
                for y in m.support() {
                    let mut p = prefix.clone();
                    p.push(y);
                    next.push((p, w * m.get(y)));
                }
            }
            out = next;
        }
        out
    }
}

/// Imputed law for the independent-transitions rule: coordinate `x_prev`
/// becomes the point mass at `x_next`; every other coordinate keeps its
/// unconditioned row law `k(x, .)`.
pub fn impute_independent(
    k: &Kernel,
    x_prev: StateIx,
    x_next: StateIx,
) -> Result<FactoredImputedDist> {
    if k.get(x_prev, x_next).is_zero() {
        return Err(Error::ImpossibleTransition {
            from: x_prev,
            to: x_next,
        });
    }
    let n = k.n_states();
    let marginals = (0..n)
        .map(|x| {
            if x == x_prev {
                Dist::point(n, x_next)
            } else {
                k.row(x).clone()
            }
        })
        .collect();
    Ok(FactoredImputedDist { marginals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{q, q0, q1};
    use crate::rule::independent_transitions_rule;
    use crate::testutil::{lazy_walk_kernel, two_map_rule};

    #[test]
    fn two_map_imputation_is_deterministic_where_forced() {
        let rule = two_map_rule();
        let d = impute_dist(&rule, 1, 0).unwrap();
        assert_eq!(d.support(), &[0]);
        assert_eq!(d.weights(), &[q1()]);
    }

    #[test]
    fn single_label_rule_imputes_its_label() {
        let rule = crate::rule::TransitionRule::new(
            2,
            vec!["swap".into()],
            vec![q1()],
            vec![vec![1, 0]],
        )
        .unwrap();
        let d = impute_dist(&rule, 0, 1).unwrap();
        assert_eq!(d.support(), &[0]);
    }

    #[test]
    fn impossible_transition_is_an_error() {
        let rule = two_map_rule();
        assert_eq!(
            impute_dist(&rule, 0, 2),
            Err(Error::ImpossibleTransition { from: 0, to: 2 })
        );
    }

    #[test]
    fn empty_trajectory_imputes_empty_sequence() {
        let rule = two_map_rule();
        let traj = Trajectory::new(vec![1]);
        let mut rng = RngStream::from_seed(0);
        let u = impute_sequence(&rule, &traj, &mut rng).unwrap();
        assert_eq!(u.len(), 0);
    }

    #[test]
    fn forced_path_imputes_the_unique_sequence() {
        let rule = two_map_rule();
        // transitions 0 -> 0 (label 0) then 0 -> 1 (label 1)
        let traj = Trajectory::new(vec![0, 0, 1]);
        let mut rng = RngStream::from_seed(0);
        let u = impute_sequence(&rule, &traj, &mut rng).unwrap();
        assert_eq!(u.labels(), &[0, 1]);
    }

    #[test]
    fn mixture_identity_recovers_unconditioned_driver() {
        // sum_y k(x, y) * impute(x, y)(u) = mu(u), exactly, for every rule
        for rule in [
            two_map_rule(),
            independent_transitions_rule(&lazy_walk_kernel()).unwrap(),
            crate::testutil::sticky_independent_rule(),
        ] {
            let k = kernel_from_rule(&rule);
            for x in 0..rule.n_states() {
                let mut acc = vec![q0(); rule.n_labels()];
                for y in k.row(x).support() {
                    let d = impute_dist(&rule, x, y).unwrap();
                    for (u, w) in d.iter() {
                        acc[u] += k.get(x, y) * w;
                    }
                }
                assert_eq!(acc, rule.mu_weights());
            }
        }
    }

    #[test]
    fn support_matches_rule_table_exactly() {
        let rule = crate::testutil::sticky_independent_rule();
        for x in 0..3 {
            for y in 0..3 {
                match impute_dist(&rule, x, y) {
                    Ok(d) => {
                        for (u, _) in d.iter() {
                            assert_eq!(rule.apply(x, u), y);
                        }
                        let expected: Vec<_> = (0..rule.n_labels())
                            .filter(|&u| rule.apply(x, u) == y)
                            .collect();
                        assert_eq!(d.support(), expected.as_slice());
                    }
                    Err(Error::ImpossibleTransition { .. }) => {
                        assert!((0..rule.n_labels()).all(|u| rule.apply(x, u) != y));
                    }
                    Err(e) => panic!("unexpected error {e}"),
                }
            }
        }
    }

    #[test]
    fn factored_form_matches_explicit_restriction() {
        let k = lazy_walk_kernel();
        let rule = independent_transitions_rule(&k).unwrap();
        for x_prev in 0..3 {
            for x_next in k.row(x_prev).support() {
                let explicit = impute_dist(&rule, x_prev, x_next).unwrap();
                let factored = impute_independent(&k, x_prev, x_next).unwrap();
                // coordinate x_prev is a point mass at x_next, others keep k rows
                assert_eq!(factored.marginals()[x_prev], Dist::point(3, x_next));
                for c in (0..3).filter(|&c| c != x_prev) {
                    assert_eq!(&factored.marginals()[c], k.row(c));
                }
                // same weight on every map in the explicit support
                for (u, w) in explicit.iter() {
                    assert_eq!(&factored.weight_of(rule.map(u)), w);
                }
                let total: Q = factored.support_maps().into_iter().map(|(_, w)| w).sum();
                assert_eq!(total, q(1, 1));
            }
        }
    }

    #[test]
    fn factored_sampling_respects_the_condition() {
        let k = lazy_walk_kernel();
        let f = impute_independent(&k, 1, 2).unwrap();
        let mut rng = RngStream::from_seed(11);
        for _ in 0..50 {
            let map = f.sample(&mut rng);
            assert_eq!(map[1], 2);
            assert!(!k.get(0, map[0]).is_zero());
            assert!(!k.get(2, map[2]).is_zero());
        }
    }
}
