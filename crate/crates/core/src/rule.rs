//! Transition rules: deterministic update tables with a driving-noise law.
//!
//! A rule represents a kernel in stochastic recursive sequence form
//! `X_s = phi(X_{s-1}, U_s)` with the `U_s` i.i.d. from `mu`. Each label is
//! one realizable value of `U`, stored as the full map it induces on the
//! state space. Zero-weight labels are dropped at construction so that
//! every conditioning support is exact.

use num_traits::{One, Zero};

use crate::chain::{Dist, Kernel, StateIx};
use crate::error::{Error, Result};
use crate::ratio::{q0, Q};
use crate::rng::RngStream;

/// Dense rule-label index.
pub type LabelIx = usize;

/// Cap on the materialized label count of the independent-transitions rule.
pub const DEFAULT_LABEL_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionRule {
    names: Vec<String>,
    mu: Vec<Q>,
    /// `maps[u][x]` is `phi(x, u)`.
    maps: Vec<Vec<StateIx>>,
    n_states: usize,
}

impl TransitionRule {
    /// Builds a rule over `n_states` states. Labels with zero weight are
    /// dropped; the remaining weights must be positive and sum to one;
    /// every map must be total on the state space.
    pub fn new(
        n_states: usize,
        names: Vec<String>,
        mu: Vec<Q>,
        maps: Vec<Vec<StateIx>>,
    ) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::invalid("rule over an empty state space"));
        }
        if names.len() != mu.len() || names.len() != maps.len() {
            return Err(Error::invalid("labels, mu and table lengths differ"));
        }
        let mut kept_names = Vec::new();
        let mut kept_mu = Vec::new();
        let mut kept_maps = Vec::new();
        for ((name, w), map) in names.into_iter().zip(mu).zip(maps) {
            if w.is_zero() {
                continue;
            }
            if w < q0() {
                return Err(Error::invalid(format!("label `{name}` has negative weight")));
            }
            if map.len() != n_states || map.iter().any(|&y| y >= n_states) {
                return Err(Error::invalid(format!(
                    "label `{name}` table is not total on the state space"
                )));
            }
            kept_names.push(name);
            kept_mu.push(w);
            kept_maps.push(map);
        }
        if kept_names.is_empty() {
            return Err(Error::invalid("rule has no positive-weight labels"));
        }
        let total: Q = kept_mu.iter().cloned().sum();
        if !total.is_one() {
            return Err(Error::invalid(format!(
                "label weights sum to {}, expected 1",
                crate::ratio::format_ratio(&total)
            )));
        }
        Ok(TransitionRule {
            names: kept_names,
            mu: kept_mu,
            maps: kept_maps,
            n_states,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_labels(&self) -> usize {
        self.maps.len()
    }

    pub fn label_name(&self, u: LabelIx) -> &str {
        &self.names[u]
    }

    pub fn label_names(&self) -> &[String] {
        &self.names
    }

    pub fn mu(&self, u: LabelIx) -> &Q {
        &self.mu[u]
    }

    pub fn mu_weights(&self) -> &[Q] {
        &self.mu
    }

    /// The map induced by label `u`.
    pub fn map(&self, u: LabelIx) -> &[StateIx] {
        &self.maps[u]
    }

    /// `phi(x, u)`.
    pub fn apply(&self, x: StateIx, u: LabelIx) -> StateIx {
        self.maps[u][x]
    }

    /// Draws a label from `mu`.
    pub fn sample_label(&self, rng: &mut RngStream) -> LabelIx {
        crate::chain::CatSampler::new(&self.mu).sample(rng)
    }
}

/// The kernel represented by a rule: `k(x, y) = mu{u : phi(x, u) = y}`.
pub fn kernel_from_rule(rule: &TransitionRule) -> Kernel {
    let n = rule.n_states();
    let rows = (0..n)
        .map(|x| {
            let mut w = vec![q0(); n];
            for u in 0..rule.n_labels() {
                w[rule.apply(x, u)] += rule.mu(u).clone();
            }
            Dist::new(w).expect("mu sums to one")
        })
        .collect();
    Kernel::new(rows).expect("square by construction")
}

/// Independent-transitions rule of a kernel: one label per function
/// `u : X -> X` with positive product weight `prod_x k(x, u(x))`, evaluated
/// as `phi(x, u) = u(x)`. The label count is the product of the row support
/// sizes; construction fails beyond `cap`.
pub fn independent_transitions_rule_with_cap(k: &Kernel, cap: u128) -> Result<TransitionRule> {
    let n = k.n_states();
    let supports: Vec<Vec<StateIx>> = (0..n).map(|x| k.row(x).support().collect()).collect();
    let mut count: u128 = 1;
    for s in &supports {
        count = count.saturating_mul(s.len() as u128);
        if count > cap {
            return Err(Error::StateSpaceTooLarge { count, cap });
        }
    }
    let mut names = Vec::with_capacity(count as usize);
    let mut mu = Vec::with_capacity(count as usize);
    let mut maps = Vec::with_capacity(count as usize);
    let mut combo = vec![0usize; n];
    loop {
        let map: Vec<StateIx> = (0..n).map(|x| supports[x][combo[x]]).collect();
        let w: Q = (0..n).map(|x| k.get(x, map[x]).clone()).product();
        let name: String = map
            .iter()
            .map(|y| y.to_string())
            .collect::<Vec<_>>()
            .join(",");
        names.push(name);
        mu.push(w);
        maps.push(map);
        // odometer increment over the support product
        let mut pos = n;
        loop {
            if pos == 0 {
                return TransitionRule::new(n, names, mu, maps);
            }
            pos -= 1;
            combo[pos] += 1;
            if combo[pos] < supports[pos].len() {
                break;
            }
            combo[pos] = 0;
        }
    }
}

/// [`independent_transitions_rule_with_cap`] at the default cap.
pub fn independent_transitions_rule(k: &Kernel) -> Result<TransitionRule> {
    independent_transitions_rule_with_cap(k, DEFAULT_LABEL_CAP)
}

/// Discretized inverse-CDF rule under a total order on states.
///
/// The unit interval is cut at every breakpoint of every row's CDF (rows
/// accumulated in `order`); each resulting subinterval is one label with
/// weight equal to its length, and `phi(x, interval)` is the state whose
/// CDF segment of row `x` contains the interval. Reproduces the kernel
/// exactly.
pub fn inverse_transform_rule(k: &Kernel, order: &[StateIx]) -> Result<TransitionRule> {
    let (rule, _) = shared_inverse_transform_rules(std::slice::from_ref(k), order)?;
    Ok(rule.into_iter().next().expect("one kernel in, one rule out"))
}

/// Inverse-CDF rules for two kernels over a common label set (the joint
/// refinement of both kernels' breakpoints), sharing one driving law. Used
/// to build cross-monotone rule pairs.
pub fn inverse_transform_rule_pair(
    k: &Kernel,
    l: &Kernel,
    order: &[StateIx],
) -> Result<(TransitionRule, TransitionRule)> {
    let kernels = [k.clone(), l.clone()];
    let (mut rules, _) = shared_inverse_transform_rules(&kernels, order)?;
    let second = rules.pop().expect("two rules");
    let first = rules.pop().expect("two rules");
    Ok((first, second))
}

fn shared_inverse_transform_rules(
    kernels: &[Kernel],
    order: &[StateIx],
) -> Result<(Vec<TransitionRule>, Vec<Q>)> {
    let n = kernels[0].n_states();
    if kernels.iter().any(|k| k.n_states() != n) {
        return Err(Error::invalid("kernels have mismatched state counts"));
    }
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&x| x >= n || std::mem::replace(&mut seen[x], true))
    {
        return Err(Error::invalid("order must be a permutation of the states"));
    }
    // union of all rows' CDF breakpoints, in (0, 1)
    let mut points: Vec<Q> = Vec::new();
    for k in kernels {
        for x in 0..n {
            let mut acc = q0();
            for &y in order {
                acc += k.get(x, y).clone();
                if !acc.is_zero() && !acc.is_one() && !points.contains(&acc) {
                    points.push(acc.clone());
                }
            }
        }
    }
    points.sort();
    let mut cuts = vec![q0()];
    cuts.extend(points);
    cuts.push(Q::one());

    let n_labels = cuts.len() - 1;
    let names: Vec<String> = (0..n_labels)
        .map(|i| {
            format!(
                "[{},{})",
                crate::ratio::format_ratio(&cuts[i]),
                crate::ratio::format_ratio(&cuts[i + 1])
            )
        })
        .collect();
    let lengths: Vec<Q> = (0..n_labels)
        .map(|i| cuts[i + 1].clone() - cuts[i].clone())
        .collect();

    let mut rules = Vec::with_capacity(kernels.len());
    for k in kernels {
        let mut maps = vec![vec![0usize; n]; n_labels];
        for x in 0..n {
            let mut acc = q0();
            let mut seg = 0usize; // current label index
            for &y in order {
                let upper = acc + k.get(x, y).clone();
                while seg < n_labels && cuts[seg] < upper {
                    maps[seg][x] = y;
                    seg += 1;
                }
                acc = upper;
            }
        }
        rules.push(TransitionRule::new(
            n,
            names.clone(),
            lengths.clone(),
            maps,
        )?);
    }
    Ok((rules, lengths))
}
