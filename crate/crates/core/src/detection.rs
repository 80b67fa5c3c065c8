//! Forward-phase machinery: coupled trajectories, coalescence, bounding
//! intervals, and conservative coalescence detectors.
//!
//! A detector evolves a summary state from the driving labels alone and
//! certifies coalescence when the summary enters its target set. Soundness
//! (firing implies coalescence) is what makes conservative acceptance
//! valid, and can be verified exhaustively on small instances with
//! [`detection_soundness_check`].

use num_traits::Zero;

use crate::chain::{Dist, Kernel, StateIx, StateSpace};
use crate::error::{Error, Result};
use crate::order::{is_realizably_monotone, Poset};
use crate::ratio::Q;
use crate::rule::{kernel_from_rule, LabelIx, TransitionRule};

/// Time-indexed state path `x_0, ..., x_t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    states: Vec<StateIx>,
}

impl Trajectory {
    /// Wraps a nonempty path; a path of length `t + 1` spans times `0..=t`.
    pub fn new(states: Vec<StateIx>) -> Self {
        assert!(!states.is_empty(), "a trajectory has at least time zero");
        Trajectory { states }
    }

    /// Horizon `t` (number of transitions).
    pub fn t(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state(&self, s: usize) -> StateIx {
        self.states[s]
    }

    pub fn states(&self) -> &[StateIx] {
        &self.states
    }

    pub fn last(&self) -> StateIx {
        *self.states.last().expect("nonempty")
    }
}

/// Driving labels `u_1, ..., u_t` of one window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrivingSequence {
    labels: Vec<LabelIx>,
}

impl DrivingSequence {
    pub fn new(labels: Vec<LabelIx>) -> Self {
        DrivingSequence { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[LabelIx] {
        &self.labels
    }
}

/// Runs the coupled forward evolution from every start state under one
/// driving sequence. Entry `x` of the result is the trajectory started at
/// `x`.
pub fn coupled_forward(rule: &TransitionRule, u: &DrivingSequence) -> Vec<Trajectory> {
    let n = rule.n_states();
    (0..n)
        .map(|x| {
            let mut states = Vec::with_capacity(u.len() + 1);
            states.push(x);
            let mut cur = x;
            for &label in u.labels() {
                cur = rule.apply(cur, label);
                states.push(cur);
            }
            Trajectory::new(states)
        })
        .collect()
}

/// True iff the endpoints of all trajectories agree.
pub fn is_coalesced(trajs: &[Trajectory]) -> bool {
    let mut ends = trajs.iter().map(|t| t.last());
    match ends.next() {
        Some(first) => ends.all(|e| e == first),
        None => true,
    }
}

/// Interval `[lo, hi]` bracketing every coupled trajectory at one time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingInterval {
    pub lo: StateIx,
    pub hi: StateIx,
}

impl BoundingInterval {
    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }
}

/// Endpoint evolution `[Y_s(bottom), Y_s(top)]` under a monotone rule; the
/// sandwich property keeps every trajectory inside. Errors eagerly when the
/// rule is not monotone for the poset.
pub fn bounding_forward(
    rule: &TransitionRule,
    p: &Poset,
    u: &DrivingSequence,
) -> Result<Vec<BoundingInterval>> {
    if let Some(w) = is_realizably_monotone(rule, p) {
        return Err(Error::NotMonotone {
            x: w.x,
            y: w.y,
            label: w.label,
        });
    }
    let mut lo = p.bottom();
    let mut hi = p.top();
    let mut out = Vec::with_capacity(u.len() + 1);
    out.push(BoundingInterval { lo, hi });
    for &label in u.labels() {
        lo = rule.apply(lo, label);
        hi = rule.apply(hi, label);
        out.push(BoundingInterval { lo, hi });
    }
    Ok(out)
}

/// A coalescence detector: a deterministic process driven by the labels
/// alone, together with a target predicate. Reaching the target by time `t`
/// must imply coalescence of all coupled trajectories by `t`.
pub trait DetectionProcess {
    type State: Clone;

    fn initial(&self) -> Self::State;
    fn step(&self, d: &Self::State, label: LabelIx) -> Self::State;
    fn in_target(&self, d: &Self::State) -> bool;

    /// First time `s <= u.len()` at which the target is hit, if any
    /// (time 0 inspects the initial state).
    fn first_hit(&self, u: &DrivingSequence) -> Option<usize> {
        let mut d = self.initial();
        if self.in_target(&d) {
            return Some(0);
        }
        for (s, &label) in u.labels().iter().enumerate() {
            d = self.step(&d, label);
            if self.in_target(&d) {
                return Some(s + 1);
            }
        }
        None
    }
}

/// Exact detector: tracks the coupled front (the image of every start
/// state) and fires when it is a single point. The baseline every other
/// detector is conservative for.
#[derive(Debug, Clone)]
pub struct FullTracking {
    maps: Vec<Vec<StateIx>>,
    n: usize,
}

impl FullTracking {
    pub fn new(rule: &TransitionRule) -> Self {
        FullTracking {
            maps: (0..rule.n_labels()).map(|u| rule.map(u).to_vec()).collect(),
            n: rule.n_states(),
        }
    }
}

impl DetectionProcess for FullTracking {
    type State = Vec<StateIx>;

    fn initial(&self) -> Self::State {
        (0..self.n).collect()
    }

    fn step(&self, d: &Self::State, label: LabelIx) -> Self::State {
        d.iter().map(|&y| self.maps[label][y]).collect()
    }

    fn in_target(&self, d: &Self::State) -> bool {
        d.iter().all(|&y| y == d[0])
    }
}

/// Bounding-interval detector for monotone rules: evolves only the two
/// endpoint trajectories and fires on a singleton interval.
#[derive(Debug, Clone)]
pub struct BoundingDetector {
    maps: Vec<Vec<StateIx>>,
    bottom: StateIx,
    top: StateIx,
}

impl BoundingDetector {
    /// Errors with the monotonicity witness when the rule does not preserve
    /// the order.
    pub fn new(rule: &TransitionRule, p: &Poset) -> Result<Self> {
        if let Some(w) = is_realizably_monotone(rule, p) {
            return Err(Error::NotMonotone {
                x: w.x,
                y: w.y,
                label: w.label,
            });
        }
        Ok(BoundingDetector {
            maps: (0..rule.n_labels()).map(|u| rule.map(u).to_vec()).collect(),
            bottom: p.bottom(),
            top: p.top(),
        })
    }
}

impl DetectionProcess for BoundingDetector {
    type State = BoundingInterval;

    fn initial(&self) -> Self::State {
        BoundingInterval {
            lo: self.bottom,
            hi: self.top,
        }
    }

    fn step(&self, d: &Self::State, label: LabelIx) -> Self::State {
        BoundingInterval {
            lo: self.maps[label][d.lo],
            hi: self.maps[label][d.hi],
        }
    }

    fn in_target(&self, d: &Self::State) -> bool {
        d.is_singleton()
    }
}

/// Move-to-front detector: remembers which records have been requested and
/// fires once all but one have appeared, which pins the whole list order.
#[derive(Debug, Clone)]
pub struct MtfDetector {
    n_records: usize,
}

impl MtfDetector {
    /// Detector for a chain whose labels are record requests.
    pub fn for_records(n_records: usize) -> Self {
        MtfDetector { n_records }
    }
}

impl DetectionProcess for MtfDetector {
    type State = u32; // requested set as a bitmask

    fn initial(&self) -> Self::State {
        0
    }

    fn step(&self, d: &Self::State, label: LabelIx) -> Self::State {
        d | (1 << label)
    }

    fn in_target(&self, d: &Self::State) -> bool {
        (d.count_ones() as usize) + 1 >= self.n_records
    }
}

/// Default cap on `|labels|^t` for exhaustive soundness checking.
pub const DEFAULT_SOUNDNESS_CAP: u64 = 1_000_000;

/// Exhaustively verifies that a detector is sound for a rule at horizon
/// `t`: firing by `t` implies coalescence by `t` on every driving sequence.
/// Returns the first violating sequence, or `None` when sound.
pub fn detection_soundness_check<D: DetectionProcess>(
    rule: &TransitionRule,
    det: &D,
    t: usize,
    cap: u64,
) -> Result<Option<DrivingSequence>> {
    let total = (rule.n_labels() as u128).checked_pow(t as u32);
    match total {
        Some(c) if c <= cap as u128 => {}
        _ => return Err(Error::EnumerationTooLarge { cap }),
    }
    let mut seq = vec![0usize; t];
    loop {
        let u = DrivingSequence::new(seq.clone());
        if det.first_hit(&u).is_some() && !is_coalesced(&coupled_forward(rule, &u)) {
            return Ok(Some(u));
        }
        // odometer over label tuples
        let mut pos = t;
        loop {
            if pos == 0 {
                return Ok(None);
            }
            pos -= 1;
            seq[pos] += 1;
            if seq[pos] < rule.n_labels() {
                break;
            }
            seq[pos] = 0;
        }
    }
}

/// Maximum record count for the move-to-front chain (state count `n!`).
pub const MTF_MAX_RECORDS: usize = 5;

/// Move-to-front chain over all permutations of the records.
#[derive(Debug, Clone)]
pub struct MtfChain {
    pub space: StateSpace,
    pub kernel: Kernel,
    pub rule: TransitionRule,
    pub detector: MtfDetector,
}

/// Builds the move-to-front chain for i.i.d. record requests with the given
/// positive weights. States are the `n!` list orders (front first); label
/// `r` moves record `r` to the front; the detector watches the requested
/// set.
pub fn mtf_chain(weights: &[Q]) -> Result<MtfChain> {
    let n = weights.len();
    if n == 0 || n > MTF_MAX_RECORDS {
        return Err(Error::TooManyRecords {
            n,
            max: MTF_MAX_RECORDS,
        });
    }
    if weights.iter().any(|w| w.is_zero() || w < &Q::zero()) {
        return Err(Error::invalid("record weights must be strictly positive"));
    }
    let mu = Dist::normalized(weights.to_vec())?;

    let perms = permutations(n);
    let labels: Vec<String> = perms
        .iter()
        .map(|p| p.iter().map(|r| r.to_string()).collect())
        .collect();
    let space = StateSpace::new(labels)?;
    let index_of = |p: &[usize]| -> usize {
        perms.iter().position(|q| q == p).expect("permutation exists")
    };

    let maps: Vec<Vec<StateIx>> = (0..n)
        .map(|record| {
            perms
                .iter()
                .map(|perm| {
                    let mut moved = Vec::with_capacity(n);
                    moved.push(record);
                    moved.extend(perm.iter().copied().filter(|&r| r != record));
                    index_of(&moved)
                })
                .collect()
        })
        .collect();
    let rule = TransitionRule::new(
        perms.len(),
        (0..n).map(|r| format!("request {r}")).collect(),
        mu.weights().to_vec(),
        maps,
    )?;
    let kernel = kernel_from_rule(&rule);
    Ok(MtfChain {
        space,
        kernel,
        rule,
        detector: MtfDetector { n_records: n },
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let shorter = permutations(n - 1);
    let mut out = Vec::new();
    for p in shorter {
        for slot in 0..=p.len() {
            let mut q = p.clone();
            q.insert(slot, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{q, q1};
    use crate::rule::independent_transitions_rule;
    use crate::testutil::{lazy_walk_kernel, two_map_rule};

    #[test]
    fn zero_length_forward_is_the_identity() {
        let rule = two_map_rule();
        let trajs = coupled_forward(&rule, &DrivingSequence::new(vec![]));
        for (x, t) in trajs.iter().enumerate() {
            assert_eq!(t.states(), &[x]);
        }
        assert!(!is_coalesced(&trajs));
    }

    #[test]
    fn contracting_sequence_coalesces() {
        let rule = two_map_rule();
        let trajs = coupled_forward(&rule, &DrivingSequence::new(vec![0, 0]));
        assert_eq!(
            trajs.iter().map(|t| t.last()).collect::<Vec<_>>(),
            vec![0, 0, 0]
        );
        assert!(is_coalesced(&trajs));
    }

    #[test]
    fn mixed_sequence_does_not_coalesce() {
        let rule = two_map_rule();
        let trajs = coupled_forward(&rule, &DrivingSequence::new(vec![1, 0]));
        assert_eq!(
            trajs.iter().map(|t| t.last()).collect::<Vec<_>>(),
            vec![0, 1, 1]
        );
        assert!(!is_coalesced(&trajs));
    }

    #[test]
    fn single_state_space_is_always_coalesced() {
        let rule = crate::rule::TransitionRule::new(
            1,
            vec!["u".into()],
            vec![q1()],
            vec![vec![0]],
        )
        .unwrap();
        let trajs = coupled_forward(&rule, &DrivingSequence::new(vec![]));
        assert!(is_coalesced(&trajs));
    }

    #[test]
    fn identity_rule_never_coalesces() {
        let rule = crate::rule::TransitionRule::new(
            2,
            vec!["id".into()],
            vec![q1()],
            vec![vec![0, 1]],
        )
        .unwrap();
        for t in 0..4 {
            let u = DrivingSequence::new(vec![0; t]);
            assert!(!is_coalesced(&coupled_forward(&rule, &u)));
        }
    }

    #[test]
    fn bounding_intervals_track_endpoints() {
        let rule = two_map_rule();
        let p = Poset::total_order(3);
        let ivs = bounding_forward(&rule, &p, &DrivingSequence::new(vec![0, 0])).unwrap();
        let pairs: Vec<(usize, usize)> = ivs.iter().map(|i| (i.lo, i.hi)).collect();
        assert_eq!(pairs, vec![(0, 2), (0, 1), (0, 0)]);
        assert!(ivs[2].is_singleton());

        let ivs = bounding_forward(&rule, &p, &DrivingSequence::new(vec![1, 1])).unwrap();
        let pairs: Vec<(usize, usize)> = ivs.iter().map(|i| (i.lo, i.hi)).collect();
        assert_eq!(pairs, vec![(0, 2), (1, 2), (2, 2)]);
    }

    #[test]
    fn zero_length_bounding_is_the_whole_order() {
        let rule = two_map_rule();
        let p = Poset::total_order(3);
        let ivs = bounding_forward(&rule, &p, &DrivingSequence::new(vec![])).unwrap();
        assert_eq!((ivs[0].lo, ivs[0].hi), (0, 2));
    }

    #[test]
    fn bounding_rejects_non_monotone_rules() {
        let rule = independent_transitions_rule(&lazy_walk_kernel()).unwrap();
        let p = Poset::total_order(3);
        assert!(matches!(
            bounding_forward(&rule, &p, &DrivingSequence::new(vec![])),
            Err(Error::NotMonotone { .. })
        ));
    }

    #[test]
    fn sandwich_property_holds_exhaustively() {
        let rule = two_map_rule();
        let p = Poset::total_order(3);
        for t in 0..=3 {
            for seq in all_sequences(rule.n_labels(), t) {
                let u = DrivingSequence::new(seq);
                let trajs = coupled_forward(&rule, &u);
                let ivs = bounding_forward(&rule, &p, &u).unwrap();
                for s in 0..=t {
                    for traj in &trajs {
                        assert!(p.leq(ivs[s].lo, traj.state(s)));
                        assert!(p.leq(traj.state(s), ivs[s].hi));
                    }
                    if ivs[s].is_singleton() {
                        // bounding soundness with the coalesced value pinned
                        let prefix: Vec<Trajectory> = trajs
                            .iter()
                            .map(|t| Trajectory::new(t.states()[..=s].to_vec()))
                            .collect();
                        assert!(is_coalesced(&prefix));
                        assert!(prefix.iter().all(|t| t.last() == ivs[s].lo));
                    }
                }
            }
        }
    }

    #[test]
    fn coalescence_persists() {
        let rules = [
            two_map_rule(),
            independent_transitions_rule(&lazy_walk_kernel()).unwrap(),
        ];
        for rule in rules {
            for seq in all_sequences(rule.n_labels(), 3) {
                let u = DrivingSequence::new(seq.clone());
                let trajs = coupled_forward(&rule, &u);
                let mut seen = false;
                for s in 0..=3 {
                    let prefix: Vec<Trajectory> = trajs
                        .iter()
                        .map(|t| Trajectory::new(t.states()[..=s].to_vec()))
                        .collect();
                    let now = is_coalesced(&prefix);
                    assert!(!seen || now, "coalescence lost at {s} under {seq:?}");
                    seen = seen || now;
                }
            }
        }
    }

    #[test]
    fn top_trajectory_at_bottom_is_exactly_coalescence() {
        // monotone rule: the top chain landing on bottom is the same event
        // as coalescence onto bottom
        let rule = two_map_rule();
        let p = Poset::total_order(3);
        for t in 0..=4 {
            for seq in all_sequences(rule.n_labels(), t) {
                let u = DrivingSequence::new(seq);
                let trajs = coupled_forward(&rule, &u);
                let top_at_bottom = trajs[p.top()].last() == p.bottom();
                let coal_to_bottom =
                    is_coalesced(&trajs) && trajs[0].last() == p.bottom();
                assert_eq!(top_at_bottom, coal_to_bottom);
            }
        }
    }

    #[test]
    fn bounding_detector_is_sound_for_the_two_map_rule() {
        let rule = two_map_rule();
        let det = BoundingDetector::new(&rule, &Poset::total_order(3)).unwrap();
        assert_eq!(detection_soundness_check(&rule, &det, 2, 1 << 20).unwrap(), None);
        assert_eq!(detection_soundness_check(&rule, &det, 3, 1 << 20).unwrap(), None);
    }

    #[test]
    fn empty_target_detector_is_vacuously_sound() {
        struct Never;
        impl DetectionProcess for Never {
            type State = ();
            fn initial(&self) {}
            fn step(&self, _: &(), _: LabelIx) {}
            fn in_target(&self, _: &()) -> bool {
                false
            }
        }
        let rule = two_map_rule();
        assert_eq!(detection_soundness_check(&rule, &Never, 3, 1 << 20).unwrap(), None);
    }

    #[test]
    fn always_firing_detector_is_unsound_on_identity_rule() {
        struct Always;
        impl DetectionProcess for Always {
            type State = ();
            fn initial(&self) {}
            fn step(&self, _: &(), _: LabelIx) {}
            fn in_target(&self, _: &()) -> bool {
                true
            }
        }
        let rule = crate::rule::TransitionRule::new(
            2,
            vec!["id".into()],
            vec![q1()],
            vec![vec![0, 1]],
        )
        .unwrap();
        let witness = detection_soundness_check(&rule, &Always, 2, 1 << 20)
            .unwrap()
            .expect("unsound");
        assert!(!is_coalesced(&coupled_forward(&rule, &witness)));
    }

    #[test]
    fn soundness_check_cap() {
        let rule = two_map_rule();
        let det = FullTracking::new(&rule);
        assert_eq!(
            detection_soundness_check(&rule, &det, 3, 7),
            Err(Error::EnumerationTooLarge { cap: 7 })
        );
    }

    #[test]
    fn mtf_single_record_fires_at_time_zero() {
        let chain = mtf_chain(&[q1()]).unwrap();
        assert_eq!(chain.space.len(), 1);
        let det = &chain.detector;
        assert!(det.in_target(&det.initial()));
    }

    #[test]
    fn mtf_two_records_fire_after_any_request() {
        let chain = mtf_chain(&[q(1, 2), q(1, 2)]).unwrap();
        assert_eq!(chain.space.len(), 2);
        for label in 0..2 {
            let u = DrivingSequence::new(vec![label]);
            assert_eq!(chain.detector.first_hit(&u), Some(1));
            assert!(is_coalesced(&coupled_forward(&chain.rule, &u)));
        }
    }

    #[test]
    fn mtf_three_records_detector_counts_distinct_requests() {
        let chain = mtf_chain(&[q(1, 3), q(1, 3), q(1, 3)]).unwrap();
        assert_eq!(chain.space.len(), 6);
        let det = &chain.detector;
        // firing time is the first time two distinct records have appeared
        assert_eq!(det.first_hit(&DrivingSequence::new(vec![0, 0, 0])), None);
        assert_eq!(det.first_hit(&DrivingSequence::new(vec![0, 0, 1])), Some(3));
        assert_eq!(det.first_hit(&DrivingSequence::new(vec![2, 1, 0])), Some(2));
        assert_eq!(
            detection_soundness_check(&chain.rule, det, 3, 1 << 20).unwrap(),
            None
        );
    }

    #[test]
    fn mtf_rejects_too_many_records() {
        let w = vec![q(1, 6); 6];
        assert!(matches!(
            mtf_chain(&w),
            Err(Error::TooManyRecords { n: 6, max: 5 })
        ));
    }

    #[test]
    fn mtf_at_the_record_limit_builds_the_full_permutation_space() {
        let w = vec![q(1, 5); 5];
        let chain = mtf_chain(&w).unwrap();
        assert_eq!(chain.space.len(), 120);
        assert_eq!(chain.rule.n_labels(), 5);
        // spot-check a move: requesting 4 from the identity order
        let start = chain.space.index_of("01234").unwrap();
        let after = chain.rule.apply(start, 4);
        assert_eq!(chain.space.label(after), "40123");
        assert!(crate::chain::is_irreducible(&chain.kernel));
    }

    #[test]
    fn mtf_moves_requested_record_to_front() {
        let chain = mtf_chain(&[q(1, 2), q(1, 4), q(1, 4)]).unwrap();
        let start = chain.space.index_of("012").unwrap();
        let after = chain.rule.apply(start, 2);
        assert_eq!(chain.space.label(after), "201");
    }

    fn all_sequences(n_labels: usize, t: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..t {
            let mut next = Vec::new();
            for s in &out {
                for l in 0..n_labels {
                    let mut s2 = s.clone();
                    s2.push(l);
                    next.push(s2);
                }
            }
            out = next;
        }
        out
    }
}
