//! The perfect samplers.
//!
//! All of them share one backbone: run the time-reversed chain backward
//! from a seed, impute the driving values consistent with that path, and
//! accept when a sound detector certifies forward coalescence. Accepted
//! outputs are exact stationary draws. The backward-search variant grows
//! the window instead of rejecting; the monotone variant replaces the
//! forward coupling with a single upward-coupled chain; coupling from the
//! past and read-once coupling are included as forward-time mirrors.
//!
//! Step accounting: every kernel transition simulated (backward or
//! forward) increments `t_used`; imputation draws do not.

use num_traits::Zero;

use crate::chain::{CatSampler, Dist, Kernel, StateIx};
use crate::detection::{DetectionProcess, DrivingSequence, Trajectory};
use crate::error::{Error, Result};
use crate::imputation::impute_dist_given_kernel;
use crate::order::{Poset, UpwardKernelFamily};
use crate::rng::RngStream;
use crate::rule::{LabelIx, TransitionRule};

/// Result of one rejection-sampling run (or retry loop).
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct RunOutcome {
    pub accepted: bool,
    pub output: Option<StateIx>,
    /// Simulated kernel steps, backward plus forward, across all attempts.
    pub t_used: u64,
    pub attempts: u32,
    pub seed_state: StateIx,
    pub rng_seed: u64,
    pub rng_stream: u64,
}

/// Retry schedule for [`fill_sample`]: keep the window fixed, or double it
/// after every rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttemptSchedule {
    FixedT,
    DoublingT,
}

/// Window search schedule for [`altalg_run`]: test every width, only
/// powers of two, or every width with a guaranteed minimum reporting depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchSchedule {
    EveryT,
    PowersOf2,
    Guarantee(usize),
}

impl SearchSchedule {
    pub(crate) fn tests_at(&self, t: usize) -> bool {
        match self {
            SearchSchedule::EveryT | SearchSchedule::Guarantee(_) => true,
            SearchSchedule::PowersOf2 => t.is_power_of_two(),
        }
    }

    pub(crate) fn reported_depth(&self, t_found: usize) -> usize {
        match self {
            SearchSchedule::EveryT | SearchSchedule::PowersOf2 => t_found,
            SearchSchedule::Guarantee(t0) => t_found.max(t0.saturating_sub(1)),
        }
    }
}

/// Precomputed reversal and samplers shared across attempts.
struct Prepared<'a> {
    k: &'a Kernel,
    rule: &'a TransitionRule,
    rev_samplers: Vec<CatSampler>,
}

impl<'a> Prepared<'a> {
    fn new(k: &'a Kernel, pi: &Dist, rule: &'a TransitionRule) -> Result<Self> {
        debug_assert_eq!(&crate::rule::kernel_from_rule(rule), k);
        let rev = crate::chain::reverse_kernel(k, pi)?;
        let rev_samplers = (0..rev.n_states())
            .map(|x| CatSampler::new(rev.row(x).weights()))
            .collect();
        Ok(Prepared {
            k,
            rule,
            rev_samplers,
        })
    }

    /// Backward chain of `steps` reversed-kernel draws from `from`,
    /// returned in generation order (`from` first).
    fn backward(&self, from: StateIx, steps: usize, rng: &mut RngStream) -> Vec<StateIx> {
        let mut states = Vec::with_capacity(steps + 1);
        states.push(from);
        let mut cur = from;
        for _ in 0..steps {
            cur = self.rev_samplers[cur].sample(rng);
            states.push(cur);
        }
        states
    }

    fn impute_label(
        &self,
        x_prev: StateIx,
        x_next: StateIx,
        rng: &mut RngStream,
    ) -> Result<LabelIx> {
        let d = impute_dist_given_kernel(self.rule, self.k, x_prev, x_next)?;
        Ok(d.sample(rng))
    }
}

/// One backward-forward routine at fixed window `t` from seed `x_t`:
/// run the reversed chain down to time zero, impute the driving values,
/// and accept if the detector fires by `t`. On acceptance the output is the
/// time-zero state, an exact stationary draw conditionally on acceptance.
pub fn fill_run<D: DetectionProcess>(
    k: &Kernel,
    pi: &Dist,
    rule: &TransitionRule,
    det: &D,
    t: usize,
    x_t: StateIx,
    rng: &mut RngStream,
) -> Result<RunOutcome> {
    if pi.get(x_t).is_zero() {
        return Err(Error::ZeroMassSeed { state: x_t });
    }
    let prepared = Prepared::new(k, pi, rule)?;
    let (accepted, output, t_used) = fill_attempt(&prepared, det, t, x_t, rng)?;
    Ok(RunOutcome {
        accepted,
        output,
        t_used,
        attempts: 1,
        seed_state: x_t,
        rng_seed: rng.seed(),
        rng_stream: rng.stream(),
    })
}

fn fill_attempt<D: DetectionProcess>(
    prepared: &Prepared<'_>,
    det: &D,
    t: usize,
    x_t: StateIx,
    rng: &mut RngStream,
) -> Result<(bool, Option<StateIx>, u64)> {
    let backward = prepared.backward(x_t, t, rng);
    let mut t_used = t as u64;
    // chronological path x_0 .. x_t
    let chron: Vec<StateIx> = backward.iter().rev().copied().collect();
    let mut labels = Vec::with_capacity(t);
    for s in 1..=t {
        labels.push(prepared.impute_label(chron[s - 1], chron[s], rng)?);
    }
    let u = DrivingSequence::new(labels);
    let hit = det.first_hit(&u);
    t_used += hit.unwrap_or(t) as u64;
    Ok((hit.is_some(), hit.map(|_| chron[0]), t_used))
}

/// Repeats the fixed-window routine with fresh randomness until acceptance.
/// The window stays at `t0` or doubles per rejection according to
/// `schedule`; attempt counts and total step counts accumulate in the
/// outcome.
#[allow(clippy::too_many_arguments)]
pub fn fill_sample<D: DetectionProcess>(
    k: &Kernel,
    pi: &Dist,
    rule: &TransitionRule,
    det: &D,
    x_t: StateIx,
    t0: usize,
    schedule: AttemptSchedule,
    max_attempts: u32,
    rng: &mut RngStream,
) -> Result<RunOutcome> {
    if pi.get(x_t).is_zero() {
        return Err(Error::ZeroMassSeed { state: x_t });
    }
    if t0 == 0 || max_attempts == 0 {
        return Err(Error::invalid("t0 and max_attempts must be positive"));
    }
    let prepared = Prepared::new(k, pi, rule)?;
    let mut t = t0;
    let mut total_steps = 0u64;
    for attempt in 1..=max_attempts {
        let (accepted, output, steps) = fill_attempt(&prepared, det, t, x_t, rng)?;
        total_steps += steps;
        if accepted {
            return Ok(RunOutcome {
                accepted: true,
                output,
                t_used: total_steps,
                attempts: attempt,
                seed_state: x_t,
                rng_seed: rng.seed(),
                rng_stream: rng.stream(),
            });
        }
        if matches!(schedule, AttemptSchedule::DoublingT) {
            t = t.saturating_mul(2);
        }
    }
    Err(Error::MaxAttemptsExceeded {
        attempts: max_attempts,
    })
}

/// Result of the backward-search sampler: always an acceptance (failure to
/// coalesce inside the horizon is an error).
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct AltAlgOutcome {
    pub output: StateIx,
    /// Reported backward depth: the coalescence time, raised to the search
    /// schedule's conservative value.
    pub backward_time: usize,
    pub t_used: u64,
    /// Time-zero state the backward chain was started from.
    pub start_state: StateIx,
    pub rng_seed: u64,
    pub rng_stream: u64,
}

struct AltCore {
    /// Backward states in generation order: time 0, -1, ..., -depth.
    states: Vec<StateIx>,
    reported: usize,
    t_used: u64,
}

fn altalg_core(
    prepared: &Prepared<'_>,
    x0: StateIx,
    t_max: usize,
    search: SearchSchedule,
    rng: &mut RngStream,
) -> Result<AltCore> {
    let n = prepared.k.n_states();
    let mut states = vec![x0];
    // comp[x] = time-zero value of the window started at the current depth
    // from x; extending one step composes on the inside.
    let mut comp: Vec<StateIx> = (0..n).collect();
    let mut t_used = 0u64;
    let constant = |c: &[StateIx]| c.iter().all(|&v| v == c[0]);
    let mut found = None;
    if search.tests_at(0) && constant(&comp) {
        found = Some(0);
    }
    let mut depth = 0usize;
    while found.is_none() {
        if depth == t_max {
            return Err(Error::HorizonExceeded { limit: t_max });
        }
        depth += 1;
        let prev = states[depth - 1];
        let new = prepared.rev_samplers[prev].sample(rng);
        states.push(new);
        t_used += 1;
        let label = prepared.impute_label(new, prev, rng)?;
        comp = (0..n)
            .map(|x| comp[prepared.rule.apply(x, label)])
            .collect();
        t_used += 1;
        if search.tests_at(depth) && constant(&comp) {
            found = Some(depth);
        }
    }
    let t_found = found.expect("loop exits on success");
    let reported = search.reported_depth(t_found);
    while states.len() <= reported {
        let prev = *states.last().expect("nonempty");
        states.push(prepared.rev_samplers[prev].sample(rng));
        t_used += 1;
    }
    Ok(AltCore {
        states,
        reported,
        t_used,
    })
}

/// Backward search: start the reversed chain at a time-zero state drawn
/// from `pi_hat` (any law absolutely continuous with respect to `pi`),
/// reuse the imputed driving values while growing the window, and report
/// the state at the first coalescing depth of the search schedule. The
/// output is an exact stationary draw.
pub fn altalg_run(
    k: &Kernel,
    pi: &Dist,
    rule: &TransitionRule,
    pi_hat: &Dist,
    t_max: usize,
    search: SearchSchedule,
    rng: &mut RngStream,
) -> Result<AltAlgOutcome> {
    if pi_hat.len() != pi.len() {
        return Err(Error::invalid("pi_hat dimension mismatch"));
    }
    if pi_hat.support().any(|x| pi.get(x).is_zero()) {
        return Err(Error::invalid(
            "pi_hat is not absolutely continuous with respect to pi",
        ));
    }
    let prepared = Prepared::new(k, pi, rule)?;
    let x0 = pi_hat.sample(rng);
    let core = altalg_core(&prepared, x0, t_max, search, rng)?;
    Ok(AltAlgOutcome {
        output: core.states[core.reported],
        backward_time: core.reported,
        t_used: core.t_used,
        start_state: x0,
        rng_seed: rng.seed(),
        rng_stream: rng.stream(),
    })
}

/// One monotone-case routine: backward from the bottom element, then a
/// single upward-coupled chain from the top driven ex post facto by the
/// upward kernels; accept iff it ends at the bottom.
pub fn sm_fill_run(
    k: &Kernel,
    pi: &Dist,
    fam: &UpwardKernelFamily,
    poset: &Poset,
    t: usize,
    rng: &mut RngStream,
) -> Result<RunOutcome> {
    sm_core(k, pi, fam, poset, t, rng)
}

/// Cross-monotone variant: the backward chain uses the target kernel's
/// reversal while the upward chain follows the dominating kernel through
/// the cross upward family.
pub fn sm_fill_run_cross(
    cfg: &crate::order::CrossSmConfig,
    pi: &Dist,
    fam: &UpwardKernelFamily,
    poset: &Poset,
    t: usize,
    rng: &mut RngStream,
) -> Result<RunOutcome> {
    sm_core(&cfg.k, pi, fam, poset, t, rng)
}

fn sm_core(
    k: &Kernel,
    pi: &Dist,
    fam: &UpwardKernelFamily,
    poset: &Poset,
    t: usize,
    rng: &mut RngStream,
) -> Result<RunOutcome> {
    let bottom = poset.bottom();
    let top = poset.top();
    if pi.get(bottom).is_zero() {
        return Err(Error::ZeroBottomMass);
    }
    let rev = crate::chain::reverse_kernel(k, pi)?;
    let rev_samplers: Vec<CatSampler> = (0..rev.n_states())
        .map(|x| CatSampler::new(rev.row(x).weights()))
        .collect();
    let mut backward = vec![bottom];
    let mut cur = bottom;
    for _ in 0..t {
        cur = rev_samplers[cur].sample(rng);
        backward.push(cur);
    }
    let chron: Vec<StateIx> = backward.iter().rev().copied().collect();
    let mut t_used = t as u64;
    let mut y = top;
    for s in 1..=t {
        let row = fam.get(chron[s - 1], y, chron[s])?;
        y = row.sample(rng);
        t_used += 1;
    }
    let accepted = y == bottom;
    Ok(RunOutcome {
        accepted,
        output: accepted.then(|| chron[0]),
        t_used,
        attempts: 1,
        seed_state: bottom,
        rng_seed: rng.seed(),
        rng_stream: rng.stream(),
    })
}

/// Result of a coupling-from-the-past run.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct CftpOutcome {
    pub output: StateIx,
    /// Width of the first coalescing window.
    pub backward_time: usize,
    pub t_used: u64,
    pub rng_seed: u64,
    pub rng_stream: u64,
}

/// Standard coupling from the past with window doubling `t0, 2 t0, ...`,
/// reusing the driving values of inner windows. Returns the time-zero state
/// of the first coalescing window.
pub fn cftp_run(
    rule: &TransitionRule,
    t0: usize,
    t_max: usize,
    rng: &mut RngStream,
) -> Result<CftpOutcome> {
    if t0 == 0 {
        return Err(Error::invalid("t0 must be positive"));
    }
    let n = rule.n_states();
    let mu_sampler = CatSampler::new(rule.mu_weights());
    let mut comp: Vec<StateIx> = (0..n).collect();
    let mut drawn = 0usize;
    let mut width = t0;
    if comp.iter().all(|&v| v == comp[0]) {
        // single-state space coalesces at width zero; report the minimal window
        return Ok(CftpOutcome {
            output: comp[0],
            backward_time: 0,
            t_used: 0,
            rng_seed: rng.seed(),
            rng_stream: rng.stream(),
        });
    }
    loop {
        if width > t_max {
            return Err(Error::HorizonExceeded { limit: t_max });
        }
        // new labels live deeper in the past than everything drawn before
        let fresh: Vec<LabelIx> = (drawn..width).map(|_| mu_sampler.sample(rng)).collect();
        drawn = width;
        // segment map of the new stretch: deepest label applies first
        let seg: Vec<StateIx> = (0..n)
            .map(|x| {
                let mut cur = x;
                for &label in fresh.iter().rev() {
                    cur = rule.apply(cur, label);
                }
                cur
            })
            .collect();
        comp = (0..n).map(|x| comp[seg[x]]).collect();
        if comp.iter().all(|&v| v == comp[0]) {
            return Ok(CftpOutcome {
                output: comp[0],
                backward_time: width,
                t_used: drawn as u64,
                rng_seed: rng.seed(),
                rng_stream: rng.stream(),
            });
        }
        width *= 2;
    }
}

/// Result of a read-once coupling run.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ReadOnceOutcome {
    pub output: StateIx,
    /// Total blocks consumed; the output is the state entering the last one.
    pub blocks_used: u64,
    pub t_used: u64,
    pub rng_seed: u64,
    pub rng_stream: u64,
}

/// Read-once coupling from the past with fixed block width `t`: runs
/// forward in independent blocks and outputs the state entering the first
/// coalescing block that follows an earlier coalescing block. The output is
/// an exact stationary draw unconditionally, but not conditionally on the
/// run length.
pub fn read_once_cftp_run(
    rule: &TransitionRule,
    t: usize,
    max_blocks: u64,
    rng: &mut RngStream,
) -> Result<ReadOnceOutcome> {
    if t == 0 {
        return Err(Error::invalid("block width must be positive"));
    }
    let n = rule.n_states();
    let mu_sampler = CatSampler::new(rule.mu_weights());
    let mut tracked: Option<StateIx> = None;
    for block in 1..=max_blocks {
        // compose the block's map, deepest-in-block label first
        let mut map: Vec<StateIx> = (0..n).collect();
        for _ in 0..t {
            let label = mu_sampler.sample(rng);
            map = map.iter().map(|&y| rule.apply(y, label)).collect();
        }
        let coalesced = map.iter().all(|&v| v == map[0]);
        match tracked {
            None => {
                if coalesced {
                    tracked = Some(map[0]);
                }
            }
            Some(state) => {
                if coalesced {
                    return Ok(ReadOnceOutcome {
                        output: state,
                        blocks_used: block,
                        t_used: block * t as u64,
                        rng_seed: rng.seed(),
                        rng_stream: rng.stream(),
                    });
                }
                tracked = Some(map[state]);
            }
        }
    }
    Err(Error::HorizonExceeded {
        limit: max_blocks as usize,
    })
}

/// Seed for tour generation: an exact stationary draw from a prior
/// accepted run, or an explicitly approximate stand-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TourSeed {
    Stationary(StateIx),
    Approximate(StateIx),
}

impl TourSeed {
    fn state(&self) -> StateIx {
        match *self {
            TourSeed::Stationary(s) | TourSeed::Approximate(s) => s,
        }
    }
}

/// A batch of fixed-length stationary trajectory segments. Consecutive
/// tours are 1-dependent; tours two or more apart are independent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TourBatch {
    pub tours: Vec<Trajectory>,
    pub t0: usize,
    /// False when the seed was not an exact stationary draw, in which case
    /// the marginals are only approximate.
    pub exact: bool,
}

/// Generates `nu` tours of length `t0` by chaining guarantee-depth backward
/// searches: each run's trajectory tail is the tour and its reported state
/// seeds the next run.
#[allow(clippy::too_many_arguments)]
pub fn tours_generate(
    k: &Kernel,
    pi: &Dist,
    rule: &TransitionRule,
    t0: usize,
    nu: usize,
    seed: TourSeed,
    t_max: usize,
    rng: &mut RngStream,
) -> Result<TourBatch> {
    if t0 == 0 {
        return Err(Error::invalid("t0 must be positive"));
    }
    if pi.get(seed.state()).is_zero() {
        return Err(Error::ZeroMassSeed {
            state: seed.state(),
        });
    }
    let prepared = Prepared::new(k, pi, rule)?;
    let mut cur = seed.state();
    let mut tours = Vec::with_capacity(nu);
    for _ in 0..nu {
        let core = altalg_core(
            &prepared,
            cur,
            t_max,
            SearchSchedule::Guarantee(t0),
            rng,
        )?;
        let tour: Vec<StateIx> = core.states[..t0].iter().rev().copied().collect();
        tours.push(Trajectory::new(tour));
        cur = core.states[core.reported];
    }
    Ok(TourBatch {
        tours,
        t0,
        exact: matches!(seed, TourSeed::Stationary(_)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{solve_stationary, Dist};
    use crate::detection::FullTracking;
    use crate::order::upward_family_from_rule;
    use crate::ratio::{q, q1};
    use crate::testutil::{lazy_walk_kernel, two_map_rule};

    fn single_state() -> (Kernel, Dist, TransitionRule) {
        let k = Kernel::identity(1);
        let pi = Dist::point(1, 0);
        let rule =
            TransitionRule::new(1, vec!["u".into()], vec![q1()], vec![vec![0]]).unwrap();
        (k, pi, rule)
    }

    #[test]
    fn fill_run_rejects_zero_mass_seed() {
        let k = Kernel::new(vec![Dist::point(2, 0), Dist::point(2, 0)]).unwrap();
        let pi = Dist::new(vec![q(1, 1), q(0, 1)]).unwrap();
        let rule = TransitionRule::new(
            2,
            vec!["a".into()],
            vec![q1()],
            vec![vec![0, 0]],
        )
        .unwrap();
        let det = FullTracking::new(&rule);
        let mut rng = RngStream::from_seed(0);
        assert_eq!(
            fill_run(&k, &pi, &rule, &det, 2, 1, &mut rng),
            Err(Error::ZeroMassSeed { state: 1 })
        );
    }

    #[test]
    fn fill_run_is_reproducible() {
        let k = lazy_walk_kernel();
        let pi = Dist::uniform(3);
        let rule = two_map_rule();
        let det = FullTracking::new(&rule);
        let a = fill_run(&k, &pi, &rule, &det, 2, 0, &mut RngStream::from_seed(3)).unwrap();
        let b = fill_run(&k, &pi, &rule, &det, 2, 0, &mut RngStream::from_seed(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.accepted, a.output.is_some());
    }

    #[test]
    fn fill_sample_single_state_accepts_immediately() {
        let (k, pi, rule) = single_state();
        let det = FullTracking::new(&rule);
        let mut rng = RngStream::from_seed(1);
        let out = fill_sample(
            &k,
            &pi,
            &rule,
            &det,
            0,
            3,
            AttemptSchedule::FixedT,
            10,
            &mut rng,
        )
        .unwrap();
        assert!(out.accepted);
        assert_eq!(out.attempts, 1);
        assert_eq!(out.output, Some(0));
    }

    #[test]
    fn fill_sample_identity_rule_exhausts_attempts() {
        let k = Kernel::identity(2);
        // identity kernel is reducible, so hand it a stationary law directly
        let pi = Dist::uniform(2);
        let rule = TransitionRule::new(
            2,
            vec!["id".into()],
            vec![q1()],
            vec![vec![0, 1]],
        )
        .unwrap();
        let det = FullTracking::new(&rule);
        let mut rng = RngStream::from_seed(1);
        assert_eq!(
            fill_sample(
                &k,
                &pi,
                &rule,
                &det,
                0,
                1,
                AttemptSchedule::FixedT,
                5,
                &mut rng
            ),
            Err(Error::MaxAttemptsExceeded { attempts: 5 })
        );
    }

    #[test]
    fn fill_sample_doubling_grows_the_window() {
        let k = lazy_walk_kernel();
        let pi = Dist::uniform(3);
        let rule = two_map_rule();
        let det = FullTracking::new(&rule);
        // with a fixed stream, doubling can only accept at windows
        // t0 * 2^j, so t_used stays consistent with the attempt count
        let mut rng = RngStream::from_seed(17);
        let out = fill_sample(
            &k,
            &pi,
            &rule,
            &det,
            0,
            1,
            AttemptSchedule::DoublingT,
            32,
            &mut rng,
        )
        .unwrap();
        assert!(out.accepted);
        assert!(out.attempts >= 1);
    }

    #[test]
    fn altalg_single_state_reports_depth_zero() {
        let (k, pi, rule) = single_state();
        let mut rng = RngStream::from_seed(2);
        let out = altalg_run(&k, &pi, &rule, &pi, 4, SearchSchedule::EveryT, &mut rng).unwrap();
        assert_eq!(out.output, 0);
        assert_eq!(out.backward_time, 0);
    }

    #[test]
    fn altalg_powers_schedule_reports_no_earlier_than_every() {
        let k = lazy_walk_kernel();
        let pi = Dist::uniform(3);
        let rule = two_map_rule();
        for seed in 0..40 {
            let mut r1 = RngStream::from_seed(seed);
            let mut r2 = RngStream::from_seed(seed);
            let every =
                altalg_run(&k, &pi, &rule, &pi, 64, SearchSchedule::EveryT, &mut r1).unwrap();
            let pow2 =
                altalg_run(&k, &pi, &rule, &pi, 64, SearchSchedule::PowersOf2, &mut r2).unwrap();
            assert!(pow2.backward_time >= every.backward_time);
            assert!(pow2.backward_time.is_power_of_two());
        }
    }

    #[test]
    fn altalg_guarantee_reports_at_least_the_floor() {
        let k = lazy_walk_kernel();
        let pi = Dist::uniform(3);
        let rule = two_map_rule();
        let mut rng = RngStream::from_seed(5);
        for _ in 0..20 {
            let out = altalg_run(
                &k,
                &pi,
                &rule,
                &pi,
                64,
                SearchSchedule::Guarantee(4),
                &mut rng,
            )
            .unwrap();
            assert!(out.backward_time >= 3);
        }
    }

    #[test]
    fn altalg_rejects_unsupported_seed_law() {
        let k = lazy_walk_kernel();
        let rule = two_map_rule();
        // force zero stationary mass mismatch through a fake pi with a hole
        let pi_hat = Dist::point(3, 1);
        let bad_pi = Dist::new(vec![q(1, 2), q(0, 1), q(1, 2)]).unwrap();
        let mut rng = RngStream::from_seed(0);
        assert!(matches!(
            altalg_run(&k, &bad_pi, &rule, &pi_hat, 4, SearchSchedule::EveryT, &mut rng),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn sm_run_accepts_only_at_bottom() {
        let k = lazy_walk_kernel();
        let pi = Dist::uniform(3);
        let p = Poset::total_order(3);
        let fam = upward_family_from_rule(&two_map_rule(), &p).unwrap();
        let mut rng = RngStream::from_seed(7);
        let mut accepts = 0;
        for _ in 0..200 {
            let out = sm_fill_run(&k, &pi, &fam, &p, 2, &mut rng).unwrap();
            if out.accepted {
                accepts += 1;
                assert!(out.output.is_some());
            }
        }
        // acceptance probability is 3/4; 200 trials stay far from 0 and 200
        assert!(accepts > 100 && accepts < 200);
    }

    #[test]
    fn sm_run_t0_rejects_on_multi_state_spaces() {
        let k = lazy_walk_kernel();
        let pi = Dist::uniform(3);
        let p = Poset::total_order(3);
        let fam = upward_family_from_rule(&two_map_rule(), &p).unwrap();
        let mut rng = RngStream::from_seed(7);
        let out = sm_fill_run(&k, &pi, &fam, &p, 0, &mut rng).unwrap();
        assert!(!out.accepted);
    }

    #[test]
    fn cftp_single_state_is_trivial() {
        let (_, _, rule) = single_state();
        let mut rng = RngStream::from_seed(0);
        let out = cftp_run(&rule, 1, 8, &mut rng).unwrap();
        assert_eq!(out.output, 0);
        assert_eq!(out.backward_time, 0);
    }

    #[test]
    fn cftp_horizon_is_enforced() {
        let rule = TransitionRule::new(
            2,
            vec!["id".into()],
            vec![q1()],
            vec![vec![0, 1]],
        )
        .unwrap();
        let mut rng = RngStream::from_seed(0);
        assert_eq!(
            cftp_run(&rule, 1, 16, &mut rng),
            Err(Error::HorizonExceeded { limit: 16 })
        );
    }

    #[test]
    fn cftp_reports_power_of_two_windows() {
        let rule = two_map_rule();
        let mut rng = RngStream::from_seed(9);
        for _ in 0..50 {
            let out = cftp_run(&rule, 1, 1 << 12, &mut rng).unwrap();
            assert!(out.backward_time.is_power_of_two());
            assert_eq!(out.t_used, out.backward_time as u64);
        }
    }

    #[test]
    fn read_once_single_state_uses_two_blocks() {
        let (_, _, rule) = single_state();
        let mut rng = RngStream::from_seed(0);
        let out = read_once_cftp_run(&rule, 2, 100, &mut rng).unwrap();
        assert_eq!(out.blocks_used, 2);
        assert_eq!(out.output, 0);
    }

    #[test]
    fn read_once_respects_block_cap() {
        let rule = TransitionRule::new(
            2,
            vec!["id".into()],
            vec![q1()],
            vec![vec![0, 1]],
        )
        .unwrap();
        let mut rng = RngStream::from_seed(0);
        assert_eq!(
            read_once_cftp_run(&rule, 2, 10, &mut rng),
            Err(Error::HorizonExceeded { limit: 10 })
        );
    }

    #[test]
    fn tours_have_exact_length_and_chain_between_runs() {
        let k = lazy_walk_kernel();
        let pi = solve_stationary(&k).unwrap();
        let rule = two_map_rule();
        let mut rng = RngStream::from_seed(21);
        let batch = tours_generate(
            &k,
            &pi,
            &rule,
            2,
            25,
            TourSeed::Stationary(0),
            1 << 12,
            &mut rng,
        )
        .unwrap();
        assert!(batch.exact);
        assert_eq!(batch.tours.len(), 25);
        assert!(batch.tours.iter().all(|t| t.states().len() == 2));
        // the first tour ends at the provided seed
        assert_eq!(batch.tours[0].last(), 0);
        // every adjacent pair inside a tour is a positive-probability step
        for tour in &batch.tours {
            for w in tour.states().windows(2) {
                assert!(!k.get(w[0], w[1]).is_zero());
            }
        }
    }

    #[test]
    fn single_tour_with_unit_length_is_the_seed() {
        let k = lazy_walk_kernel();
        let pi = solve_stationary(&k).unwrap();
        let rule = two_map_rule();
        let mut rng = RngStream::from_seed(3);
        let batch = tours_generate(
            &k,
            &pi,
            &rule,
            1,
            1,
            TourSeed::Approximate(1),
            1 << 12,
            &mut rng,
        )
        .unwrap();
        assert!(!batch.exact);
        assert_eq!(batch.tours[0].states(), &[1]);
    }
}
