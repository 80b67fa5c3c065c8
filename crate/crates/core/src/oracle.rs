//! Exact exhaustive enumeration over all randomness of the samplers.
//!
//! The enumerations walk the probability space the samplers actually
//! simulate — backward reversed-kernel paths crossed with imputed driving
//! values — and return rational acceptance probabilities and conditional
//! laws. They are the ground truth every statistical test is calibrated
//! against: the central identity is that the conditional law of the output
//! given acceptance equals the stationary distribution exactly.
//!
//! A second, independent route over the driving values alone (the
//! stationary-chain space) is computed alongside and must agree through
//! the seed density; tests assert that agreement as a rational identity.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::chain::{reverse_kernel, Dist, Kernel, StateIx};
use crate::detection::{DetectionProcess, DrivingSequence};
use crate::error::{Error, Result};
use crate::imputation::{impute_dist_given_kernel, impute_independent, ImputedDist};
use crate::order::{Poset, UpwardKernelFamily};
use crate::ratio::{q0, q1, Q};
use crate::rule::{LabelIx, TransitionRule};
use crate::samplers::SearchSchedule;

/// Enumeration limits. The cap counts leaf terms, not wall-clock time, so
/// runs are deterministic.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub term_cap: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            term_cap: 10_000_000,
        }
    }
}

/// Seed of the backward phase: a deterministic state or a law over states.
#[derive(Debug, Clone, Copy)]
pub enum SeedLaw<'a> {
    Fixed(StateIx),
    Law(&'a Dist),
}

impl<'a> SeedLaw<'a> {
    fn weights(&self, n: usize) -> Vec<(StateIx, Q)> {
        match self {
            SeedLaw::Fixed(z) => vec![(*z, q1())],
            SeedLaw::Law(d) => {
                assert_eq!(d.len(), n, "seed law dimension mismatch");
                d.support().map(|x| (x, d.get(x).clone())).collect()
            }
        }
    }

    fn density(&self, pi: &Dist) -> Result<Vec<Q>> {
        let n = pi.len();
        let mut out = vec![q0(); n];
        for (x, w) in self.weights(n) {
            if pi.get(x).is_zero() {
                return Err(Error::ZeroMassSeed { state: x });
            }
            out[x] = w / pi.get(x);
        }
        Ok(out)
    }
}

/// Exact description of one acceptance configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptanceReport {
    /// Probability that the routine accepts.
    pub p_accept: Q,
    /// Conditional law of the backward state at each time `0..=t` given
    /// acceptance; empty when `p_accept` is zero.
    pub cond_law: Vec<Dist>,
    /// Unnormalized joint mass of (first detector hit time, output state)
    /// over acceptances; the entries sum to `p_accept`.
    pub joint_hit_output: BTreeMap<usize, Vec<Q>>,
    /// Density of the seed law with respect to the stationary law, per state.
    pub seed_density: Vec<Q>,
    /// The acceptance mass computed on the driving-value space alone: for a
    /// deterministic seed, the raw mass of driving outcomes that fire the
    /// detector and coalesce onto the seed (so `p_accept * pi(seed)` exactly);
    /// for a random seed, the same mass folded through the seed density
    /// (equal to `p_accept` directly).
    pub p_first_space: Q,
}

impl AcceptanceReport {
    /// Conditional law of the reported output given acceptance.
    pub fn output_law(&self) -> Option<&Dist> {
        self.cond_law.first()
    }

    /// Exact check that run length and output are conditionally independent
    /// given acceptance.
    pub fn hit_output_factorizes(&self) -> bool {
        joint_factorizes(&self.joint_hit_output, &self.p_accept)
    }
}

fn joint_factorizes(joint: &BTreeMap<usize, Vec<Q>>, total: &Q) -> bool {
    if total.is_zero() {
        return true;
    }
    let n = joint.values().next().map_or(0, Vec::len);
    let mut time_marg: BTreeMap<usize, Q> = BTreeMap::new();
    let mut out_marg = vec![q0(); n];
    for (t, row) in joint {
        let mass: Q = row.iter().cloned().sum();
        time_marg.insert(*t, mass);
        for (z, w) in row.iter().enumerate() {
            out_marg[z] += w;
        }
    }
    for (t, row) in joint {
        for (z, w) in row.iter().enumerate() {
            if w * total != time_marg[t].clone() * out_marg[z].clone() {
                return false;
            }
        }
    }
    true
}

struct TermCounter {
    used: u64,
    cap: u64,
}

impl TermCounter {
    fn new(cap: u64) -> Self {
        TermCounter { used: 0, cap }
    }

    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.cap {
            Err(Error::EnumerationTooLarge { cap: self.cap })
        } else {
            Ok(())
        }
    }
}

/// All backward paths of length `t` from `start` under the reversed kernel,
/// returned in chronological order (time 0 first) with their probabilities.
fn backward_paths(
    rev: &Kernel,
    start: StateIx,
    t: usize,
    counter: &mut TermCounter,
) -> Result<Vec<(Vec<StateIx>, Q)>> {
    let mut paths = vec![(vec![start], q1())];
    for _ in 0..t {
        let mut next = Vec::new();
        for (p, w) in &paths {
            let cur = *p.last().expect("nonempty");
            for x in rev.row(cur).support() {
                counter.tick()?;
                let mut p2 = p.clone();
                p2.push(x);
                next.push((p2, w * rev.get(cur, x)));
            }
        }
        paths = next;
    }
    Ok(paths
        .into_iter()
        .map(|(mut p, w)| {
            p.reverse();
            (p, w)
        })
        .collect())
}

/// Exact law of the fixed-window routine: walks every backward path from
/// the seed and every imputed driving sequence, evaluating the detector on
/// each.
pub fn enumerate_fill<D: DetectionProcess>(
    k: &Kernel,
    pi: &Dist,
    rule: &TransitionRule,
    det: &D,
    t: usize,
    seed: SeedLaw<'_>,
    opts: OracleOptions,
) -> Result<AcceptanceReport> {
    let n = k.n_states();
    let rev = reverse_kernel(k, pi)?;
    let seed_density = seed.density(pi)?;
    let mut counter = TermCounter::new(opts.term_cap);

    // imputation supports per ordered transition, computed once
    let mut imputed: Vec<Vec<Option<ImputedDist>>> = vec![vec![None; n]; n];
    for x in 0..n {
        for y in 0..n {
            if !k.get(x, y).is_zero() {
                imputed[x][y] = Some(impute_dist_given_kernel(rule, k, x, y)?);
            }
        }
    }

    let mut p_accept = q0();
    let mut cond_mass = vec![vec![q0(); n]; t + 1];
    let mut joint: BTreeMap<usize, Vec<Q>> = BTreeMap::new();
    let mut total = q0();

    for (z, zw) in seed.weights(n) {
        if pi.get(z).is_zero() {
            return Err(Error::ZeroMassSeed { state: z });
        }
        for (path, pw) in backward_paths(&rev, z, t, &mut counter)? {
            let supports: Vec<&ImputedDist> = (1..=t)
                .map(|s| {
                    imputed[path[s - 1]][path[s]]
                        .as_ref()
                        .expect("backward paths only use positive transitions")
                })
                .collect();
            let base = zw.clone() * pw;
            enumerate_drivings(&supports, &mut counter, &mut |labels, dw| {
                let w = base.clone() * dw;
                total += w.clone();
                let u = DrivingSequence::new(labels.to_vec());
                if let Some(hit) = det.first_hit(&u) {
                    p_accept += w.clone();
                    for (s, &xs) in path.iter().enumerate() {
                        cond_mass[s][xs] += w.clone();
                    }
                    joint.entry(hit).or_insert_with(|| vec![q0(); n])[path[0]] += w;
                }
            })?;
        }
    }
    debug_assert!(total.is_one(), "enumerated mass must be 1");

    let cond_law = if p_accept.is_zero() {
        Vec::new()
    } else {
        cond_mass
            .into_iter()
            .map(|row| {
                Dist::new(row.into_iter().map(|m| m / p_accept.clone()).collect())
                    .expect("conditional law normalizes")
            })
            .collect()
    };

    // independent route: driving values alone, folded through the detector
    let fired = fired_coalescence_mass(rule, det, t, &mut counter)?;
    let p_first_space = match seed {
        SeedLaw::Fixed(z) => fired[z].clone(),
        SeedLaw::Law(_) => fired
            .iter()
            .zip(&seed_density)
            .map(|(m, d)| m * d)
            .sum(),
    };

    Ok(AcceptanceReport {
        p_accept,
        cond_law,
        joint_hit_output: joint,
        seed_density,
        p_first_space,
    })
}

fn enumerate_drivings(
    supports: &[&ImputedDist],
    counter: &mut TermCounter,
    visit: &mut dyn FnMut(&[LabelIx], &Q),
) -> Result<()> {
    fn rec(
        supports: &[&ImputedDist],
        s: usize,
        labels: &mut Vec<LabelIx>,
        w: &Q,
        counter: &mut TermCounter,
        visit: &mut dyn FnMut(&[LabelIx], &Q),
    ) -> Result<()> {
        if s == supports.len() {
            counter.tick()?;
            visit(labels, w);
            return Ok(());
        }
        for (u, uw) in supports[s].iter() {
            labels.push(u);
            rec(supports, s + 1, labels, &(w * uw), counter, visit)?;
            labels.pop();
        }
        Ok(())
    }
    rec(supports, 0, &mut Vec::new(), &q1(), counter, visit)
}

/// Driving-space mass, per coalesced endpoint, of sequences on which the
/// detector fires within the window and the coupled front has coalesced.
fn fired_coalescence_mass<D: DetectionProcess>(
    rule: &TransitionRule,
    det: &D,
    t: usize,
    counter: &mut TermCounter,
) -> Result<Vec<Q>> {
    let n = rule.n_states();
    let mut mass = vec![q0(); n];
    let mut labels = vec![0usize; t];
    loop {
        counter.tick()?;
        let u = DrivingSequence::new(labels.clone());
        if det.first_hit(&u).is_some() {
            let mut front: Vec<StateIx> = (0..n).collect();
            for &l in &labels {
                front = front.iter().map(|&y| rule.apply(y, l)).collect();
            }
            if front.iter().all(|&v| v == front[0]) {
                let w: Q = labels.iter().map(|&l| rule.mu(l).clone()).product();
                mass[front[0]] += w;
            }
        }
        let mut pos = t;
        loop {
            if pos == 0 {
                return Ok(mass);
            }
            pos -= 1;
            labels[pos] += 1;
            if labels[pos] < rule.n_labels() {
                break;
            }
            labels[pos] = 0;
        }
    }
}

/// Fixed-window law for the independent-transitions rule of a kernel,
/// enumerated in factored form per time step (the label set is never
/// materialized) with exact-coalescence detection.
pub fn enumerate_fill_independent(
    k: &Kernel,
    pi: &Dist,
    t: usize,
    seed: SeedLaw<'_>,
    opts: OracleOptions,
) -> Result<AcceptanceReport> {
    let n = k.n_states();
    let rev = reverse_kernel(k, pi)?;
    let seed_density = seed.density(pi)?;
    let mut counter = TermCounter::new(opts.term_cap);

    let mut p_accept = q0();
    let mut cond_mass = vec![vec![q0(); n]; t + 1];
    let mut joint: BTreeMap<usize, Vec<Q>> = BTreeMap::new();
    let mut total = q0();

    for (z, zw) in seed.weights(n) {
        if pi.get(z).is_zero() {
            return Err(Error::ZeroMassSeed { state: z });
        }
        for (path, pw) in backward_paths(&rev, z, t, &mut counter)? {
            let steps: Vec<Vec<(Vec<StateIx>, Q)>> = (1..=t)
                .map(|s| {
                    impute_independent(k, path[s - 1], path[s])
                        .map(|f| f.support_maps())
                })
                .collect::<Result<_>>()?;
            let base = zw.clone() * pw;
            rec_factored(
                &steps,
                0,
                &(0..n).collect::<Vec<_>>(),
                if n == 1 { Some(0) } else { None },
                &base,
                &mut counter,
                &mut |hit, w| {
                    total += w.clone();
                    if let Some(h) = hit {
                        p_accept += w.clone();
                        for (s, &xs) in path.iter().enumerate() {
                            cond_mass[s][xs] += w.clone();
                        }
                        joint.entry(h).or_insert_with(|| vec![q0(); n])[path[0]] += w.clone();
                    }
                },
            )?;
        }
    }
    debug_assert!(total.is_one());

    let cond_law = if p_accept.is_zero() {
        Vec::new()
    } else {
        cond_mass
            .into_iter()
            .map(|row| {
                Dist::new(row.into_iter().map(|m| m / p_accept.clone()).collect())
                    .expect("conditional law normalizes")
            })
            .collect()
    };

    // driving-only route over unconditioned map draws
    let fired = independent_coalescence_mass(k, t, &mut counter)?;
    let p_first_space = match seed {
        SeedLaw::Fixed(z) => fired[z].clone(),
        SeedLaw::Law(_) => fired
            .iter()
            .zip(&seed_density)
            .map(|(m, d)| m * d)
            .sum(),
    };

    Ok(AcceptanceReport {
        p_accept,
        cond_law,
        joint_hit_output: joint,
        seed_density,
        p_first_space,
    })
}

fn rec_factored(
    steps: &[Vec<(Vec<StateIx>, Q)>],
    s: usize,
    front: &[StateIx],
    hit: Option<usize>,
    w: &Q,
    counter: &mut TermCounter,
    visit: &mut dyn FnMut(Option<usize>, &Q),
) -> Result<()> {
    if s == steps.len() {
        counter.tick()?;
        visit(hit, w);
        return Ok(());
    }
    for (map, mw) in &steps[s] {
        let new_front: Vec<StateIx> = front.iter().map(|&y| map[y]).collect();
        let new_hit = hit.or_else(|| {
            new_front
                .iter()
                .all(|&v| v == new_front[0])
                .then_some(s + 1)
        });
        rec_factored(steps, s + 1, &new_front, new_hit, &(w * mw), counter, visit)?;
    }
    Ok(())
}

/// Coalescence mass per endpoint for `t` unconditioned independent-rule
/// steps, factored per step.
fn independent_coalescence_mass(
    k: &Kernel,
    t: usize,
    counter: &mut TermCounter,
) -> Result<Vec<Q>> {
    let n = k.n_states();
    // unconditioned step support: all maps with their product weights
    let mut maps = vec![(Vec::<StateIx>::new(), q1())];
    for x in 0..n {
        let mut next = Vec::new();
        for (prefix, w) in &maps {
            for y in k.row(x).support() {
                let mut p = prefix.clone();
                p.push(y);
                next.push((p, w * k.get(x, y)));
            }
        }
        maps = next;
    }
    fn walk(
        maps: &[(Vec<StateIx>, Q)],
        remaining: usize,
        front: &[StateIx],
        w: &Q,
        counter: &mut TermCounter,
        mass: &mut [Q],
    ) -> Result<()> {
        if remaining == 0 {
            counter.tick()?;
            if front.iter().all(|&v| v == front[0]) {
                mass[front[0]] += w.clone();
            }
            return Ok(());
        }
        for (map, mw) in maps {
            let new_front: Vec<StateIx> = front.iter().map(|&y| map[y]).collect();
            walk(maps, remaining - 1, &new_front, &(w * mw), counter, mass)?;
        }
        Ok(())
    }
    let mut mass = vec![q0(); n];
    walk(
        &maps,
        t,
        &(0..n).collect::<Vec<_>>(),
        &q1(),
        &mut *counter,
        &mut mass,
    )?;
    Ok(mass)
}

/// Exact law of the backward-search sampler: joint distribution of the
/// reported depth and the output, plus the success probability within the
/// horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AltAlgReport {
    /// Probability of coalescing within the horizon.
    pub p_accept: Q,
    /// Unnormalized joint mass of (reported depth, output); sums to
    /// `p_accept`.
    pub joint: BTreeMap<usize, Vec<Q>>,
}

impl AltAlgReport {
    /// Conditional law of the output given success.
    pub fn output_law(&self) -> Option<Dist> {
        if self.p_accept.is_zero() {
            return None;
        }
        let n = self.joint.values().next().map_or(0, Vec::len);
        let mut out = vec![q0(); n];
        for row in self.joint.values() {
            for (z, w) in row.iter().enumerate() {
                out[z] += w / self.p_accept.clone();
            }
        }
        Some(Dist::new(out).expect("normalized by p_accept"))
    }

    /// Conditional law of the reported depth given success.
    pub fn depth_law(&self) -> BTreeMap<usize, Q> {
        self.joint
            .iter()
            .map(|(t, row)| (*t, row.iter().cloned().sum::<Q>() / self.p_accept.clone()))
            .collect()
    }

    /// Exact interruptibility: depth and output are conditionally
    /// independent given success.
    pub fn factorizes(&self) -> bool {
        joint_factorizes(&self.joint, &self.p_accept)
    }
}

/// Enumerates the backward-search sampler exactly up to `t_max`.
pub fn enumerate_altalg(
    k: &Kernel,
    pi: &Dist,
    rule: &TransitionRule,
    pi_hat: &Dist,
    t_max: usize,
    search: SearchSchedule,
    opts: OracleOptions,
) -> Result<AltAlgReport> {
    let n = k.n_states();
    if pi_hat.support().any(|x| pi.get(x).is_zero()) {
        return Err(Error::invalid(
            "pi_hat is not absolutely continuous with respect to pi",
        ));
    }
    let rev = reverse_kernel(k, pi)?;
    let mut counter = TermCounter::new(opts.term_cap);
    let mut imputed: Vec<Vec<Option<ImputedDist>>> = vec![vec![None; n]; n];
    for x in 0..n {
        for y in 0..n {
            if !k.get(x, y).is_zero() {
                imputed[x][y] = Some(impute_dist_given_kernel(rule, k, x, y)?);
            }
        }
    }

    let mut joint: BTreeMap<usize, Vec<Q>> = BTreeMap::new();
    let mut p_accept = q0();

    // tail extension: pure reversed-kernel branching from the coalescence
    // depth down to the reported depth
    fn extend_tail(
        rev: &Kernel,
        depth: usize,
        x: StateIx,
        target: usize,
        w: &Q,
        counter: &mut TermCounter,
        sink: &mut dyn FnMut(StateIx, &Q),
    ) -> Result<()> {
        if depth == target {
            counter.tick()?;
            sink(x, w);
            return Ok(());
        }
        for x_new in rev.row(x).support() {
            extend_tail(
                rev,
                depth + 1,
                x_new,
                target,
                &(w * rev.get(x, x_new)),
                counter,
                sink,
            )?;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn go(
        rev: &Kernel,
        rule: &TransitionRule,
        imputed: &[Vec<Option<ImputedDist>>],
        search: SearchSchedule,
        t_max: usize,
        depth: usize,
        x_last: StateIx,
        comp: &[StateIx],
        w: &Q,
        counter: &mut TermCounter,
        joint: &mut BTreeMap<usize, Vec<Q>>,
        p_accept: &mut Q,
    ) -> Result<()> {
        counter.tick()?;
        let n = comp.len();
        if search.tests_at(depth) && comp.iter().all(|&v| v == comp[0]) {
            let reported = search.reported_depth(depth);
            *p_accept += w.clone();
            extend_tail(rev, depth, x_last, reported, w, counter, &mut |z, tw| {
                joint.entry(reported).or_insert_with(|| vec![q0(); n])[z] += tw.clone();
            })?;
            return Ok(());
        }
        if depth == t_max {
            return Ok(()); // horizon exceeded: failure mass
        }
        for x_new in rev.row(x_last).support() {
            let step_w = w * rev.get(x_last, x_new);
            let d = imputed[x_new][x_last]
                .as_ref()
                .expect("reversed support matches forward support");
            for (u, uw) in d.iter() {
                let comp_new: Vec<StateIx> =
                    (0..n).map(|x| comp[rule.apply(x, u)]).collect();
                go(
                    rev,
                    rule,
                    imputed,
                    search,
                    t_max,
                    depth + 1,
                    x_new,
                    &comp_new,
                    &(step_w.clone() * uw),
                    counter,
                    joint,
                    p_accept,
                )?;
            }
        }
        Ok(())
    }

    let identity: Vec<StateIx> = (0..n).collect();
    for z0 in pi_hat.support() {
        go(
            &rev,
            rule,
            &imputed,
            search,
            t_max,
            0,
            z0,
            &identity,
            pi_hat.get(z0),
            &mut counter,
            &mut joint,
            &mut p_accept,
        )?;
    }
    Ok(AltAlgReport { joint, p_accept })
}

/// Exact law of the monotone routine with a single kernel.
pub fn enumerate_sm(
    k: &Kernel,
    pi: &Dist,
    fam: &UpwardKernelFamily,
    poset: &Poset,
    t: usize,
    opts: OracleOptions,
) -> Result<AcceptanceReport> {
    enumerate_sm_pair(k, k, pi, fam, poset, t, opts)
}

/// Exact law of the cross-monotone routine: backward under the target's
/// reversal, forward under the dominating kernel through the family.
pub fn enumerate_sm_cross(
    cfg: &crate::order::CrossSmConfig,
    pi: &Dist,
    fam: &UpwardKernelFamily,
    poset: &Poset,
    t: usize,
    opts: OracleOptions,
) -> Result<AcceptanceReport> {
    enumerate_sm_pair(&cfg.k, &cfg.l, pi, fam, poset, t, opts)
}

fn enumerate_sm_pair(
    k: &Kernel,
    upper: &Kernel,
    pi: &Dist,
    fam: &UpwardKernelFamily,
    poset: &Poset,
    t: usize,
    opts: OracleOptions,
) -> Result<AcceptanceReport> {
    let n = k.n_states();
    let bottom = poset.bottom();
    let top = poset.top();
    if pi.get(bottom).is_zero() {
        return Err(Error::ZeroBottomMass);
    }
    let rev = reverse_kernel(k, pi)?;
    let mut counter = TermCounter::new(opts.term_cap);

    let mut p_accept = q0();
    let mut cond_mass = vec![vec![q0(); n]; t + 1];
    let mut total = q0();

    fn forward(
        fam: &UpwardKernelFamily,
        path: &[StateIx],
        s: usize,
        y: StateIx,
        w: &Q,
        bottom: StateIx,
        counter: &mut TermCounter,
        sink: &mut dyn FnMut(bool, &Q),
    ) -> Result<()> {
        if s == path.len() - 1 {
            counter.tick()?;
            sink(y == bottom, w);
            return Ok(());
        }
        let row = fam.get(path[s], y, path[s + 1])?;
        for y_new in row.support() {
            forward(
                fam,
                path,
                s + 1,
                y_new,
                &(w * row.get(y_new)),
                bottom,
                counter,
                sink,
            )?;
        }
        Ok(())
    }

    for (path, pw) in backward_paths(&rev, bottom, t, &mut counter)? {
        forward(
            fam,
            &path,
            0,
            top,
            &pw,
            bottom,
            &mut counter,
            &mut |accepted, w| {
                total += w.clone();
                if accepted {
                    p_accept += w.clone();
                    for (s, &xs) in path.iter().enumerate() {
                        cond_mass[s][xs] += w.clone();
                    }
                }
            },
        )?;
    }
    debug_assert!(total.is_one());

    let cond_law = if p_accept.is_zero() {
        Vec::new()
    } else {
        cond_mass
            .into_iter()
            .map(|row| {
                Dist::new(row.into_iter().map(|m| m / p_accept.clone()).collect())
                    .expect("conditional law normalizes")
            })
            .collect()
    };
    let mut joint = BTreeMap::new();
    if !p_accept.is_zero() {
        let mut row = vec![q0(); n];
        if let Some(first) = cond_law.first() {
            for z in 0..n {
                row[z] = first.get(z) * &p_accept;
            }
        }
        joint.insert(t, row);
    }
    let mut seed_density = vec![q0(); n];
    seed_density[bottom] = q1() / pi.get(bottom);
    // upper-chain route: the forward chain is marginally the upper kernel
    // started at the top, so first-space mass is its t-step mass at bottom
    let p_first_space = upper.power(t).get(top, bottom).clone();
    Ok(AcceptanceReport {
        p_accept,
        cond_law,
        joint_hit_output: joint,
        seed_density,
        p_first_space,
    })
}

/// Mass of driving sequences coalescing by `t`, split by the coalesced
/// endpoint.
pub fn coalescence_mass_by_value(
    rule: &TransitionRule,
    t: usize,
    opts: OracleOptions,
) -> Result<Vec<Q>> {
    struct AlwaysFire;
    impl DetectionProcess for AlwaysFire {
        type State = ();
        fn initial(&self) {}
        fn step(&self, _: &(), _: LabelIx) {}
        fn in_target(&self, _: &()) -> bool {
            true
        }
    }
    let mut counter = TermCounter::new(opts.term_cap);
    fired_coalescence_mass(rule, &AlwaysFire, t, &mut counter)
}

/// Probability that a width-`t` window coalesces under the rule's driving
/// law: the stationary mixture, over seeds, of the fixed-window acceptance
/// probabilities.
pub fn enumerate_cftp_window(rule: &TransitionRule, t: usize, opts: OracleOptions) -> Result<Q> {
    Ok(coalescence_mass_by_value(rule, t, opts)?.into_iter().sum())
}

/// Exact per-block behavior of read-once coupling at block width `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockAnalysis {
    /// Probability that one block coalesces.
    pub p_coalesce: Q,
    /// Law of the coalesced value given coalescence.
    pub value_law: Dist,
    /// Non-coalescing composed maps with their raw masses (sum to
    /// `1 - p_coalesce`).
    pub noncoal_maps: Vec<(Vec<StateIx>, Q)>,
}

/// Enumerates one block of the read-once sampler.
pub fn read_once_block_analysis(
    rule: &TransitionRule,
    t: usize,
    opts: OracleOptions,
) -> Result<BlockAnalysis> {
    let n = rule.n_states();
    let mut counter = TermCounter::new(opts.term_cap);
    let mut coal_mass = vec![q0(); n];
    let mut noncoal: BTreeMap<Vec<StateIx>, Q> = BTreeMap::new();
    let mut labels = vec![0usize; t];
    loop {
        counter.tick()?;
        let mut map: Vec<StateIx> = (0..n).collect();
        for &l in &labels {
            map = map.iter().map(|&y| rule.apply(y, l)).collect();
        }
        let w: Q = labels.iter().map(|&l| rule.mu(l).clone()).product();
        if map.iter().all(|&v| v == map[0]) {
            coal_mass[map[0]] += w;
        } else {
            *noncoal.entry(map).or_insert_with(q0) += w;
        }
        let mut pos = t;
        loop {
            if pos == 0 {
                let p_coalesce: Q = coal_mass.iter().cloned().sum();
                if p_coalesce.is_zero() {
                    return Err(Error::invalid(
                        "blocks of this width never coalesce; widen the block",
                    ));
                }
                let value_law = Dist::new(
                    coal_mass
                        .iter()
                        .map(|m| m / p_coalesce.clone())
                        .collect(),
                )
                .expect("normalized");
                return Ok(BlockAnalysis {
                    p_coalesce,
                    value_law,
                    noncoal_maps: noncoal.into_iter().collect(),
                });
            }
            pos -= 1;
            labels[pos] += 1;
            if labels[pos] < rule.n_labels() {
                break;
            }
            labels[pos] = 0;
        }
    }
}

/// Exact conditional output law of the read-once sampler given the total
/// block count. The first coalescing block is uniform over the positions it
/// can occupy, and each later non-coalescing block pushes the tracked state
/// through the conditioned non-coalescing channel.
pub fn read_once_conditional_output(a: &BlockAnalysis, blocks_used: u64) -> Result<Dist> {
    if blocks_used < 2 {
        return Err(Error::invalid("read-once output needs at least two blocks"));
    }
    let n = a.value_law.len();
    let p_non: Q = q1() - a.p_coalesce.clone();
    let hops = blocks_used - 2; // mixture over 0..=hops channel applications
    if hops > 0 && p_non.is_zero() {
        return Err(Error::invalid(
            "block count impossible: every block coalesces",
        ));
    }
    let mut mix = vec![q0(); n];
    let mut cur: Vec<Q> = a.value_law.weights().to_vec();
    for j in 0..=hops {
        for z in 0..n {
            mix[z] += cur[z].clone();
        }
        if j < hops {
            // one application of the conditioned non-coalescing channel
            let mut next = vec![q0(); n];
            for (map, w) in &a.noncoal_maps {
                let cw = w / p_non.clone();
                for z in 0..n {
                    next[map[z]] += cur[z].clone() * cw.clone();
                }
            }
            cur = next;
        }
    }
    let count = Q::from_integer((hops + 1).into());
    Dist::new(mix.into_iter().map(|m| m / count.clone()).collect())
}
