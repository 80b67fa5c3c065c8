//! Finite state spaces, exact distributions and Markov kernels.
//!
//! States are referenced by dense indices (`StateIx`); a [`StateSpace`]
//! carries the human-readable labels and is only consulted at the I/O
//! boundary. All kernel and distribution entries are exact rationals, so
//! stationarity, reversal and round-trip identities hold as equalities,
//! not approximations.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::ratio::{q0, q1, Q};
use crate::rng::RngStream;

/// Dense state index.
pub type StateIx = usize;

/// Ordered set of distinct state labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
    index: HashMap<String, StateIx>,
}

impl StateSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("state space must be nonempty"));
        }
        let mut index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate state label `{l}`")));
            }
        }
        Ok(StateSpace { labels, index })
    }

    /// Space labelled `"0", "1", ...`.
    pub fn numbered(n: usize) -> Self {
        StateSpace::new((0..n).map(|i| i.to_string()).collect()).expect("n > 0")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }

    pub fn label(&self, ix: StateIx) -> &str {
        &self.labels[ix]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<StateIx> {
        self.index.get(label).copied()
    }
}

/// Exact probability distribution over states: nonnegative rational weights
/// summing to one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dist {
    w: Vec<Q>,
}

impl Dist {
    pub fn new(w: Vec<Q>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::invalid("distribution over an empty space"));
        }
        if w.iter().any(|x| x.is_negative()) {
            return Err(Error::invalid("negative probability weight"));
        }
        let total: Q = w.iter().cloned().sum();
        if !total.is_one() {
            return Err(Error::invalid(format!(
                "weights sum to {}, expected 1",
                crate::ratio::format_ratio(&total)
            )));
        }
        Ok(Dist { w })
    }

    /// Point mass at `at`.
    pub fn point(n: usize, at: StateIx) -> Self {
        let mut w = vec![q0(); n];
        w[at] = q1();
        Dist { w }
    }

    pub fn uniform(n: usize) -> Self {
        let share = Q::new(1.into(), (n as i64).into());
        Dist {
            w: vec![share; n],
        }
    }

    /// Normalizes raw nonnegative weights; errors if all are zero.
    pub fn normalized(raw: Vec<Q>) -> Result<Self> {
        let total: Q = raw.iter().cloned().sum();
        if total.is_zero() {
            return Err(Error::invalid("cannot normalize an all-zero weight vector"));
        }
        if raw.iter().any(|x| x.is_negative()) {
            return Err(Error::invalid("negative probability weight"));
        }
        Ok(Dist {
            w: raw.into_iter().map(|x| x / total.clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn get(&self, ix: StateIx) -> &Q {
        &self.w[ix]
    }

    pub fn weights(&self) -> &[Q] {
        &self.w
    }

    pub fn support(&self) -> impl Iterator<Item = StateIx> + '_ {
        self.w
            .iter()
            .enumerate()
            .filter(|(_, x)| !x.is_zero())
            .map(|(i, _)| i)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.w.iter().all(|x| x.is_positive())
    }

    /// Exact categorical draw.
    pub fn sample(&self, rng: &mut RngStream) -> StateIx {
        CatSampler::new(self.weights()).sample(rng)
    }
}

/// Exact categorical sampler over rational weights: draws a uniform integer
/// below the common denominator and walks the integer CDF. A machine-word
/// fast path covers the usual small denominators.
#[derive(Debug, Clone)]
pub(crate) enum CatSampler {
    Small { cum: Vec<u64>, total: u64 },
    Big { cum: Vec<BigUint>, total: BigUint },
}

impl CatSampler {
    pub(crate) fn new(weights: &[Q]) -> Self {
        let denom = weights
            .iter()
            .fold(num_bigint::BigInt::one(), |acc, w| acc.lcm(w.denom()));
        let numers: Vec<num_bigint::BigInt> = weights
            .iter()
            .map(|w| w.numer() * (&denom / w.denom()))
            .collect();
        let total: num_bigint::BigInt = numers.iter().sum();
        debug_assert_eq!(total, denom);
        if let Some(t) = total.to_u64() {
            let mut cum = Vec::with_capacity(numers.len());
            let mut acc = 0u64;
            for n in &numers {
                acc += n.to_u64().expect("part <= total");
                cum.push(acc);
            }
            CatSampler::Small { cum, total: t }
        } else {
            let mut cum = Vec::with_capacity(numers.len());
            let mut acc = BigUint::zero();
            for n in &numers {
                acc += n.magnitude();
                cum.push(acc.clone());
            }
            CatSampler::Big {
                cum,
                total: total.magnitude().clone(),
            }
        }
    }

    pub(crate) fn sample(&self, rng: &mut RngStream) -> usize {
        match self {
            CatSampler::Small { cum, total } => {
                let r = rng.below_u64(*total);
                cum.iter().position(|c| r < *c).expect("cdf covers range")
            }
            CatSampler::Big { cum, total } => {
                let r = rng.below_biguint(total);
                cum.iter().position(|c| r < *c).expect("cdf covers range")
            }
        }
    }
}

/// Row-stochastic rational matrix over a finite state space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kernel {
    rows: Vec<Dist>,
}

impl Kernel {
    pub fn new(rows: Vec<Dist>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("kernel must have at least one row"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("kernel rows must be square"));
        }
        Ok(Kernel { rows })
    }

    pub fn identity(n: usize) -> Self {
        Kernel {
            rows: (0..n).map(|i| Dist::point(n, i)).collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, x: StateIx) -> &Dist {
        &self.rows[x]
    }

    pub fn get(&self, x: StateIx, y: StateIx) -> &Q {
        self.rows[x].get(y)
    }

    /// `m`-step kernel, exact matrix power. `m = 0` is the identity.
    pub fn power(&self, m: usize) -> Kernel {
        let n = self.n_states();
        let mut out = Kernel::identity(n);
        for _ in 0..m {
            out = out.compose(self);
        }
        out
    }

    fn compose(&self, other: &Kernel) -> Kernel {
        let n = self.n_states();
        let rows = (0..n)
            .map(|x| {
                let w = (0..n)
                    .map(|z| {
                        (0..n)
                            .map(|y| self.get(x, y) * other.get(y, z))
                            .sum::<Q>()
                    })
                    .collect();
                Dist { w }
            })
            .collect();
        Kernel { rows }
    }

    /// One step of the chain applied to a distribution: `d * K`.
    pub fn apply(&self, d: &Dist) -> Dist {
        let n = self.n_states();
        let w = (0..n)
            .map(|y| (0..n).map(|x| d.get(x) * self.get(x, y)).sum::<Q>())
            .collect();
        Dist { w }
    }
}

/// True when every state reaches every other through positive-probability
/// transitions.
pub fn is_irreducible(k: &Kernel) -> bool {
    let n = k.n_states();
    let mut reach = vec![vec![false; n]; n];
    for x in 0..n {
        reach[x][x] = true;
        for y in 0..n {
            if !k.get(x, y).is_zero() {
                reach[x][y] = true;
            }
        }
    }
    for m in 0..n {
        for x in 0..n {
            if reach[x][m] {
                for y in 0..n {
                    if reach[m][y] {
                        reach[x][y] = true;
                    }
                }
            }
        }
    }
    reach.iter().all(|row| row.iter().all(|&b| b))
}

/// Unique stationary distribution of an irreducible kernel, solved exactly.
pub fn solve_stationary(k: &Kernel) -> Result<Dist> {
    if !is_irreducible(k) {
        return Err(Error::ReducibleChain);
    }
    let n = k.n_states();
    if n == 1 {
        return Ok(Dist::point(1, 0));
    }
    // Null space of (I - K^T): gaussian elimination, one free variable.
    let mut a: Vec<Vec<Q>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    let kc = k.get(c, r).clone();
                    if r == c {
                        q1() - kc
                    } else {
                        -kc
                    }
                })
                .collect()
        })
        .collect();
    let mut pivot_col_of_row = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..n).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        let inv = a[row][col].clone();
        for v in a[row].iter_mut() {
            *v = v.clone() / inv.clone();
        }
        for r in 0..n {
            if r != row && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c2 in 0..n {
                    a[r][c2] = a[r][c2].clone() - f.clone() * a[row][c2].clone();
                }
            }
        }
        pivot_col_of_row.push(col);
        row += 1;
        if row == n {
            break;
        }
    }
    let free: Vec<usize> = (0..n)
        .filter(|c| !pivot_col_of_row.contains(c))
        .collect();
    if free.len() != 1 {
        // Irreducibility guarantees a one-dimensional null space.
        return Err(Error::ReducibleChain);
    }
    let f = free[0];
    let mut v = vec![q0(); n];
    v[f] = q1();
    for (r, &pc) in pivot_col_of_row.iter().enumerate() {
        v[pc] = -a[r][f].clone();
    }
    let pi = Dist::normalized(v)?;
    debug_assert_eq!(k.apply(&pi), pi);
    Ok(pi)
}

/// Time reversal: `rev(y, x) = pi(x) k(x, y) / pi(y)`. Requires a strictly
/// positive stationary `pi`; the result is row-stochastic with the same
/// stationary distribution.
pub fn reverse_kernel(k: &Kernel, pi: &Dist) -> Result<Kernel> {
    let n = k.n_states();
    if pi.len() != n {
        return Err(Error::invalid("pi dimension does not match kernel"));
    }
    if let Some(state) = (0..n).find(|&x| pi.get(x).is_zero()) {
        return Err(Error::ZeroMassState { state });
    }
    if &k.apply(pi) != pi {
        return Err(Error::NotStationary);
    }
    let rows = (0..n)
        .map(|y| {
            let w = (0..n)
                .map(|x| pi.get(x) * k.get(x, y) / pi.get(y))
                .collect();
            Dist { w }
        })
        .collect();
    Ok(Kernel { rows })
}
