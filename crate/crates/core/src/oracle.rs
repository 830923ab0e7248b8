//! Exact, sampler-independent ground truth.
//!
//! Locally constant kernels induce finite Markov chains on fixed-depth word
//! states (or pairs of an `X`-component and a word). This module computes
//! their stationary distributions by a direct linear solve, cross-checked
//! with power iteration, and evaluates exact integrals of cylinder test
//! functions. It also provides the naive preimage-enumeration form of the
//! iterated transfer operator as an independent check on the matrix route.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symbolic::{Alphabet, Word};
use crate::testfn::TestFunction;
use crate::transfer::LocallyConstantPotential;
use crate::transport::PlanKernel;

/// Enumeration cap for [`naive_transfer_power`]: at most this many preimage
/// words are visited.
pub const PREIMAGE_CAP: u64 = 1_000_000;

const COLUMN_SUM_TOL: f64 = 1e-10;
const FIXED_POINT_TOL: f64 = 1e-12;
const CROSS_CHECK_TOL: f64 = 1e-10;

/// A state of an induced finite chain: a word of fixed depth, optionally
/// tagged with an `X`-component.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ChainState {
    Word(Word),
    Pair { x: u8, word: Word },
}

impl ChainState {
    pub fn word(&self) -> &Word {
        match self {
            ChainState::Word(w) => w,
            ChainState::Pair { word, .. } => word,
        }
    }

    pub fn x(&self) -> Option<u8> {
        match self {
            ChainState::Word(_) => None,
            ChainState::Pair { x, .. } => Some(*x),
        }
    }
}

impl std::fmt::Display for ChainState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChainState::Word(w) => write!(f, "{w}"),
            ChainState::Pair { x, word } => write!(f, "({x},{word})"),
        }
    }
}

/// A finite Markov chain with an explicit state list and a column-stochastic
/// transition matrix (column = from-state).
#[derive(Debug, Clone)]
pub struct FiniteChain {
    states: Vec<ChainState>,
    /// Row-major entries, `transition[to * n + from]`.
    transition: Vec<f64>,
}

impl FiniteChain {
    /// Build from explicit states and a column-stochastic matrix.
    pub fn new(states: Vec<ChainState>, transition: Vec<f64>) -> Result<Self> {
        let n = states.len();
        if transition.len() != n * n {
            return Err(Error::TableSizeMismatch {
                got: transition.len(),
                expected: n * n,
            });
        }
        let mut worst = 0.0f64;
        for from in 0..n {
            let mut sum = 0.0;
            for to in 0..n {
                let p = transition[to * n + from];
                if !(p.is_finite() && p >= 0.0) {
                    return Err(Error::NotAProbability {
                        reason: format!("transition ({to},{from}) = {p}"),
                    });
                }
                sum += p;
            }
            worst = worst.max((sum - 1.0).abs());
        }
        if worst > COLUMN_SUM_TOL {
            return Err(Error::NotStochastic {
                max_deviation: worst,
            });
        }
        Ok(FiniteChain { states, transition })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ChainState] {
        &self.states
    }

    pub fn probability(&self, to: usize, from: usize) -> f64 {
        self.transition[to * self.states.len() + from]
    }

    fn apply(&self, pi: &[f64], out: &mut [f64]) {
        let n = self.states.len();
        for (to, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for from in 0..n {
                acc += self.transition[to * n + from] * pi[from];
            }
            *slot = acc;
        }
    }
}

/// Stationary probabilities together with the state labels they index.
#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    states: Vec<ChainState>,
    probabilities: Vec<f64>,
    /// `max |P pi - pi|` at the returned vector.
    pub fixed_point_residual: f64,
}

impl StationaryDistribution {
    pub fn states(&self) -> &[ChainState] {
        &self.states
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Marginal over the `X`-component, if the states carry one.
    pub fn x_marginal(&self) -> Option<Vec<f64>> {
        let max_x = self
            .states
            .iter()
            .map(|s| s.x())
            .collect::<Option<Vec<u8>>>()?
            .into_iter()
            .max()?;
        let mut marginal = vec![0.0; max_x as usize];
        for (state, &p) in self.states.iter().zip(&self.probabilities) {
            marginal[state.x().unwrap() as usize - 1] += p;
        }
        Some(marginal)
    }

    /// Marginal over the word component (summing out `X` when present), in
    /// lexicographic word order.
    pub fn word_marginal(&self, alphabet: Alphabet) -> Vec<f64> {
        let depth = self.states[0].word().len();
        let mut marginal = vec![0.0; alphabet.word_count(depth)];
        for (state, &p) in self.states.iter().zip(&self.probabilities) {
            marginal[alphabet.word_index(state.word())] += p;
        }
        marginal
    }
}

/// The finite chain induced on depth-`q` words by a normalized potential:
/// from word `v`, prepend symbol `i` with probability `e^{A(i.v)}`.
pub fn classical_finite_chain(
    potential: &LocallyConstantPotential,
    depth: usize,
) -> Result<FiniteChain> {
    let deviation = potential.normalization_deviation();
    if deviation > COLUMN_SUM_TOL {
        return Err(Error::NotNormalized {
            max_deviation: deviation,
        });
    }
    let alphabet = potential.alphabet();
    let m = potential.depth();
    if depth + 1 < m {
        return Err(Error::WindowTooShort {
            window_len: depth,
            required: m - 1,
        });
    }
    let d = alphabet.size() as usize;
    let n = alphabet.word_count(depth);
    let states: Vec<ChainState> = alphabet.words(depth).map(ChainState::Word).collect();
    // Lexicographic index of i.v among length-(q+1) words is i*n + from; the
    // transition weight reads the potential off its length-m prefix.
    let drop = d.pow((depth + 1 - m) as u32);
    let mut transition = vec![0.0; n * n];
    for from in 0..n {
        for i in 0..d {
            let to = i * (n / d) + from / d;
            let weight = potential.values()[(i * n + from) / drop].exp();
            transition[to * n + from] += weight;
        }
    }
    FiniteChain::new(states, transition)
}

/// The finite chain induced on `(x, depth-q word)` pairs by a plan kernel:
/// from `(x, v)`, jump to `(alpha, i.v)` with probability `Cbar^alpha[i][v1]`.
pub fn plan_finite_chain(kernel: &PlanKernel, depth: usize) -> Result<FiniteChain> {
    if depth == 0 {
        return Err(Error::WindowTooShort {
            window_len: 0,
            required: 1,
        });
    }
    let alphabet = Alphabet::new(2).expect("binary alphabet");
    let words = alphabet.word_count(depth);
    let n = 2 * words;
    let mut states = Vec::with_capacity(n);
    for x in 1..=2u8 {
        for word in alphabet.words(depth) {
            states.push(ChainState::Pair { x, word });
        }
    }
    let mut transition = vec![0.0; n * n];
    for x_from in 0..2 {
        for v in 0..words {
            let from = x_from * words + v;
            let first = v / (words / 2); // leading digit of v, 0-based
            for alpha in 0..2 {
                for i in 0..2 {
                    let to_word = i * (words / 2) + v / 2;
                    let to = alpha * words + to_word;
                    transition[to * n + from] += kernel.cbar(alpha)[i][first];
                }
            }
        }
    }
    FiniteChain::new(states, transition)
}

/// Stationary distribution by direct linear solve of `(P - I) pi = 0` with a
/// sum-to-one normalization row, cross-checked against power iteration.
pub fn stationary(chain: &FiniteChain) -> Result<StationaryDistribution> {
    let n = chain.len();
    if n == 0 {
        return Err(Error::StationarySolve("empty chain".into()));
    }

    // Linear solve: replace the last balance row with the normalization.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for to in 0..n {
        for from in 0..n {
            a[(to, from)] = chain.probability(to, from) - if to == from { 1.0 } else { 0.0 };
        }
    }
    for from in 0..n {
        a[(n - 1, from)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let solved = a.lu().solve(&b).ok_or_else(|| {
        Error::StationarySolve("singular balance system (chain reducible or periodic?)".into())
    })?;
    let mut pi: Vec<f64> = solved.iter().cloned().collect();
    if pi.iter().any(|&p| !p.is_finite() || p < -1e-9) {
        return Err(Error::StationarySolve(format!(
            "solve produced an invalid probability vector {pi:?}"
        )));
    }
    for p in pi.iter_mut() {
        *p = p.max(0.0);
    }
    let total: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= total;
    }

    let mut image = vec![0.0; n];
    chain.apply(&pi, &mut image);
    let residual = image
        .iter()
        .zip(&pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if residual > FIXED_POINT_TOL {
        return Err(Error::StationarySolve(format!(
            "fixed-point residual {residual:.3e} exceeds {FIXED_POINT_TOL:.1e}"
        )));
    }

    // Power-iteration cross-check, renormalized each step so column-sum
    // rounding cannot leak mass over many iterations.
    let mut p0 = vec![1.0 / n as f64; n];
    let mut p1 = vec![0.0; n];
    let mut disagreement = f64::INFINITY;
    let mut prev_delta = f64::INFINITY;
    for _ in 0..200_000 {
        chain.apply(&p0, &mut p1);
        let mass: f64 = p1.iter().sum();
        for v in p1.iter_mut() {
            *v /= mass;
        }
        let delta = p1
            .iter()
            .zip(&p0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        std::mem::swap(&mut p0, &mut p1);
        disagreement = p0
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if disagreement <= 1e-12 || delta == 0.0 || (delta < 1e-13 && delta >= prev_delta) {
            break;
        }
        prev_delta = delta;
    }
    if disagreement > CROSS_CHECK_TOL {
        return Err(Error::StationaryDisagreement {
            difference: disagreement,
        });
    }

    Ok(StationaryDistribution {
        states: chain.states().to_vec(),
        probabilities: pi,
        fixed_point_residual: residual,
    })
}

/// Exact integral `sum_s f(s) pi(s)` of a test function against a stationary
/// distribution.
pub fn exact_integral(dist: &StationaryDistribution, f: &TestFunction) -> Result<f64> {
    let total: f64 = dist.probabilities().iter().sum();
    if (total - 1.0).abs() > 1e-9 || dist.probabilities().iter().any(|&p| p < 0.0) {
        return Err(Error::NotAProbability {
            reason: format!("stationary vector sums to {total}"),
        });
    }
    let state_depth = dist.states()[0].word().len();
    if f.depth() > state_depth {
        return Err(Error::WordTooLong {
            word_len: f.depth(),
            window_len: state_depth,
        });
    }
    if f.needs_x() && dist.states()[0].x().is_none() {
        return Err(Error::Config(
            "x-indicator evaluated on a chain without an x component".into(),
        ));
    }
    let mut acc = 0.0;
    for (state, &p) in dist.states().iter().zip(dist.probabilities()) {
        acc += f.eval_symbols(state.x(), state.word().symbols()) * p;
    }
    Ok(acc)
}

/// Exact `L_A^n(u)` evaluated at the word `y`, by direct enumeration of all
/// `d^n` preimage words with Birkhoff sums accumulated along the way.
///
/// `y` must carry at least `m - 1` symbols and `u` must have depth at most
/// `n + |y|`. The enumeration is capped at [`PREIMAGE_CAP`] evaluations.
pub fn naive_transfer_power(
    potential: &LocallyConstantPotential,
    u: &LocallyConstantPotential,
    n: usize,
    y: &Word,
) -> Result<f64> {
    let alphabet = potential.alphabet();
    y.validate(alphabet)?;
    if n == 0 {
        return Err(Error::EmptyRun);
    }
    let m = potential.depth();
    if y.len() + 1 < m {
        return Err(Error::WindowTooShort {
            window_len: y.len(),
            required: m - 1,
        });
    }
    if u.depth() > n + y.len() {
        return Err(Error::DimensionMismatch {
            context: "naive_transfer_power test table depth",
            got: u.depth(),
            expected: n + y.len(),
        });
    }
    let d = alphabet.size() as usize;
    let count = (d as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    if count > PREIMAGE_CAP {
        return Err(Error::ResourceLimit {
            required: count,
            cap: PREIMAGE_CAP,
        });
    }

    let mut total = 0.0;
    let mut symbols = vec![0u8; n + y.len()];
    symbols[n..].copy_from_slice(y.symbols());
    for idx in 0..count {
        let mut rest = idx;
        for slot in symbols[..n].iter_mut().rev() {
            *slot = (rest % d as u64) as u8 + 1;
            rest /= d as u64;
        }
        let mut birkhoff = 0.0;
        for k in 0..n {
            birkhoff += potential.value_at_prefix(&symbols[k..]);
        }
        total += birkhoff.exp() * u.value_at_prefix(&symbols);
    }
    Ok(total)
}
