//! Seeded Elton chains and Birkhoff-average estimators.
//!
//! A chain prepends one symbol per step, chosen by inverse-CDF over an
//! ordered branch list with state-dependent weights: the classical sampler
//! weights branch `i` by `e^{A(i.z)}` for a normalized potential `A`, the
//! transport sampler weights branch `(x, i)` by the normalized kernel entry
//! `Cbar^x[i][y1]`. Birkhoff averages of test functions along a trajectory
//! estimate integrals against the invariant measure; batch means over
//! `ceil(sqrt(N))` batches give a 95% confidence halfwidth that respects the
//! serial correlation of the chain.
//!
//! Streams are generated by `ChaCha8` seeded from the 64-bit chain seed, one
//! uniform draw per step, so trajectories are reproducible bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::symbolic::{Alphabet, WindowState};
use crate::testfn::TestFunction;
use crate::transfer::LocallyConstantPotential;
use crate::transport::PlanKernel;

const NORMALIZATION_TOL: f64 = 1e-10;
const CI_Z: f64 = 1.959963984540054; // two-sided 95% normal quantile

#[derive(Debug, Clone)]
enum ChainKind {
    Classical {
        /// `e^{A(w)}` over depth-`m` words in lexicographic order.
        weights: Vec<f64>,
        depth: usize,
    },
    Plan {
        /// `cbar[x][i][j]`, 0-based.
        cbar: [[[f64; 2]; 2]; 2],
    },
}

/// A fully specified chain: branch weights, initial state, seed, and step
/// counts. Running a chain never mutates this value, so replicas can be
/// launched from the same instance.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    kind: ChainKind,
    alphabet: Alphabet,
    init_x: Option<u8>,
    init_window: WindowState,
    seed: u64,
    steps: u64,
    burn_in: u64,
}

impl ChainSpec {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in
    }

    pub fn window_len(&self) -> usize {
        self.init_window.len()
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Whether states carry an `X`-component.
    pub fn has_x(&self) -> bool {
        self.init_x.is_some()
    }

    /// Replace the number of discarded warm-up steps (default 0).
    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    /// Replace the seed, keeping everything else.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// The classical Gibbs sampler of a normalized potential: from state `z`,
/// prepend symbol `i` with probability `e^{A(i.z)}`.
pub fn classical_chain(
    potential: &LocallyConstantPotential,
    z0: WindowState,
    seed: u64,
    steps: u64,
) -> Result<ChainSpec> {
    let deviation = potential.normalization_deviation();
    if deviation > NORMALIZATION_TOL {
        return Err(Error::NotNormalized {
            max_deviation: deviation,
        });
    }
    if z0.alphabet() != potential.alphabet() {
        return Err(Error::Config(
            "initial state uses a different alphabet than the potential".into(),
        ));
    }
    let m = potential.depth();
    if z0.len() + 1 < m {
        return Err(Error::WindowTooShort {
            window_len: z0.len(),
            required: m - 1,
        });
    }
    if steps == 0 {
        return Err(Error::EmptyRun);
    }
    Ok(ChainSpec {
        kind: ChainKind::Classical {
            weights: potential.values().iter().map(|v| v.exp()).collect(),
            depth: m,
        },
        alphabet: potential.alphabet(),
        init_x: None,
        init_window: z0,
        seed,
        steps,
        burn_in: 0,
    })
}

/// The transport plan sampler of a normalized kernel: from `(x, y)`, jump to
/// `(alpha, i.y)` with probability `Cbar^alpha[i][y1]`. The previous
/// `X`-component never enters the weights.
pub fn plan_chain(
    kernel: &PlanKernel,
    x0: u8,
    y0: WindowState,
    seed: u64,
    steps: u64,
) -> Result<ChainSpec> {
    let deviation = kernel.normalization_deviation();
    if deviation > NORMALIZATION_TOL {
        return Err(Error::KernelNotNormalized {
            max_deviation: deviation,
        });
    }
    let alphabet = Alphabet::new(2).expect("binary alphabet");
    if y0.alphabet() != alphabet {
        return Err(Error::Config(
            "plan chains run on the binary alphabet".into(),
        ));
    }
    if !(1..=2).contains(&x0) {
        return Err(Error::SymbolOutOfRange {
            symbol: x0,
            alphabet_size: 2,
        });
    }
    if steps == 0 {
        return Err(Error::EmptyRun);
    }
    Ok(ChainSpec {
        kind: ChainKind::Plan {
            cbar: [*kernel.cbar(0), *kernel.cbar(1)],
        },
        alphabet,
        init_x: Some(x0),
        init_window: y0,
        seed,
        steps,
        burn_in: 0,
    })
}

/// A Birkhoff-average estimate with a batch-means confidence interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub count: u64,
    /// Sample variance of the batch means.
    pub batch_variance: f64,
    /// 95% halfwidth `z * sqrt(batch_variance / batches)`.
    pub ci_halfwidth: f64,
    pub batches: u64,
    batch_mean_sum: f64,
    batch_mean_sq_sum: f64,
}

impl Estimate {
    fn from_sums(total: f64, count: u64, batch_means: impl Iterator<Item = f64>) -> Estimate {
        let mut batches = 0u64;
        let mut sum = 0.0;
        let mut sq_sum = 0.0;
        for m in batch_means {
            batches += 1;
            sum += m;
            sq_sum += m * m;
        }
        Estimate::assemble(total / count as f64, count, batches, sum, sq_sum)
    }

    fn assemble(mean: f64, count: u64, batches: u64, sum: f64, sq_sum: f64) -> Estimate {
        let batch_variance = if batches >= 2 {
            let b = batches as f64;
            ((sq_sum - sum * sum / b) / (b - 1.0)).max(0.0)
        } else {
            0.0
        };
        let ci_halfwidth = if batches >= 2 {
            CI_Z * (batch_variance / batches as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean,
            count,
            batch_variance,
            ci_halfwidth,
            batches,
            batch_mean_sum: sum,
            batch_mean_sq_sum: sq_sum,
        }
    }

    /// Pool two estimates as if their batches came from one run. Exact when
    /// both runs used equal batch lengths (replicas of the same step count).
    pub fn merge(&self, other: &Estimate) -> Estimate {
        let count = self.count + other.count;
        let mean = (self.mean * self.count as f64 + other.mean * other.count as f64) / count as f64;
        Estimate::assemble(
            mean,
            count,
            self.batches + other.batches,
            self.batch_mean_sum + other.batch_mean_sum,
            self.batch_mean_sq_sum + other.batch_mean_sq_sum,
        )
    }
}

/// Birkhoff average of one test function along the chain's trajectory.
pub fn run_birkhoff(chain: &ChainSpec, f: &TestFunction) -> Result<Estimate> {
    run_birkhoff_many(chain, std::slice::from_ref(f)).map(|mut v| v.pop().expect("one estimate"))
}

/// Birkhoff averages of several test functions along one shared trajectory.
///
/// The random stream depends only on the chain spec, never on the test
/// functions, so each returned estimate is identical to a standalone
/// [`run_birkhoff`] call with the same spec.
pub fn run_birkhoff_many(chain: &ChainSpec, fs: &[TestFunction]) -> Result<Vec<Estimate>> {
    for f in fs {
        if f.depth() > chain.window_len() {
            return Err(Error::WordTooLong {
                word_len: f.depth(),
                window_len: chain.window_len(),
            });
        }
        if f.needs_x() && !chain.has_x() {
            return Err(Error::Config(
                "x-indicator evaluated on a chain without an x component".into(),
            ));
        }
    }
    if chain.steps == 0 {
        return Err(Error::EmptyRun);
    }

    let n = chain.steps;
    let batches = (n as f64).sqrt().ceil() as u64;
    let batch_len = (n / batches).max(1);
    let batched = batches * batch_len; // samples entering the CI

    let mut totals = vec![0.0f64; fs.len()];
    let mut batch_acc = vec![0.0f64; fs.len()];
    let mut batch_means: Vec<Vec<f64>> = vec![Vec::with_capacity(batches as usize); fs.len()];

    let mut rng = ChaCha8Rng::seed_from_u64(chain.seed);
    let mut window = chain.init_window.clone();
    let mut x = chain.init_x;
    let total_steps = chain.burn_in + n;
    for k in 0..total_steps {
        if k >= chain.burn_in {
            let sample_idx = k - chain.burn_in;
            for (slot, f) in fs.iter().enumerate() {
                let value = f.eval_symbols(x, window.symbols());
                totals[slot] += value;
                if sample_idx < batched {
                    batch_acc[slot] += value;
                }
            }
            if sample_idx < batched && (sample_idx + 1).is_multiple_of(batch_len) {
                for (slot, acc) in batch_acc.iter_mut().enumerate() {
                    batch_means[slot].push(*acc / batch_len as f64);
                    *acc = 0.0;
                }
            }
        }
        step(&chain.kind, &mut rng, &mut x, &mut window);
    }

    Ok(totals
        .into_iter()
        .zip(batch_means)
        .map(|(total, means)| Estimate::from_sums(total, n, means.into_iter()))
        .collect())
}

/// One transition: draw a uniform variate and walk the ordered branch list.
fn step(kind: &ChainKind, rng: &mut ChaCha8Rng, x: &mut Option<u8>, window: &mut WindowState) {
    let u: f64 = rng.random();
    match kind {
        ChainKind::Classical { weights, depth } => {
            let d = window.alphabet().size() as usize;
            let cols = weights.len() / d;
            // index of the first depth-1 window symbols
            let mut prefix = 0usize;
            for &s in &window.symbols()[..depth - 1] {
                prefix = prefix * d + (s as usize - 1);
            }
            #[cfg(debug_assertions)]
            {
                let total: f64 = (0..d).map(|i| weights[i * cols + prefix]).sum();
                debug_assert!(
                    (total - 1.0).abs() <= NORMALIZATION_TOL,
                    "branch weights sum to {total}"
                );
            }
            let mut acc = 0.0;
            let mut chosen = d - 1;
            for i in 0..d {
                acc += weights[i * cols + prefix];
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            window.prepend_in_place(chosen as u8 + 1);
        }
        ChainKind::Plan { cbar } => {
            let j = window.first_symbol() as usize - 1;
            #[cfg(debug_assertions)]
            {
                let total: f64 = cbar.iter().flat_map(|m| m.iter().map(|row| row[j])).sum();
                debug_assert!(
                    (total - 1.0).abs() <= NORMALIZATION_TOL,
                    "branch weights sum to {total}"
                );
            }
            let mut acc = 0.0;
            let mut chosen = (1u8, 1u8);
            'outer: for alpha in 0..2usize {
                for i in 0..2usize {
                    acc += cbar[alpha][i][j];
                    if u < acc {
                        chosen = (alpha as u8 + 1, i as u8 + 1);
                        break 'outer;
                    }
                    chosen = (alpha as u8 + 1, i as u8 + 1);
                }
            }
            *x = Some(chosen.0);
            window.prepend_in_place(chosen.1);
        }
    }
}
