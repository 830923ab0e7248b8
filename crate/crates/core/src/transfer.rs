//! Transfer operators for locally constant potentials.
//!
//! A potential of depth `m` acts on functions of depth `m-1` through a
//! `d^(m-1) x d^(m-1)` matrix whose rows are indexed by the prepended prefix
//! and whose columns are indexed by the current prefix. The dominant left
//! eigenpair of that matrix drives potential normalization and the
//! convergence diagnostics of the iterated operator.

use crate::error::{Error, Result};
use crate::oracle;
use crate::symbolic::{Alphabet, Word};

/// A real-valued function on the shift space depending on the first `depth`
/// symbols, stored as a dense table in lexicographic word order.
///
/// Used both for potentials (log scale: entry `A(w)`) and for plain test
/// function tables fed to [`transfer_iterate`].
#[derive(Debug, Clone, PartialEq)]
pub struct LocallyConstantPotential {
    alphabet: Alphabet,
    depth: usize,
    values: Vec<f64>,
}

impl LocallyConstantPotential {
    /// Build from a table with one finite entry per word of length `depth`,
    /// in lexicographic order.
    pub fn new(alphabet: Alphabet, depth: usize, values: Vec<f64>) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("potential depth must be at least 1".into()));
        }
        let expected = alphabet.word_count(depth);
        if values.len() != expected {
            return Err(Error::TableSizeMismatch {
                got: values.len(),
                expected,
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { index });
        }
        Ok(LocallyConstantPotential {
            alphabet,
            depth,
            values,
        })
    }

    /// Depth-2 potential from a `d x d` matrix of strictly positive weights
    /// `e^{A(ij)}` (row = first symbol, column = second).
    pub fn from_exp_matrix(alphabet: Alphabet, rows: &[Vec<f64>]) -> Result<Self> {
        let d = alphabet.size() as usize;
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(Error::TableSizeMismatch {
                got: rows.iter().map(|r| r.len()).sum(),
                expected: d * d,
            });
        }
        let mut values = Vec::with_capacity(d * d);
        for row in rows {
            for (j, &w) in row.iter().enumerate() {
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::NotPositive {
                        index: values.len() + j,
                        value: w,
                    });
                }
                values.push(w.ln());
            }
        }
        LocallyConstantPotential::new(alphabet, 2, values)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at a word of length `depth`.
    pub fn value_at(&self, word: &Word) -> f64 {
        debug_assert_eq!(word.len(), self.depth);
        self.values[self.alphabet.word_index(word)]
    }

    /// Value read off the leading symbols of any slice with at least `depth`
    /// entries.
    pub(crate) fn value_at_prefix(&self, symbols: &[u8]) -> f64 {
        let d = self.alphabet.size() as usize;
        let idx = symbols[..self.depth]
            .iter()
            .fold(0usize, |acc, &s| acc * d + (s as usize - 1));
        self.values[idx]
    }

    /// Replicate the table to a larger depth: the new table ignores the
    /// trailing symbols.
    pub fn pad_to_depth(&self, depth: usize) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::DimensionMismatch {
                context: "pad_to_depth",
                got: depth,
                expected: self.depth,
            });
        }
        if depth == self.depth {
            return Ok(self.clone());
        }
        let tail = self.alphabet.word_count(depth - self.depth);
        let mut values = Vec::with_capacity(self.values.len() * tail);
        for &v in &self.values {
            values.extend(std::iter::repeat_n(v, tail));
        }
        LocallyConstantPotential::new(self.alphabet, depth, values)
    }

    /// Maximum absolute deviation of the normalization sums
    /// `sum_i e^{A(i.w)}` from 1 over all words `w` of length `depth - 1`.
    pub fn normalization_deviation(&self) -> f64 {
        let d = self.alphabet.size() as usize;
        let cols = self.alphabet.word_count(self.depth - 1);
        let mut worst = 0.0f64;
        for c in 0..cols {
            let sum: f64 = (0..d).map(|i| self.values[i * cols + c].exp()).sum();
            worst = worst.max((sum - 1.0).abs());
        }
        worst
    }
}

/// Matrix representation of the transfer operator on depth-`(m-1)` word
/// space. Entry `(r, c)` is `e^{A(i.v)}` where `v` is the column word and
/// `r` indexes the prepended prefix `i.v[..m-2]`; structurally incompatible
/// pairs hold zero. For `m = 2` every pair is compatible and the matrix is
/// strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    alphabet: Alphabet,
    depth: usize,
    size: usize,
    /// Row-major entries.
    data: Vec<f64>,
}

impl TransferMatrix {
    /// Build from raw entries (row-major, size `d^(m-1)` square). Compatible
    /// entries must be strictly positive, incompatible ones exactly zero.
    pub fn new(alphabet: Alphabet, depth: usize, data: Vec<f64>) -> Result<Self> {
        if depth < 2 {
            return Err(Error::Config(
                "transfer matrices need potential depth >= 2".into(),
            ));
        }
        let size = alphabet.word_count(depth - 1);
        if data.len() != size * size {
            return Err(Error::TableSizeMismatch {
                got: data.len(),
                expected: size * size,
            });
        }
        let d = alphabet.size() as usize;
        let stride = size / d; // d^(m-2)
        for c in 0..size {
            for r in 0..size {
                let v = data[r * size + c];
                // Row word must be "i . first m-2 symbols of the column word".
                let is_compat = (0..d).any(|i| r == i * stride + c / d);
                if is_compat {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::NotPositive {
                            index: r * size + c,
                            value: v,
                        });
                    }
                } else if v != 0.0 {
                    return Err(Error::Config(format!(
                        "transfer matrix entry ({r},{c}) must be zero: row word is not a \
                         prepended prefix of the column word"
                    )));
                }
            }
        }
        Ok(TransferMatrix {
            alphabet,
            depth,
            size,
            data,
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Depth of the potential this matrix represents.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.size)
            .map(|r| self.data[r * self.size..(r + 1) * self.size].to_vec())
            .collect()
    }

    /// Left action `h -> h M`.
    fn left_apply(&self, h: &[f64], out: &mut [f64]) {
        for c in 0..self.size {
            let mut acc = 0.0;
            for r in 0..self.size {
                acc += h[r] * self.data[r * self.size + c];
            }
            out[c] = acc;
        }
    }

    /// Operator action on a depth-`(m-1)` table: `u -> M^T u`.
    pub(crate) fn operator_apply(&self, u: &[f64], out: &mut [f64]) {
        for c in 0..self.size {
            let mut acc = 0.0;
            for r in 0..self.size {
                acc += self.data[r * self.size + c] * u[r];
            }
            out[c] = acc;
        }
    }
}

/// Dominant eigenvalue and positive left eigenvector, `l2`-normalized.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: f64,
    pub left_vector: Vec<f64>,
}

/// Power-iteration controls.
#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Residual tolerance on `max|hM - lambda h| / max|h|`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tolerance: 1e-12,
            max_iterations: 100_000,
        }
    }
}

/// Matrix representation of the transfer operator of `potential`.
///
/// Depth-1 potentials are padded to depth 2 by replication first, so every
/// potential is served by one matrix form.
pub fn build_transfer_matrix(potential: &LocallyConstantPotential) -> Result<TransferMatrix> {
    let potential = if potential.depth() == 1 {
        potential.pad_to_depth(2)?
    } else {
        potential.clone()
    };
    let alphabet = potential.alphabet();
    let d = alphabet.size() as usize;
    let m = potential.depth();
    let size = alphabet.word_count(m - 1);
    let stride = size / d; // d^(m-2)
    let mut data = vec![0.0; size * size];
    for c in 0..size {
        for (i, _) in alphabet.symbols().enumerate() {
            // word index of i.v where v is the column word of length m-1
            let word = i * size + c;
            let row = i * stride + c / d;
            data[row * size + c] = potential.values()[word].exp();
        }
    }
    TransferMatrix::new(alphabet, m, data)
}

/// Dominant eigenpair by left power iteration with a Rayleigh-quotient
/// eigenvalue estimate.
pub fn dominant_eigenpair(matrix: &TransferMatrix) -> Result<Eigenpair> {
    dominant_eigenpair_with(matrix, EigenOptions::default())
}

pub fn dominant_eigenpair_with(matrix: &TransferMatrix, opts: EigenOptions) -> Result<Eigenpair> {
    let n = matrix.size();
    let mut h = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    let mut prev_residual = f64::INFINITY;
    let mut best: Option<(Vec<f64>, f64)> = None;
    // Once below tolerance, keep iterating while the residual still improves
    // (down to the floating-point floor); the best iterate seen is returned.
    for _ in 0..opts.max_iterations {
        matrix.left_apply(&h, &mut next);
        // Rayleigh quotient with ||h||_2 = 1.
        let lambda: f64 = next.iter().zip(&h).map(|(a, b)| a * b).sum();
        let residual = next
            .iter()
            .zip(&h)
            .map(|(a, b)| (a - lambda * b).abs())
            .fold(0.0f64, f64::max)
            / h.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        if best.as_ref().is_none_or(|(_, r)| residual < *r) {
            best = Some((h.clone(), residual));
        }
        if best.as_ref().is_some_and(|(_, r)| *r <= opts.tolerance) && residual >= prev_residual {
            break;
        }
        prev_residual = residual;
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (slot, v) in h.iter_mut().zip(&next) {
            *slot = v / norm;
        }
    }
    let (h, best_residual) = best.expect("at least one iteration");
    if best_residual > opts.tolerance {
        return Err(Error::EigenNoConvergence {
            iterations: opts.max_iterations,
            residual: best_residual,
        });
    }
    matrix.left_apply(&h, &mut next);
    let lambda = next.iter().zip(&h).map(|(a, b)| a * b).sum();
    debug_assert!(h.iter().all(|&v| v > 0.0));
    Ok(Eigenpair {
        lambda,
        left_vector: h,
    })
}

/// The normalized potential `A + log h - log h o T - log lambda`, which
/// satisfies `sum_i e^{A(i.w)} = 1` for every word `w` of length `m-1`.
pub fn normalize_potential(
    potential: &LocallyConstantPotential,
) -> Result<LocallyConstantPotential> {
    normalize_potential_with(potential, EigenOptions::default())
}

pub fn normalize_potential_with(
    potential: &LocallyConstantPotential,
    opts: EigenOptions,
) -> Result<LocallyConstantPotential> {
    let potential = if potential.depth() == 1 {
        potential.pad_to_depth(2)?
    } else {
        potential.clone()
    };
    let matrix = build_transfer_matrix(&potential)?;
    let eigen = dominant_eigenpair_with(&matrix, opts)?;
    let alphabet = potential.alphabet();
    let d = alphabet.size() as usize;
    let m = potential.depth();
    let cols = alphabet.word_count(m - 1);
    let log_lambda = eigen.lambda.ln();
    let log_h: Vec<f64> = eigen.left_vector.iter().map(|v| v.ln()).collect();
    let values: Vec<f64> = potential
        .values()
        .iter()
        .enumerate()
        .map(|(w, &a)| {
            let prefix = w / d; // first m-1 symbols
            let suffix = w % cols; // last m-1 symbols
            a + log_h[prefix] - log_h[suffix] - log_lambda
        })
        .collect();
    LocallyConstantPotential::new(alphabet, m, values)
}

/// Result of iterating the scaled transfer operator.
#[derive(Debug, Clone)]
pub struct TransferIterate {
    /// `L^n(u) / lambda^n` as a depth-`(m-1)` table.
    pub table: LocallyConstantPotential,
    /// The limit table `h . integral(u / h dGibbs)`, with the Gibbs weights
    /// taken from the exact stationary distribution of the normalized chain.
    pub target: LocallyConstantPotential,
    /// Sup-norm distance between `table` and `target`.
    pub sup_distance: f64,
    pub lambda: f64,
}

/// Iterate `u -> L(u)/lambda` `n` times and report the sup-norm distance to
/// the limit table.
///
/// `u` may have depth up to `m`; a depth-`m` table is contracted once
/// directly before the matrix steps take over. For cylinder indicators the
/// entry of the limit table at the cylinder's own word equals the Gibbs mass
/// of that cylinder, which is how the exact integrals of the oracle module
/// and this diagnostic meet.
pub fn transfer_iterate(
    potential: &LocallyConstantPotential,
    u: &LocallyConstantPotential,
    n: usize,
) -> Result<TransferIterate> {
    if n == 0 {
        return Err(Error::EmptyRun);
    }
    let potential = if potential.depth() == 1 {
        potential.pad_to_depth(2)?
    } else {
        potential.clone()
    };
    let alphabet = potential.alphabet();
    if u.alphabet() != alphabet {
        return Err(Error::Config("test table uses a different alphabet".into()));
    }
    let m = potential.depth();
    if u.depth() > m {
        return Err(Error::DimensionMismatch {
            context: "transfer_iterate test table depth",
            got: u.depth(),
            expected: m,
        });
    }

    let matrix = build_transfer_matrix(&potential)?;
    let eigen = dominant_eigenpair(&matrix)?;
    let size = matrix.size();
    let d = alphabet.size() as usize;

    // Bring u to depth m-1, spending one direct contraction if it is deeper.
    let mut steps_left = n;
    let mut table: Vec<f64> = if u.depth() == m {
        let mut out = vec![0.0; size];
        for (c, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..d {
                acc += potential.values()[i * size + c].exp() * u.values()[i * size + c];
            }
            *slot = acc / eigen.lambda;
        }
        steps_left -= 1;
        out
    } else {
        u.pad_to_depth(m - 1)?.values().to_vec()
    };

    let mut scratch = vec![0.0; size];
    for _ in 0..steps_left {
        matrix.operator_apply(&table, &mut scratch);
        for (slot, v) in table.iter_mut().zip(&scratch) {
            *slot = v / eigen.lambda;
        }
    }

    // Exact limit: h(v) * sum_w u(w) mu(w) / h(w-prefix), with mu from the
    // oracle's stationary solve of the normalized chain.
    let normalized = normalize_potential(&potential)?;
    let q = (m - 1).max(u.depth());
    let chain = oracle::classical_finite_chain(&normalized, q)?;
    let mu = oracle::stationary(&chain)?;
    let u_deep = u.pad_to_depth(q)?;
    let weight: f64 = u_deep
        .values()
        .iter()
        .enumerate()
        .map(|(w, &uv)| {
            let prefix = w / d.pow((q - (m - 1)) as u32);
            uv * mu.probabilities()[w] / eigen.left_vector[prefix]
        })
        .sum();
    let target: Vec<f64> = eigen.left_vector.iter().map(|&h| h * weight).collect();

    let sup_distance = table
        .iter()
        .zip(&target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);

    Ok(TransferIterate {
        table: LocallyConstantPotential::new(alphabet, m - 1, table)?,
        target: LocallyConstantPotential::new(alphabet, m - 1, target)?,
        sup_distance,
        lambda: eigen.lambda,
    })
}
