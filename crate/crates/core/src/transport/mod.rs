//! Entropic transport duals on the binary shift with two-point `X`.
//!
//! The pipeline runs in three steps. Step 1 finds the dual weights
//! `(z1, z2) = (e^{-phi1}, e^{-phi2})` as an admissible intersection of the
//! pressure-zero conic `g = 0` with the Lagrange-multiplier conic. Step 2
//! forms `B = z1 C1 + z2 C2`, whose left Perron eigenvector at eigenvalue 1
//! normalizes the cost. Step 3 packages the normalized matrices `Cbar` as the
//! transition kernel of the plan sampler.

mod conic;

use crate::error::{Error, Result};
use crate::symbolic::Alphabet;
use crate::transfer::{dominant_eigenpair, TransferMatrix};

use conic::{intersection_candidates, Poly, QuadraticInZ1};

const POSITIVITY_TOL: f64 = 1e-12;
const TIE_TOL: f64 = 1e-12;
const STOCHASTIC_TOL: f64 = 1e-10;
const PERRON_UNIT_TOL: f64 = 1e-8;
const KERNEL_SUM_TOL: f64 = 1e-9;

/// Admissibility tolerances of the dual solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Largest accepted residual on either conic after Newton polish.
    pub conic_residual_tol: f64,
    /// Margin below 1 required of the subdominant eigenvalue; candidates
    /// within the band `1 +- margin` are rejected as ambiguous.
    pub spectral_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            conic_residual_tol: 1e-9,
            spectral_tol: 1e-9,
        }
    }
}

type Matrix2 = [[f64; 2]; 2];

fn det2(m: &Matrix2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn tr2(m: &Matrix2) -> f64 {
    m[0][0] + m[1][1]
}

/// The two positive weight matrices `C^x_{ij} = e^{c(x,i,j)}` of a cost on
/// `{1,2} x Omega` depending on the first two coordinates of `Omega`, plus
/// the fixed first marginal `mu = (p, 1-p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostPair {
    c1: Matrix2,
    c2: Matrix2,
    p: f64,
}

impl CostPair {
    /// From exponential-scale entries (all strictly positive) and `0 < p < 1`.
    pub fn new(c1: Matrix2, c2: Matrix2, p: f64) -> Result<Self> {
        for (index, &v) in c1.iter().flatten().chain(c2.iter().flatten()).enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NotPositive { index, value: v });
            }
        }
        if !(p.is_finite() && p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange { value: p });
        }
        Ok(CostPair { c1, c2, p })
    }

    /// From log-scale entries `c(x,i,j)`.
    pub fn from_log(c1: Matrix2, c2: Matrix2, p: f64) -> Result<Self> {
        let exp = |m: &Matrix2| {
            [
                [m[0][0].exp(), m[0][1].exp()],
                [m[1][0].exp(), m[1][1].exp()],
            ]
        };
        CostPair::new(exp(&c1), exp(&c2), p)
    }

    /// Weight matrix for `x` (0-based).
    pub fn weights(&self, x: usize) -> &Matrix2 {
        match x {
            0 => &self.c1,
            1 => &self.c2,
            _ => panic!("x component out of range"),
        }
    }

    /// Log cost `c(x,i,j)` with 0-based indices.
    pub fn log_cost(&self, x: usize, i: usize, j: usize) -> f64 {
        self.weights(x)[i][j].ln()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Largest deviation of the columns of `C1` and `C2` from summing to 1.
    pub fn stochastic_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in [&self.c1, &self.c2] {
            for j in 0..2 {
                worst = worst.max((m[0][j] + m[1][j] - 1.0).abs());
            }
        }
        worst
    }

    /// `B(z) = z1 C1 + z2 C2`.
    pub fn combine(&self, z1: f64, z2: f64) -> Matrix2 {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = z1 * self.c1[i][j] + z2 * self.c2[i][j];
            }
        }
        out
    }
}

/// Coefficients of the pressure-zero conic
/// `g(z1,z2) = qa z1^2 + qb z2^2 + qc z1 z2 + qd z1 + qe z2 + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConicCoefficients {
    pub qa: f64,
    pub qb: f64,
    pub qc: f64,
    pub qd: f64,
    pub qe: f64,
}

impl ConicCoefficients {
    pub fn g(&self, z1: f64, z2: f64) -> f64 {
        self.qa * z1 * z1
            + self.qb * z2 * z2
            + self.qc * z1 * z2
            + self.qd * z1
            + self.qe * z2
            + 1.0
    }

    /// The Lagrange-multiplier conic paired with `g` for marginal weight `p`.
    pub fn lagrange(&self, p: f64, z1: f64, z2: f64) -> f64 {
        2.0 * self.qb * p * z2 * z2 - 2.0 * self.qa * (1.0 - p) * z1 * z1
            + self.qc * (2.0 * p - 1.0) * z1 * z2
            + self.qe * p * z2
            - self.qd * (1.0 - p) * z1
    }

    fn gradient_g(&self, z1: f64, z2: f64) -> [f64; 2] {
        [
            2.0 * self.qa * z1 + self.qc * z2 + self.qd,
            2.0 * self.qb * z2 + self.qc * z1 + self.qe,
        ]
    }

    fn gradient_lagrange(&self, p: f64, z1: f64, z2: f64) -> [f64; 2] {
        [
            -4.0 * self.qa * (1.0 - p) * z1 + self.qc * (2.0 * p - 1.0) * z2 - self.qd * (1.0 - p),
            4.0 * self.qb * p * z2 + self.qc * (2.0 * p - 1.0) * z1 + self.qe * p,
        ]
    }
}

/// Conic coefficients of a cost pair: determinants and traces of the weight
/// matrices and of their row-crossed combinations.
pub fn conic_coefficients(costs: &CostPair) -> ConicCoefficients {
    let c1 = costs.weights(0);
    let c2 = costs.weights(1);
    let c12 = [[c1[0][0], c1[0][1]], [c2[1][0], c2[1][1]]];
    let c21 = [[c2[0][0], c2[0][1]], [c1[1][0], c1[1][1]]];
    ConicCoefficients {
        qa: det2(c1),
        qb: det2(c2),
        qc: det2(&c12) + det2(&c21),
        qd: -tr2(c1),
        qe: -tr2(c2),
    }
}

/// Recover the marginal weight `p` for which `(z1, z2)` satisfies the
/// Lagrange conic; the equation is linear in `p`. Returns `None` when the
/// coefficient of `p` is too small to divide by.
pub fn recover_marginal_weight(coeffs: &ConicCoefficients, z1: f64, z2: f64) -> Option<f64> {
    let fixed = 2.0 * coeffs.qa * z1 * z1 + coeffs.qc * z1 * z2 + coeffs.qd * z1;
    let linear = fixed + 2.0 * coeffs.qb * z2 * z2 + coeffs.qc * z1 * z2 + coeffs.qe * z2;
    if linear.abs() <= 1e-12 * (1.0 + fixed.abs()) {
        return None;
    }
    Some(fixed / linear)
}

/// Why a conic intersection point was kept or rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateStatus {
    Admissible,
    /// Fails `z1 > 0, z2 > 0`.
    NotPositive,
    /// Residual on either conic exceeds tolerance after polish.
    ResidualTooLarge,
    /// Subdominant eigenvalue of `B(z)` is not below 1.
    SpectralViolation,
    /// Subdominant eigenvalue indistinguishable from 1; rejected as
    /// numerically ambiguous.
    SpectralAmbiguous,
}

/// One polished intersection point with its diagnostics.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub z1: f64,
    pub z2: f64,
    pub conic_residual: f64,
    pub lagrange_residual: f64,
    /// Eigenvalue of `B(z)` other than the one closest to 1; only computed
    /// for positive candidates.
    pub subdominant: Option<f64>,
    /// `-p log z1 - (1-p) log z2`; only defined for positive candidates.
    pub objective: Option<f64>,
    pub status: CandidateStatus,
}

impl Candidate {
    fn render(&self) -> String {
        format!(
            "z=({:.9}, {:.9}) |g|={:.2e} |lagrange|={:.2e} subdominant={} objective={} -> {:?}",
            self.z1,
            self.z2,
            self.conic_residual,
            self.lagrange_residual,
            self.subdominant
                .map_or("n/a".to_string(), |v| format!("{v:.9}")),
            self.objective
                .map_or("n/a".to_string(), |v| format!("{v:.9}")),
            self.status
        )
    }
}

pub fn render_candidates(candidates: &[Candidate]) -> String {
    candidates
        .iter()
        .map(Candidate::render)
        .collect::<Vec<_>>()
        .join("\n")
}

/// The minimizer of the dual problem: `z_x = e^{-phi_x}` with diagnostics.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub z1: f64,
    pub z2: f64,
    pub phi1: f64,
    pub phi2: f64,
    /// `p phi1 + (1-p) phi2`.
    pub objective: f64,
    pub conic_residual: f64,
    pub lagrange_residual: f64,
    pub subdominant: f64,
}

/// A dual solve outcome: the minimizer plus every intersection candidate
/// with the reason it was kept or dropped.
#[derive(Debug, Clone)]
pub struct DualOutcome {
    pub solution: DualSolution,
    pub candidates: Vec<Candidate>,
}

fn classify(
    costs: &CostPair,
    coeffs: &ConicCoefficients,
    opts: &SolveOptions,
    z1: f64,
    z2: f64,
) -> Candidate {
    let p = costs.p();
    let conic_residual = coeffs.g(z1, z2).abs();
    let lagrange_residual = coeffs.lagrange(p, z1, z2).abs();
    if !(z1 > POSITIVITY_TOL && z2 > POSITIVITY_TOL) {
        return Candidate {
            z1,
            z2,
            conic_residual,
            lagrange_residual,
            subdominant: None,
            objective: None,
            status: CandidateStatus::NotPositive,
        };
    }
    let objective = Some(-p * z1.ln() - (1.0 - p) * z2.ln());
    let b = costs.combine(z1, z2);
    // Both eigenvalues of the positive 2x2 matrix are real; the one closest
    // to 1 plays the Perron role on the conic, the other must stay below 1.
    let half_tr = 0.5 * tr2(&b);
    let disc = (half_tr * half_tr - det2(&b)).max(0.0).sqrt();
    let (e1, e2) = (half_tr + disc, half_tr - disc);
    let subdominant = if (e1 - 1.0).abs() <= (e2 - 1.0).abs() {
        e2
    } else {
        e1
    };
    let status = if conic_residual > opts.conic_residual_tol
        || lagrange_residual > opts.conic_residual_tol
    {
        CandidateStatus::ResidualTooLarge
    } else if (subdominant - 1.0).abs() <= opts.spectral_tol {
        CandidateStatus::SpectralAmbiguous
    } else if subdominant >= 1.0 {
        CandidateStatus::SpectralViolation
    } else {
        CandidateStatus::Admissible
    };
    Candidate {
        z1,
        z2,
        conic_residual,
        lagrange_residual,
        subdominant: Some(subdominant),
        objective,
        status,
    }
}

/// Solve the dual minimization for a cost pair.
///
/// All real intersections of the two conics are found by resultant
/// elimination (degree at most four), Newton-polished, and filtered by
/// positivity, residual, and the subdominant-eigenvalue condition; among the
/// admissible points the one minimizing `-p log z1 - (1-p) log z2` is
/// returned. No admissible point is an infeasibility error carrying the full
/// candidate table; two admissible points with objectives tied within
/// `1e-12` are reported as a numerical ambiguity since the minimizer is
/// unique.
pub fn solve_dual(costs: &CostPair) -> Result<DualOutcome> {
    solve_dual_with(costs, SolveOptions::default())
}

pub fn solve_dual_with(costs: &CostPair, opts: SolveOptions) -> Result<DualOutcome> {
    let coeffs = conic_coefficients(costs);
    let p = costs.p();

    let g = QuadraticInZ1 {
        a: coeffs.qa,
        b: Poly::new(vec![coeffs.qd, coeffs.qc]),
        c: Poly::new(vec![1.0, coeffs.qe, coeffs.qb]),
    };
    let lagrange = QuadraticInZ1 {
        a: -2.0 * coeffs.qa * (1.0 - p),
        b: Poly::new(vec![-coeffs.qd * (1.0 - p), coeffs.qc * (2.0 * p - 1.0)]),
        c: Poly::new(vec![0.0, coeffs.qe * p, 2.0 * coeffs.qb * p]),
    };
    let points = intersection_candidates(
        &g,
        &lagrange,
        |z1, z2| (coeffs.g(z1, z2), coeffs.lagrange(p, z1, z2)),
        |z1, z2| {
            let gg = coeffs.gradient_g(z1, z2);
            let gl = coeffs.gradient_lagrange(p, z1, z2);
            [gg, gl]
        },
    )?;

    let candidates: Vec<Candidate> = points
        .into_iter()
        .map(|(z1, z2)| classify(costs, &coeffs, &opts, z1, z2))
        .collect();

    let mut admissible: Vec<&Candidate> = candidates
        .iter()
        .filter(|c| c.status == CandidateStatus::Admissible)
        .collect();
    if admissible.is_empty() {
        return Err(Error::Infeasible {
            report: render_candidates(&candidates),
        });
    }
    admissible.sort_by(|a, b| a.objective.partial_cmp(&b.objective).unwrap());
    if admissible.len() >= 2 {
        let gap = admissible[1].objective.unwrap() - admissible[0].objective.unwrap();
        if gap <= TIE_TOL {
            return Err(Error::AmbiguousMinimizer {
                tie_tol: TIE_TOL,
                report: render_candidates(&candidates),
            });
        }
    }
    let best = admissible[0];
    let solution = DualSolution {
        z1: best.z1,
        z2: best.z2,
        phi1: -best.z1.ln(),
        phi2: -best.z2.ln(),
        objective: best.objective.unwrap(),
        conic_residual: best.conic_residual,
        lagrange_residual: best.lagrange_residual,
        subdominant: best.subdominant.unwrap(),
    };
    Ok(DualOutcome {
        solution,
        candidates,
    })
}

/// Closed-form dual for column-stochastic weight matrices: `z = (p, 1-p)`.
pub fn solve_dual_stochastic_fast_path(costs: &CostPair) -> Result<DualSolution> {
    let deviation = costs.stochastic_deviation();
    if deviation > STOCHASTIC_TOL {
        return Err(Error::NotStochastic {
            max_deviation: deviation,
        });
    }
    let p = costs.p();
    let coeffs = conic_coefficients(costs);
    let candidate = classify(costs, &coeffs, &SolveOptions::default(), p, 1.0 - p);
    Ok(DualSolution {
        z1: p,
        z2: 1.0 - p,
        phi1: -p.ln(),
        phi2: -(1.0 - p).ln(),
        objective: -p * p.ln() - (1.0 - p) * (1.0 - p).ln(),
        conic_residual: candidate.conic_residual,
        lagrange_residual: candidate.lagrange_residual,
        subdominant: candidate.subdominant.unwrap_or(f64::NAN),
    })
}

/// The normalized transition matrices of the plan sampler.
#[derive(Debug, Clone)]
pub struct PlanKernel {
    cbar1: Matrix2,
    cbar2: Matrix2,
    b: Matrix2,
    h: [f64; 2],
    origin: DualSolution,
}

impl PlanKernel {
    /// Normalized matrix for `x` (0-based): entries `Cbar^x_{ij}`.
    pub fn cbar(&self, x: usize) -> &Matrix2 {
        match x {
            0 => &self.cbar1,
            1 => &self.cbar2,
            _ => panic!("x component out of range"),
        }
    }

    /// `B = z1 C1 + z2 C2`.
    pub fn b_matrix(&self) -> &Matrix2 {
        &self.b
    }

    /// Left Perron eigenvector of `B` at eigenvalue 1, `l2`-normalized.
    pub fn h(&self) -> &[f64; 2] {
        &self.h
    }

    pub fn origin(&self) -> &DualSolution {
        &self.origin
    }

    /// Largest deviation of the stacked column sums
    /// `sum_{x,i} Cbar^x_{ij}` from 1.
    pub fn normalization_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..2 {
            let sum: f64 = (0..2).map(|i| self.cbar1[i][j] + self.cbar2[i][j]).sum();
            worst = worst.max((sum - 1.0).abs());
        }
        worst
    }
}

/// Step 2 and 3: normalize the cost by the left Perron eigenvector of
/// `B = z1 C1 + z2 C2` and package the plan kernel
/// `Cbar^x_{ij} = z_x C^x_{ij} h(i) / h(j)`.
pub fn build_plan_kernel(costs: &CostPair, solution: &DualSolution) -> Result<PlanKernel> {
    let b = costs.combine(solution.z1, solution.z2);
    let alphabet = Alphabet::new(2).expect("binary alphabet");
    let matrix = TransferMatrix::new(alphabet, 2, vec![b[0][0], b[0][1], b[1][0], b[1][1]])?;
    let eigen = dominant_eigenpair(&matrix)?;
    let deviation = (eigen.lambda - 1.0).abs();
    if deviation > PERRON_UNIT_TOL {
        return Err(Error::PerronNotUnit {
            lambda: eigen.lambda,
            deviation,
        });
    }
    let h = [eigen.left_vector[0], eigen.left_vector[1]];
    let z = [solution.z1, solution.z2];
    let mut cbar = [[[0.0f64; 2]; 2]; 2];
    for x in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                cbar[x][i][j] = z[x] * costs.weights(x)[i][j] * h[i] / h[j];
            }
        }
    }
    let kernel = PlanKernel {
        cbar1: cbar[0],
        cbar2: cbar[1],
        b,
        h,
        origin: solution.clone(),
    };
    let deviation = kernel.normalization_deviation();
    if deviation > KERNEL_SUM_TOL {
        return Err(Error::KernelNotNormalized {
            max_deviation: deviation,
        });
    }
    Ok(kernel)
}

/// Plan pressure `integral(c) + H(pi)` evaluated against the exact
/// stationary distribution over `(x, y1, y2)` states.
///
/// For the Markov plans built here the entropy integrand is the log of the
/// normalized kernel entry, so the pressure reduces to
/// `sum rho(x,i,j) [log C^x_{ij} - log Cbar^x_{ij}]`. By duality this equals
/// `p phi1 + (1-p) phi2`.
pub fn plan_pressure(
    costs: &CostPair,
    kernel: &PlanKernel,
    stationary: &crate::oracle::StationaryDistribution,
) -> Result<f64> {
    let total: f64 = stationary.probabilities().iter().sum();
    if (total - 1.0).abs() > 1e-9 || stationary.probabilities().iter().any(|&v| v < 0.0) {
        return Err(Error::NotAProbability {
            reason: format!("stationary vector sums to {total}"),
        });
    }
    let mut pressure = 0.0;
    for (state, &weight) in stationary.states().iter().zip(stationary.probabilities()) {
        let x = state
            .x()
            .ok_or_else(|| Error::Config("plan pressure needs states with an x component".into()))?
            as usize
            - 1;
        let symbols = state.word().symbols();
        if symbols.len() < 2 {
            return Err(Error::WindowTooShort {
                window_len: symbols.len(),
                required: 2,
            });
        }
        let (i, j) = (symbols[0] as usize - 1, symbols[1] as usize - 1);
        pressure += weight * (costs.log_cost(x, i, j) - kernel.cbar(x)[i][j].ln());
    }
    Ok(pressure)
}
