//! Conic intersection by resultant elimination.
//!
//! The dual solve intersects two plane conics. Eliminating one variable by a
//! Sylvester resultant leaves a univariate polynomial of degree at most four;
//! its real roots are back-substituted and every candidate is polished by a
//! two-dimensional Newton iteration on the original pair of equations.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense univariate polynomial with coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly { coeffs: vec![c] }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(k, &c)| c * (k + 1) as f64)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let at = |p: &Poly, k: usize| p.coeffs.get(k).copied().unwrap_or(0.0);
        Poly::new((0..len).map(|k| at(self, k) - at(other, k)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |m, &c| m.max(c.abs()))
    }

    /// Drop leading coefficients that are negligible relative to the largest.
    pub fn trimmed(&self) -> Poly {
        let scale = self.max_abs_coeff();
        let mut coeffs = self.coeffs.clone();
        while coeffs.len() > 1 {
            let lead = coeffs[coeffs.len() - 1].abs();
            if lead > 1e-12 * scale && lead > 0.0 {
                break;
            }
            coeffs.pop();
        }
        Poly::new(coeffs)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}

/// All real roots of a polynomial of degree at most four.
///
/// Degrees up to two use closed forms; degrees three and four go through a
/// companion-matrix eigenvalue solve. Every root is polished by Newton steps
/// on the polynomial and kept only when its backward-relative residual is at
/// most `1e-10`.
pub(crate) fn real_roots(poly: &Poly) -> Result<Vec<f64>> {
    let p = poly.trimmed();
    let scale = p.max_abs_coeff();
    if scale == 0.0 {
        return Err(Error::RootFinding(
            "resultant vanishes identically: the conics share a component".into(),
        ));
    }
    let mut roots = match p.degree() {
        0 => Vec::new(),
        1 => vec![-p.coeffs[0] / p.coeffs[1]],
        2 => quadratic_roots(p.coeffs[2], p.coeffs[1], p.coeffs[0]),
        deg => {
            // Monic companion matrix of the normalized polynomial.
            let lead = p.coeffs[deg];
            let n = deg;
            let mut companion = DMatrix::<f64>::zeros(n, n);
            for r in 1..n {
                companion[(r, r - 1)] = 1.0;
            }
            for r in 0..n {
                companion[(r, n - 1)] = -p.coeffs[r] / lead;
            }
            companion
                .complex_eigenvalues()
                .iter()
                .filter(|e| e.im.abs() <= 1e-3 * (1.0 + e.re.abs()))
                .map(|e| e.re)
                .collect()
        }
    };

    // Newton polish against the polynomial itself, then a backward check.
    let dp = p.derivative();
    for root in roots.iter_mut() {
        for _ in 0..12 {
            let f = p.eval(*root);
            let df = dp.eval(*root);
            if df.abs() < 1e-300 {
                break;
            }
            let step = f / df;
            *root -= step;
            if step.abs() <= 1e-16 * (1.0 + root.abs()) {
                break;
            }
        }
    }
    roots.retain(|&r| {
        let magnitude: f64 = p
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| (c * r.powi(k as i32)).abs())
            .sum();
        p.eval(r).abs() <= 1e-10 * magnitude.max(scale)
    });
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + a.abs()));
    Ok(roots)
}

/// Roots of `a x^2 + b x + c` with a numerically stable split; a slightly
/// negative discriminant within rounding of zero collapses to a double root.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    let disc_scale = b * b + (4.0 * a * c).abs();
    if disc < 0.0 {
        if disc >= -1e-12 * disc_scale {
            return vec![-b / (2.0 * a)];
        }
        return Vec::new();
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        // b == 0 and c/a <= 0
        let r = (-c / a).sqrt();
        return vec![-r, r];
    }
    vec![q / a, c / q]
}

/// A quadratic-in-`z1` view of one conic: `a z1^2 + b(z2) z1 + c(z2)`.
#[derive(Debug, Clone)]
pub(crate) struct QuadraticInZ1 {
    pub a: f64,
    pub b: Poly,
    pub c: Poly,
}

impl QuadraticInZ1 {
    /// Real `z1` values solving this conic at a fixed `z2`.
    fn solve_at(&self, z2: f64) -> Vec<f64> {
        quadratic_roots(self.a, self.b.eval(z2), self.c.eval(z2))
    }
}

/// Resultant of the pair with respect to `z1`.
///
/// When both leading coefficients vanish the polynomials are linear in `z1`
/// and the resultant reduces to the 2x2 determinant; otherwise the closed
/// Bezout form of the degree-2 Sylvester determinant applies.
pub(crate) fn resultant_in_z2(g: &QuadraticInZ1, l: &QuadraticInZ1) -> Poly {
    let coeff_scale = [
        g.a.abs(),
        l.a.abs(),
        g.b.max_abs_coeff(),
        l.b.max_abs_coeff(),
        g.c.max_abs_coeff(),
        l.c.max_abs_coeff(),
        1.0,
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    if g.a.abs() <= 1e-13 * coeff_scale && l.a.abs() <= 1e-13 * coeff_scale {
        return g.b.mul(&l.c).sub(&l.b.mul(&g.c));
    }
    let a1 = Poly::constant(g.a);
    let a2 = Poly::constant(l.a);
    let ac = a1.mul(&l.c).sub(&a2.mul(&g.c));
    let ab = a1.mul(&l.b).sub(&a2.mul(&g.b));
    let bc = g.b.mul(&l.c).sub(&l.b.mul(&g.c));
    ac.mul(&ac).sub(&ab.mul(&bc))
}

/// Candidate intersection points of the two conics, Newton-polished on the
/// exact pair of equations. Points that fail to come close to both curves are
/// dropped; near-duplicates are merged.
pub(crate) fn intersection_candidates(
    g: &QuadraticInZ1,
    l: &QuadraticInZ1,
    eval: impl Fn(f64, f64) -> (f64, f64),
    jacobian: impl Fn(f64, f64) -> [[f64; 2]; 2],
) -> Result<Vec<(f64, f64)>> {
    let resultant = resultant_in_z2(g, l);
    let z2_roots = real_roots(&resultant)?;
    let mut seeds = Vec::new();
    for &z2 in &z2_roots {
        for z1 in g.solve_at(z2).into_iter().chain(l.solve_at(z2)) {
            seeds.push((z1, z2));
        }
    }

    let mut polished = Vec::new();
    'seed: for (mut z1, mut z2) in seeds {
        for _ in 0..60 {
            let (f1, f2) = eval(z1, z2);
            let j = jacobian(z1, z2);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !det.is_finite() || det.abs() < 1e-300 {
                break;
            }
            let d1 = (f1 * j[1][1] - f2 * j[0][1]) / det;
            let d2 = (f2 * j[0][0] - f1 * j[1][0]) / det;
            z1 -= d1;
            z2 -= d2;
            if !z1.is_finite() || !z2.is_finite() {
                continue 'seed;
            }
            if d1.abs() <= 1e-15 * (1.0 + z1.abs()) && d2.abs() <= 1e-15 * (1.0 + z2.abs()) {
                break;
            }
        }
        let (f1, f2) = eval(z1, z2);
        if f1.is_finite() && f2.is_finite() {
            polished.push((z1, z2, f1.abs().max(f2.abs())));
        }
    }

    // Merge duplicates, keeping the best-polished representative.
    polished.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
    let mut unique: Vec<(f64, f64)> = Vec::new();
    for (z1, z2, _) in polished {
        let dup = unique.iter().any(|&(u1, u2)| {
            (z1 - u1).abs() <= 1e-8 * (1.0 + z1.abs()) && (z2 - u2).abs() <= 1e-8 * (1.0 + z2.abs())
        });
        if !dup {
            unique.push((z1, z2));
        }
    }
    Ok(unique)
}
