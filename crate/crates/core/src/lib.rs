//! # ergotrans
//!
//! A numerical toolkit for Gibbs measures and equilibrium transport plans on
//! Bernoulli shift spaces.
//!
//! Two pipelines are provided, both driven by the same sampling engine:
//!
//! 1. **Classical.** A locally constant potential is represented by a finite
//!    transfer matrix ([`transfer`]), normalized through its dominant left
//!    eigenpair, and sampled by a symbol-prepending Markov chain ([`elton`])
//!    whose Birkhoff averages converge to integrals against the Gibbs
//!    measure.
//! 2. **Transport.** A two-by-two cost pair with a fixed first marginal
//!    `mu = (p, 1-p)` is solved for its dual weights by intersecting two
//!    conics ([`transport`]), normalized by the Perron eigenvector of
//!    `B = z1 C1 + z2 C2`, and sampled by a chain on `X x Omega` whose
//!    averages converge to integrals against the equilibrium plan.
//!
//! Every estimate can be checked against exact ground truth: the [`oracle`]
//! module solves the induced finite Markov chains directly and evaluates
//! integrals of cylinder test functions in closed form.
//!
//! ```
//! use ergotrans::elton::{plan_chain, run_birkhoff};
//! use ergotrans::oracle;
//! use ergotrans::symbolic::{Alphabet, WindowState};
//! use ergotrans::testfn::TestFunction;
//! use ergotrans::transport::{build_plan_kernel, solve_dual, CostPair};
//!
//! let costs = CostPair::new([[3.0, 5.0], [2.0, 4.0]], [[2.0, 1.0], [4.0, 3.0]], 0.7)?;
//! let dual = solve_dual(&costs)?;
//! let kernel = build_plan_kernel(&costs, &dual.solution)?;
//!
//! // Sample the frequency of x = 1 and compare with the exact marginal.
//! let y0 = WindowState::ones(Alphabet::new(2)?, 1)?;
//! let chain = plan_chain(&kernel, 1, y0, 42, 100_000)?;
//! let estimate = run_birkhoff(&chain, &TestFunction::XIndicator(1))?;
//!
//! let stationary = oracle::stationary(&oracle::plan_finite_chain(&kernel, 2)?)?;
//! let exact = oracle::exact_integral(&stationary, &TestFunction::XIndicator(1))?;
//! assert!((estimate.mean - exact).abs() <= 3.0 * estimate.ci_halfwidth);
//! # Ok::<(), ergotrans::error::Error>(())
//! ```

#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod elton;
pub mod error;
pub mod oracle;
pub mod symbolic;
pub mod testfn;
pub mod transfer;
pub mod transport;

pub use error::{Error, ErrorClass, Result};
