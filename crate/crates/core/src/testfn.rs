//! Test functions integrated against sampled chains and exact stationary
//! distributions: cylinder indicators, `X`-component indicators, and the
//! constant one.

use std::fmt;

use crate::error::{Error, Result};
use crate::symbolic::{Alphabet, Word};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TestFunction {
    /// The constant function 1.
    One,
    /// Indicator of the cylinder set of words starting with the given word.
    Cylinder(Word),
    /// Indicator of the `X`-component equalling the given symbol. Only valid
    /// on plan chains.
    XIndicator(u8),
}

impl TestFunction {
    /// Parse the textual forms `one`, `cyl:<word>`, `x:<symbol>`.
    pub fn parse(text: &str, alphabet: Alphabet) -> Result<Self> {
        if text == "one" {
            return Ok(TestFunction::One);
        }
        if let Some(word) = text.strip_prefix("cyl:") {
            return Ok(TestFunction::Cylinder(Word::parse(word, alphabet)?));
        }
        if let Some(x) = text.strip_prefix("x:") {
            let x: u8 = x
                .parse()
                .map_err(|_| Error::Config(format!("invalid x-indicator spec {text:?}")))?;
            if !alphabet.contains(x) {
                return Err(Error::SymbolOutOfRange {
                    symbol: x,
                    alphabet_size: alphabet.size(),
                });
            }
            return Ok(TestFunction::XIndicator(x));
        }
        Err(Error::Config(format!(
            "unknown test function {text:?}; expected \"one\", \"cyl:<word>\" or \"x:<symbol>\""
        )))
    }

    /// Stable identifier used in CSV output.
    pub fn id(&self) -> String {
        match self {
            TestFunction::One => "one".into(),
            TestFunction::Cylinder(w) => format!("cyl:{w}"),
            TestFunction::XIndicator(x) => format!("x:{x}"),
        }
    }

    /// Word depth required of a state to evaluate this function.
    pub fn depth(&self) -> usize {
        match self {
            TestFunction::One => 0,
            TestFunction::Cylinder(w) => w.len(),
            TestFunction::XIndicator(_) => 0,
        }
    }

    /// Whether evaluation needs an `X`-component.
    pub fn needs_x(&self) -> bool {
        matches!(self, TestFunction::XIndicator(_))
    }

    /// Evaluate at a state given by its leading symbols and optional
    /// `X`-component. Depth and `X` availability must have been checked.
    pub fn eval_symbols(&self, x: Option<u8>, symbols: &[u8]) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Cylinder(w) => {
                if symbols[..w.len()] == *w.symbols() {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::XIndicator(v) => {
                if x == Some(*v) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}
