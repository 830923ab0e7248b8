//! Finite-alphabet words, cylinder sets, and sliding-window states.
//!
//! Points of the one-sided shift space on `d` symbols are represented by
//! fixed-length windows holding their most recent symbols. This is exact as
//! long as every potential and test function evaluated on the point is
//! locally constant with depth at most the window length.

use std::fmt;

use crate::error::{Error, Result};

/// The symbol set `{1, ..., d}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Alphabet {
    size: u8,
}

impl Alphabet {
    /// A `d`-symbol alphabet. Requires `d >= 2`.
    pub fn new(size: u8) -> Result<Self> {
        if size < 2 {
            return Err(Error::Config(format!(
                "alphabet needs at least 2 symbols, got {size}"
            )));
        }
        Ok(Alphabet { size })
    }

    pub fn size(&self) -> u8 {
        self.size
    }

    /// Symbols in ascending order, `1..=d`.
    pub fn symbols(&self) -> impl Iterator<Item = u8> {
        1..=self.size
    }

    pub fn contains(&self, symbol: u8) -> bool {
        (1..=self.size).contains(&symbol)
    }

    fn check(&self, symbol: u8) -> Result<()> {
        if self.contains(symbol) {
            Ok(())
        } else {
            Err(Error::SymbolOutOfRange {
                symbol,
                alphabet_size: self.size,
            })
        }
    }

    /// Number of words of the given length, `d^len`.
    pub fn word_count(&self, len: usize) -> usize {
        (self.size as usize).pow(len as u32)
    }

    /// Lexicographic index of a word among all words of its length.
    pub fn word_index(&self, word: &Word) -> usize {
        let d = self.size as usize;
        word.symbols()
            .iter()
            .fold(0, |acc, &s| acc * d + (s as usize - 1))
    }

    /// Inverse of [`word_index`](Self::word_index).
    pub fn word_at(&self, index: usize, len: usize) -> Word {
        let d = self.size as usize;
        let mut symbols = vec![0u8; len];
        let mut rest = index;
        for slot in symbols.iter_mut().rev() {
            *slot = (rest % d) as u8 + 1;
            rest /= d;
        }
        debug_assert_eq!(rest, 0, "index out of range for word length");
        Word::new(symbols)
    }

    /// All words of the given length in lexicographic order.
    pub fn words(&self, len: usize) -> impl Iterator<Item = Word> + '_ {
        (0..self.word_count(len)).map(move |i| self.word_at(i, len))
    }
}

/// A finite word over the alphabet. May be empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    symbols: Vec<u8>,
}

impl Word {
    pub fn new(symbols: Vec<u8>) -> Self {
        Word { symbols }
    }

    pub fn empty() -> Self {
        Word {
            symbols: Vec::new(),
        }
    }

    /// Parse a comma-free digit string such as `"121"`. Symbols beyond 9 are
    /// not representable in this encoding; the alphabet bound is checked.
    pub fn parse(text: &str, alphabet: Alphabet) -> Result<Self> {
        let mut symbols = Vec::with_capacity(text.len());
        for ch in text.chars() {
            let digit = ch
                .to_digit(10)
                .ok_or_else(|| Error::Config(format!("invalid word string {text:?}")))?;
            let symbol = digit as u8;
            alphabet.check(symbol)?;
            symbols.push(symbol);
        }
        Ok(Word { symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    /// The word made of the first `len` symbols.
    pub fn prefix(&self, len: usize) -> Word {
        Word::new(self.symbols[..len].to_vec())
    }

    /// The word with the first symbol dropped.
    pub fn shifted(&self) -> Word {
        Word::new(self.symbols[1..].to_vec())
    }

    /// `symbol` followed by this word.
    pub fn prepended(&self, symbol: u8) -> Word {
        let mut symbols = Vec::with_capacity(self.len() + 1);
        symbols.push(symbol);
        symbols.extend_from_slice(&self.symbols);
        Word::new(symbols)
    }

    /// Validate all symbols against the alphabet.
    pub fn validate(&self, alphabet: Alphabet) -> Result<()> {
        for &s in &self.symbols {
            alphabet.check(s)?;
        }
        Ok(())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.symbols {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// The most recent `w` symbols of a point of the shift space, leftmost entry
/// being the first coordinate. The length is fixed for the lifetime of a
/// chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WindowState {
    alphabet: Alphabet,
    buffer: Vec<u8>,
}

impl WindowState {
    /// A window holding the given symbols. Requires a nonempty buffer with
    /// every entry in the alphabet.
    pub fn new(alphabet: Alphabet, buffer: Vec<u8>) -> Result<Self> {
        if buffer.is_empty() {
            return Err(Error::WindowTooShort {
                window_len: 0,
                required: 1,
            });
        }
        for &s in &buffer {
            alphabet.check(s)?;
        }
        Ok(WindowState { alphabet, buffer })
    }

    /// The all-`1` window of the given length.
    pub fn ones(alphabet: Alphabet, len: usize) -> Result<Self> {
        WindowState::new(alphabet, vec![1; len.max(1)])
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn symbols(&self) -> &[u8] {
        &self.buffer
    }

    /// First coordinate of the represented point.
    pub fn first_symbol(&self) -> u8 {
        self.buffer[0]
    }

    /// The first `len` coordinates as a word.
    pub fn prefix_word(&self, len: usize) -> Word {
        Word::new(self.buffer[..len].to_vec())
    }

    /// Shift the window right and insert `symbol` at the front; the oldest
    /// symbol falls off. Length is preserved.
    pub fn prepend(&self, symbol: u8) -> Result<WindowState> {
        self.alphabet.check(symbol)?;
        let mut buffer = self.buffer.clone();
        buffer.copy_within(..self.buffer.len() - 1, 1);
        buffer[0] = symbol;
        Ok(WindowState {
            alphabet: self.alphabet,
            buffer,
        })
    }

    /// In-place variant of [`prepend`](Self::prepend) for hot loops. The
    /// symbol must already be validated.
    pub(crate) fn prepend_in_place(&mut self, symbol: u8) {
        debug_assert!(self.alphabet.contains(symbol));
        let len = self.buffer.len();
        self.buffer.copy_within(..len - 1, 1);
        self.buffer[0] = symbol;
    }

    /// 1 if the first `|word|` coordinates equal `word`, else 0. Errors when
    /// the word is longer than the window (the window does not carry enough
    /// information to decide membership).
    pub fn cylinder_indicator(&self, word: &Word) -> Result<f64> {
        if word.len() > self.len() {
            return Err(Error::WordTooLong {
                word_len: word.len(),
                window_len: self.len(),
            });
        }
        Ok(if self.buffer[..word.len()] == *word.symbols() {
            1.0
        } else {
            0.0
        })
    }
}

impl fmt::Display for WindowState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.buffer {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab(d: u8) -> Alphabet {
        Alphabet::new(d).unwrap()
    }

    #[test]
    fn alphabet_rejects_singleton() {
        assert!(Alphabet::new(1).is_err());
        assert!(Alphabet::new(0).is_err());
    }

    #[test]
    fn prepend_shifts_right() {
        let s = WindowState::new(ab(2), vec![1, 2]).unwrap();
        assert_eq!(s.prepend(2).unwrap().symbols(), &[2, 1]);

        let s = WindowState::new(ab(2), vec![1]).unwrap();
        assert_eq!(s.prepend(1).unwrap().symbols(), &[1]);

        let s = WindowState::new(ab(2), vec![2, 2, 1]).unwrap();
        assert_eq!(s.prepend(1).unwrap().symbols(), &[1, 2, 2]);
    }

    #[test]
    fn prepend_rejects_out_of_range_symbol() {
        let s = WindowState::new(ab(2), vec![1, 2]).unwrap();
        let err = s.prepend(3).unwrap_err();
        assert!(matches!(err, Error::SymbolOutOfRange { symbol: 3, .. }));
    }

    #[test]
    fn cylinder_indicator_matches_prefixes() {
        let s = WindowState::new(ab(2), vec![1, 2]).unwrap();
        assert_eq!(s.cylinder_indicator(&Word::new(vec![1])).unwrap(), 1.0);

        let s = WindowState::new(ab(2), vec![2, 2]).unwrap();
        assert_eq!(s.cylinder_indicator(&Word::new(vec![2, 1])).unwrap(), 0.0);

        // The empty cylinder is the whole space.
        assert_eq!(s.cylinder_indicator(&Word::empty()).unwrap(), 1.0);
    }

    #[test]
    fn cylinder_indicator_rejects_deep_words() {
        let s = WindowState::new(ab(2), vec![1]).unwrap();
        let err = s.cylinder_indicator(&Word::new(vec![1, 1])).unwrap_err();
        assert!(matches!(err, Error::WordTooLong { .. }));
    }

    #[test]
    fn word_index_round_trips_lexicographically() {
        let a = ab(2);
        let order: Vec<String> = a.words(2).map(|w| w.to_string()).collect();
        assert_eq!(order, ["11", "12", "21", "22"]);
        for (i, w) in a.words(3).enumerate() {
            assert_eq!(a.word_index(&w), i);
            assert_eq!(a.word_at(i, 3), w);
        }
    }

    #[test]
    fn word_parsing() {
        let a = ab(2);
        assert_eq!(Word::parse("121", a).unwrap().symbols(), &[1, 2, 1]);
        assert!(Word::parse("103", a).is_err());
        assert!(Word::parse("1x", a).is_err());
        assert_eq!(Word::parse("", a).unwrap(), Word::empty());
    }
}
