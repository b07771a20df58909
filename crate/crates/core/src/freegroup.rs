//! The free group F₃ = ⟨a, b, c⟩: reduced words, the Cayley (word) metric and
//! finite prefix cylinders of ends.
//!
//! Generators are indexed by axis: `a` ↔ x₁ (index 0), `b` ↔ x₂ (index 1),
//! `c` ↔ x₃ (index 2). The textual form uses lowercase for generators and
//! uppercase for inverses, with `-` for the empty word.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("invalid letter {0:?} (expected one of a b c A B C)")]
    InvalidLetter(char),
    #[error("word is not freely reduced at position {0}")]
    NotReduced(usize),
    #[error("axis {0} out of range")]
    AxisOutOfRange(usize),
}

/// One of the six generators a, b, c, a⁻¹, b⁻¹, c⁻¹.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Letter {
    axis: u8,
    positive: bool,
}

impl Letter {
    pub const A: Letter = Letter { axis: 0, positive: true };
    pub const B: Letter = Letter { axis: 1, positive: true };
    pub const C: Letter = Letter { axis: 2, positive: true };
    pub const A_INV: Letter = Letter { axis: 0, positive: false };
    pub const B_INV: Letter = Letter { axis: 1, positive: false };
    pub const C_INV: Letter = Letter { axis: 2, positive: false };

    pub const ALL: [Letter; 6] = [
        Letter::A,
        Letter::B,
        Letter::C,
        Letter::A_INV,
        Letter::B_INV,
        Letter::C_INV,
    ];

    pub fn new(axis: usize, positive: bool) -> Result<Self, WordError> {
        if axis > 2 {
            return Err(WordError::AxisOutOfRange(axis));
        }
        Ok(Letter { axis: axis as u8, positive })
    }

    /// Zero-based axis index (0 = a, 1 = b, 2 = c).
    #[inline]
    pub fn axis(self) -> usize {
        self.axis as usize
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.positive
    }

    /// +1 for a generator, −1 for an inverse generator.
    #[inline]
    pub fn sign(self) -> i32 {
        if self.positive {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn inverse(self) -> Letter {
        Letter { axis: self.axis, positive: !self.positive }
    }

    #[inline]
    pub fn cancels(self, other: Letter) -> bool {
        self.axis == other.axis && self.positive != other.positive
    }

    /// Unit lattice step of the compartment transition this letter encodes.
    pub fn step(self) -> [i64; 3] {
        let mut s = [0; 3];
        s[self.axis()] = self.sign() as i64;
        s
    }

    pub fn to_char(self) -> char {
        let c = [b'a', b'b', b'c'][self.axis()] as char;
        if self.positive {
            c
        } else {
            c.to_ascii_uppercase()
        }
    }

    pub fn from_char(c: char) -> Result<Self, WordError> {
        let axis = match c.to_ascii_lowercase() {
            'a' => 0,
            'b' => 1,
            'c' => 2,
            _ => return Err(WordError::InvalidLetter(c)),
        };
        Ok(Letter { axis, positive: c.is_ascii_lowercase() })
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// A freely reduced word: no letter is adjacent to its own inverse.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ReducedWord {
    letters: Vec<Letter>,
}

/// Free reduction by a single stack scan.
pub fn reduce<I: IntoIterator<Item = Letter>>(raw: I) -> ReducedWord {
    let mut acc = ReducedWord::identity();
    for l in raw {
        acc.push(l);
    }
    acc
}

impl ReducedWord {
    pub fn identity() -> Self {
        ReducedWord { letters: Vec::new() }
    }

    /// Accepts `letters` only if they are already reduced.
    pub fn from_reduced(letters: Vec<Letter>) -> Result<Self, WordError> {
        if let Some(i) = letters.windows(2).position(|w| w[0].cancels(w[1])) {
            return Err(WordError::NotReduced(i));
        }
        Ok(ReducedWord { letters })
    }

    /// Right-multiplies by one letter, cancelling if needed.
    pub fn push(&mut self, l: Letter) {
        match self.letters.last() {
            Some(&last) if last.cancels(l) => {
                self.letters.pop();
            }
            _ => self.letters.push(l),
        }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> ReducedWord {
        ReducedWord { letters: self.letters.iter().rev().map(|l| l.inverse()).collect() }
    }

    pub fn concat(&self, other: &ReducedWord) -> ReducedWord {
        concat(self, other)
    }

    /// First letter differs from the inverse of the last one.
    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.letters.first(), self.letters.last()) {
            (Some(&f), Some(&l)) => !f.cancels(l),
            _ => true,
        }
    }

    pub fn prefix(&self, n: usize) -> ReducedWord {
        ReducedWord { letters: self.letters[..n.min(self.len())].to_vec() }
    }

    /// `self` repeated `k` times (free reduction applied).
    pub fn power(&self, k: usize) -> ReducedWord {
        let mut out = ReducedWord::identity();
        for _ in 0..k {
            out = concat(&out, self);
        }
        out
    }

    /// Net lattice displacement of the compartment path spelled by the word.
    pub fn displacement(&self) -> [i64; 3] {
        let mut d = [0i64; 3];
        for l in &self.letters {
            d[l.axis()] += l.sign() as i64;
        }
        d
    }
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "-");
        }
        for l in &self.letters {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for ReducedWord {
    type Err = WordError;

    /// Parses the `abAc` format strictly: the input must already be reduced.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "-" || s.is_empty() {
            return Ok(ReducedWord::identity());
        }
        let letters = s.chars().map(Letter::from_char).collect::<Result<Vec<_>, _>>()?;
        ReducedWord::from_reduced(letters)
    }
}

impl Serialize for ReducedWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ReducedWord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn concat(u: &ReducedWord, v: &ReducedWord) -> ReducedWord {
    let mut out = u.clone();
    // cancellation only happens at the seam
    for &l in &v.letters {
        out.push(l);
    }
    out
}

/// Distance in the Cayley tree: |u⁻¹v|.
pub fn cayley_distance(u: &ReducedWord, v: &ReducedWord) -> usize {
    let k = common_prefix_len(u, v);
    (u.len() - k) + (v.len() - k)
}

fn common_prefix_len(u: &ReducedWord, v: &ReducedWord) -> usize {
    u.letters.iter().zip(&v.letters).take_while(|(a, b)| a == b).count()
}

pub fn common_prefix(u: &ReducedWord, v: &ReducedWord) -> ReducedWord {
    u.prefix(common_prefix_len(u, v))
}

/// Number of reduced words of length exactly `n`: 1 for n = 0, else 6·5ⁿ⁻¹.
pub fn count_reduced_words(n: u64) -> BigUint {
    if n == 0 {
        return BigUint::from(1u32);
    }
    BigUint::from(6u32) * BigUint::from(5u32).pow((n - 1) as u32)
}

/// Cylinder of ends whose infinite reduced word begins with `word`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct EndPrefix {
    pub word: ReducedWord,
}

impl EndPrefix {
    pub fn vertex() -> Self {
        EndPrefix { word: ReducedWord::identity() }
    }

    /// True if every end in `other` also lies in `self`.
    pub fn contains(&self, other: &EndPrefix) -> bool {
        other.word.len() >= self.word.len()
            && other.word.letters()[..self.word.len()] == *self.word.letters()
    }
}

/// A point of the cone over the ends: speed plus direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationVector {
    speed: f64,
    direction: EndPrefix,
}

impl RotationVector {
    /// Zero speed collapses the direction to the cone vertex.
    pub fn new(speed: f64, direction: EndPrefix) -> Self {
        assert!(speed >= 0.0 && speed.is_finite(), "speed must be finite and nonnegative");
        if speed == 0.0 {
            RotationVector { speed, direction: EndPrefix::vertex() }
        } else {
            RotationVector { speed, direction }
        }
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn direction(&self) -> &EndPrefix {
        &self.direction
    }
}
