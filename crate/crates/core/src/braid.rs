//! Braid-group elements as words and as Dynnikov coordinates.
//!
//! A braid on `n` strands is represented either by a [`BraidWord`] (a sequence
//! of signed Artin generators, convenient for input and debugging) or by a
//! [`DynnikovState`]: the coordinates of the reference multicurve after the
//! braid has acted on it. Two words represent the same braid exactly when they
//! move the reference state to the same coordinates, which turns the word
//! problem into integer-vector equality.
//!
//! Coordinates grow exponentially with word length, so they are held as
//! arbitrary-precision integers throughout.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BraidError {
    #[error("invalid strand count {0}: need at least 2 strands")]
    InvalidStrandCount(usize),
    #[error("generator index {index} out of range for {strands} strands")]
    InvalidGenerator { index: usize, strands: usize },
    #[error("strand count mismatch: {0} vs {1}")]
    StrandMismatch(usize, usize),
    #[error("strand index {index} out of range for {strands} strands")]
    InvalidStrandIndex { index: usize, strands: usize },
    #[error("pure generator requires 1 <= i < j <= n, got i={i}, j={j}, n={n}")]
    InvalidPureIndices { i: usize, j: usize, n: usize },
    #[error("malformed braid word token at byte {0}")]
    BadWordToken(usize),
    #[error("malformed state line: {0}")]
    BadStateLine(String),
}

/// A signed Artin generator: `sign = +1` is a crossing of strands
/// `index`, `index + 1` in the positive (counterclockwise) direction,
/// `sign = -1` its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Generator {
    /// 1-based generator index, in `[1, strands - 1]`.
    pub index: usize,
    /// `+1` or `-1`.
    pub sign: i8,
}

impl Generator {
    pub fn positive(index: usize) -> Self {
        Generator { index, sign: 1 }
    }

    pub fn negative(index: usize) -> Self {
        Generator { index, sign: -1 }
    }

    pub fn inverse(self) -> Self {
        Generator { index: self.index, sign: -self.sign }
    }
}

/// A braid word: an ordered sequence of generators over a fixed number of
/// strands. The empty sequence is the identity.
///
/// `strands == 1` is permitted as a degenerate case (the group is trivial and
/// only the empty word exists); coordinates require at least two strands.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BraidWord {
    strands: usize,
    letters: Vec<Generator>,
}

impl BraidWord {
    pub fn identity(strands: usize) -> Self {
        BraidWord { strands, letters: Vec::new() }
    }

    pub fn new(strands: usize, letters: Vec<Generator>) -> Result<Self, BraidError> {
        for g in &letters {
            Self::check_letter(strands, *g)?;
        }
        Ok(BraidWord { strands, letters })
    }

    fn check_letter(strands: usize, g: Generator) -> Result<(), BraidError> {
        if g.index == 0 || g.index >= strands {
            return Err(BraidError::InvalidGenerator { index: g.index, strands });
        }
        debug_assert!(g.sign == 1 || g.sign == -1);
        Ok(())
    }

    pub fn push(&mut self, g: Generator) -> Result<(), BraidError> {
        Self::check_letter(self.strands, g)?;
        self.letters.push(g);
        Ok(())
    }

    pub fn strands(&self) -> usize {
        self.strands
    }

    pub fn letters(&self) -> &[Generator] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Concatenation (group product) of two words over the same strand count.
    pub fn concat(&self, other: &BraidWord) -> Result<BraidWord, BraidError> {
        if self.strands != other.strands {
            return Err(BraidError::StrandMismatch(self.strands, other.strands));
        }
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Ok(BraidWord { strands: self.strands, letters })
    }

    /// The inverse word: letters reversed, signs flipped.
    pub fn inverse(&self) -> BraidWord {
        let letters = self.letters.iter().rev().map(|g| g.inverse()).collect();
        BraidWord { strands: self.strands, letters }
    }

    /// Parses the compact word format: `s<i>` for a positive generator and
    /// `S<i>` for a negative one, e.g. `S2s1S2`. The empty string is the
    /// identity.
    pub fn parse(text: &str, strands: usize) -> Result<Self, BraidError> {
        let bytes = text.as_bytes();
        let mut letters = Vec::new();
        let mut pos = 0;
        while pos < bytes.len() {
            let sign = match bytes[pos] {
                b's' => 1i8,
                b'S' => -1i8,
                _ => return Err(BraidError::BadWordToken(pos)),
            };
            pos += 1;
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            if start == pos {
                return Err(BraidError::BadWordToken(start));
            }
            let index: usize =
                text[start..pos].parse().map_err(|_| BraidError::BadWordToken(start))?;
            letters.push(Generator { index, sign });
        }
        BraidWord::new(strands, letters)
    }
}

impl fmt::Display for BraidWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.letters {
            let c = if g.sign > 0 { 's' } else { 'S' };
            write!(f, "{}{}", c, g.index)?;
        }
        Ok(())
    }
}

/// The image of a braid under the projection to the symmetric group,
/// tracking strand positions: the strand entering at position `p`
/// (1-based) leaves at position `apply(p)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrandPermutation {
    mapping: Vec<usize>,
}

impl StrandPermutation {
    pub fn identity(n: usize) -> Self {
        StrandPermutation { mapping: (1..=n).collect() }
    }

    pub fn size(&self) -> usize {
        self.mapping.len()
    }

    /// Image of 1-based position `p`.
    pub fn apply(&self, p: usize) -> usize {
        self.mapping[p - 1]
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &v)| v == i + 1)
    }

    /// `self` then `other`: `(self.compose(other)).apply(p) == other.apply(self.apply(p))`.
    pub fn compose(&self, other: &StrandPermutation) -> StrandPermutation {
        debug_assert_eq!(self.size(), other.size());
        let mapping = self.mapping.iter().map(|&v| other.mapping[v - 1]).collect();
        StrandPermutation { mapping }
    }

    pub fn from_mapping(mapping: Vec<usize>) -> Self {
        debug_assert!({
            let mut seen = vec![false; mapping.len()];
            mapping.iter().all(|&v| {
                v >= 1 && v <= seen.len() && !std::mem::replace(&mut seen[v - 1], true)
            })
        });
        StrandPermutation { mapping }
    }
}

/// Dynnikov coordinates of a braid on `strands` strands: the vector
/// `(a_1, ..., a_{n-1}, b_1, ..., b_{n-1})` of intersection-count
/// differences for the reference multicurve moved by the braid.
///
/// States are immutable values; the derived ordering (strand count, then
/// coordinates lexicographically) is what search structures key on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DynnikovState {
    strands: usize,
    coords: Vec<BigInt>,
}

fn pos_part(x: &BigInt) -> BigInt {
    if x.is_positive() {
        x.clone()
    } else {
        BigInt::zero()
    }
}

fn neg_part(x: &BigInt) -> BigInt {
    if x.is_negative() {
        x.clone()
    } else {
        BigInt::zero()
    }
}

impl DynnikovState {
    /// The reference state `u`: all `a_i = 0`, all `b_i = -1`.
    pub fn identity(strands: usize) -> Result<Self, BraidError> {
        if strands < 2 {
            return Err(BraidError::InvalidStrandCount(strands));
        }
        let mut coords = vec![BigInt::zero(); 2 * strands - 2];
        for b in coords.iter_mut().skip(strands - 1) {
            *b = BigInt::from(-1);
        }
        Ok(DynnikovState { strands, coords })
    }

    pub fn from_coords(strands: usize, coords: Vec<BigInt>) -> Result<Self, BraidError> {
        if strands < 2 {
            return Err(BraidError::InvalidStrandCount(strands));
        }
        if coords.len() != 2 * strands - 2 {
            return Err(BraidError::BadStateLine(format!(
                "expected {} coordinates, got {}",
                2 * strands - 2,
                coords.len()
            )));
        }
        if coords.iter().all(|c| c.is_zero()) {
            return Err(BraidError::BadStateLine("all-zero coordinate vector".into()));
        }
        Ok(DynnikovState { strands, coords })
    }

    pub fn strands(&self) -> usize {
        self.strands
    }

    pub fn coords(&self) -> &[BigInt] {
        &self.coords
    }

    pub fn is_identity(&self) -> bool {
        let n = self.strands;
        self.coords[..n - 1].iter().all(|a| a.is_zero())
            && self.coords[n - 1..].iter().all(|b| *b == BigInt::from(-1))
    }

    /// Right action of a single generator, in place.
    pub fn apply_mut(&mut self, g: Generator) -> Result<(), BraidError> {
        let n = self.strands;
        if g.index == 0 || g.index >= n {
            return Err(BraidError::InvalidGenerator { index: g.index, strands: n });
        }
        let i = g.index;
        // a_j lives at coords[j-1], b_j at coords[n-1 + j-1].
        let (a_at, b_at) = (i - 1, n - 1 + i - 1);
        if i == 1 {
            let a1 = self.coords[a_at].clone();
            let b1 = self.coords[b_at].clone();
            let (new_a, new_b);
            if g.sign > 0 {
                let nb = &a1 + pos_part(&b1);
                new_a = -&b1 + pos_part(&nb);
                new_b = nb;
            } else {
                let nb = pos_part(&b1) - &a1;
                new_a = &b1 - pos_part(&nb);
                new_b = nb;
            }
            self.coords[a_at] = new_a;
            self.coords[b_at] = new_b;
        } else {
            let (am_at, bm_at) = (i - 2, n - 1 + i - 2);
            let am = self.coords[am_at].clone();
            let bm = self.coords[bm_at].clone();
            let ai = self.coords[a_at].clone();
            let bi = self.coords[b_at].clone();
            let (new_am, new_bm, new_ai, new_bi);
            if g.sign > 0 {
                let c = &am - &ai - pos_part(&bi) + neg_part(&bm);
                new_am = &am - pos_part(&bm) - pos_part(&(pos_part(&bi) + &c));
                new_bm = &bi + neg_part(&c);
                new_ai = &ai - neg_part(&bi) - neg_part(&(neg_part(&bm) - &c));
                new_bi = &bm - neg_part(&c);
            } else {
                let d = &am - &ai + pos_part(&bi) - neg_part(&bm);
                new_am = &am + pos_part(&bm) + pos_part(&(pos_part(&bi) - &d));
                new_bm = &bi - pos_part(&d);
                new_ai = &ai + neg_part(&bi) + neg_part(&(neg_part(&bm) + &d));
                new_bi = &bm + pos_part(&d);
            }
            self.coords[am_at] = new_am;
            self.coords[bm_at] = new_bm;
            self.coords[a_at] = new_ai;
            self.coords[b_at] = new_bi;
        }
        debug_assert!(!self.coords.iter().all(|c| c.is_zero()));
        Ok(())
    }

    /// Right action of a single generator; the input state is unchanged.
    pub fn apply(&self, g: Generator) -> Result<Self, BraidError> {
        let mut out = self.clone();
        out.apply_mut(g)?;
        Ok(out)
    }

    /// Left-to-right fold of [`DynnikovState::apply`] over a word.
    pub fn apply_word(&self, w: &BraidWord) -> Result<Self, BraidError> {
        if w.strands() != self.strands {
            return Err(BraidError::StrandMismatch(self.strands, w.strands()));
        }
        let mut out = self.clone();
        for g in w.letters() {
            out.apply_mut(*g)?;
        }
        Ok(out)
    }

    /// Largest absolute value among the coordinates.
    pub fn max_abs(&self) -> BigInt {
        let mut best = BigInt::zero();
        for c in &self.coords {
            let a = c.abs();
            if a > best {
                best = a;
            }
        }
        best
    }

    /// Line format `n a_1 ... a_{n-1} b_1 ... b_{n-1}` with decimal integers.
    pub fn serialize(&self) -> String {
        let mut s = self.strands.to_string();
        for c in &self.coords {
            s.push(' ');
            s.push_str(&c.to_string());
        }
        s
    }

    pub fn parse(line: &str) -> Result<Self, BraidError> {
        let mut parts = line.split_whitespace();
        let n: usize = parts
            .next()
            .ok_or_else(|| BraidError::BadStateLine("empty line".into()))?
            .parse()
            .map_err(|_| BraidError::BadStateLine(line.to_string()))?;
        let coords = parts
            .map(|p| BigInt::from_str(p).map_err(|_| BraidError::BadStateLine(line.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        DynnikovState::from_coords(n, coords)
    }
}

/// Whether two words represent the same braid: both are applied to the
/// reference state and the resulting coordinates compared.
pub fn braid_equal(w1: &BraidWord, w2: &BraidWord) -> Result<bool, BraidError> {
    if w1.strands() != w2.strands() {
        return Err(BraidError::StrandMismatch(w1.strands(), w2.strands()));
    }
    if w1.strands() < 2 {
        return Ok(true);
    }
    let u = DynnikovState::identity(w1.strands())?;
    Ok(u.apply_word(w1)? == u.apply_word(w2)?)
}

/// Image of a word in the symmetric group: each letter swaps the strands at
/// positions `index`, `index + 1` regardless of sign.
pub fn permutation(w: &BraidWord) -> StrandPermutation {
    let n = w.strands();
    // position_of[s] = current position of the strand that started at s.
    let mut position_of: Vec<usize> = (0..n).collect();
    let mut strand_at: Vec<usize> = (0..n).collect();
    for g in w.letters() {
        let p = g.index - 1;
        let (s1, s2) = (strand_at[p], strand_at[p + 1]);
        strand_at.swap(p, p + 1);
        position_of[s1] = p + 1;
        position_of[s2] = p;
    }
    StrandPermutation::from_mapping(position_of.iter().map(|&p| p + 1).collect())
}

/// The pure-braid generator `a_{i,j}` in its conjugated-square form:
/// `sigma_{j-1} ... sigma_{i+1} sigma_i^2 sigma_{i+1}^-1 ... sigma_{j-1}^-1`.
pub fn pure_generator(i: usize, j: usize, n: usize) -> Result<BraidWord, BraidError> {
    if !(1 <= i && i < j && j <= n) {
        return Err(BraidError::InvalidPureIndices { i, j, n });
    }
    let mut letters = Vec::with_capacity(2 * (j - i));
    for k in (i + 1..j).rev() {
        letters.push(Generator::positive(k));
    }
    letters.push(Generator::positive(i));
    letters.push(Generator::positive(i));
    for k in i + 1..j {
        letters.push(Generator::negative(k));
    }
    BraidWord::new(n, letters)
}

/// The equivalent second form of `a_{i,j}`:
/// `sigma_i^-1 ... sigma_{j-2}^-1 sigma_{j-1}^2 sigma_{j-2} ... sigma_i`.
pub fn pure_generator_second_form(i: usize, j: usize, n: usize) -> Result<BraidWord, BraidError> {
    if !(1 <= i && i < j && j <= n) {
        return Err(BraidError::InvalidPureIndices { i, j, n });
    }
    let mut letters = Vec::with_capacity(2 * (j - i));
    for k in i..j - 1 {
        letters.push(Generator::negative(k));
    }
    letters.push(Generator::positive(j - 1));
    letters.push(Generator::positive(j - 1));
    for k in (i..j - 1).rev() {
        letters.push(Generator::positive(k));
    }
    BraidWord::new(n, letters)
}

/// Deletes one strand from a word, giving a word on one fewer strand.
///
/// The deleted strand is the one that *starts* at position `k` (1-based).
/// The scan tracks its geometric position: letters whose crossing involves
/// it are dropped, and remaining letters are reindexed down by one when the
/// tracked strand sits on their left.
pub fn forget_strand(w: &BraidWord, k: usize) -> Result<BraidWord, BraidError> {
    let n = w.strands();
    if k == 0 || k > n {
        return Err(BraidError::InvalidStrandIndex { index: k, strands: n });
    }
    let mut pos = k;
    let mut letters = Vec::with_capacity(w.len());
    for g in w.letters() {
        if g.index == pos {
            pos += 1;
        } else if g.index + 1 == pos {
            pos -= 1;
        } else if g.index > pos {
            letters.push(Generator { index: g.index - 1, sign: g.sign });
        } else {
            letters.push(*g);
        }
    }
    BraidWord::new(n - 1, letters)
}

/// A uniform random word: each letter i.i.d. over the `2(n-1)` signed
/// generators, reproducible from the seed on any platform.
pub fn random_word(n: usize, length: usize, seed: u64) -> BraidWord {
    assert!(n >= 2, "random_word needs at least 2 strands");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let letters = (0..length)
        .map(|_| {
            let r = rng.random_range(0..2 * (n - 1));
            Generator { index: r / 2 + 1, sign: if r % 2 == 0 { 1 } else { -1 } }
        })
        .collect();
    BraidWord { strands: n, letters }
}

/// All relators of the Artin presentation for `n` strands: far commutators
/// `sigma_i sigma_j sigma_i^-1 sigma_j^-1` (`|i-j| >= 2`) and braid relators
/// `sigma_i sigma_{i+1} sigma_i sigma_{i+1}^-1 sigma_i^-1 sigma_{i+1}^-1`.
pub fn relators(n: usize) -> Vec<BraidWord> {
    let mut out = Vec::new();
    for i in 1..n {
        for j in i + 2..n {
            let letters = vec![
                Generator::positive(i),
                Generator::positive(j),
                Generator::negative(i),
                Generator::negative(j),
            ];
            out.push(BraidWord::new(n, letters).unwrap());
        }
    }
    for i in 1..n.saturating_sub(1) {
        let letters = vec![
            Generator::positive(i),
            Generator::positive(i + 1),
            Generator::positive(i),
            Generator::negative(i + 1),
            Generator::negative(i),
            Generator::negative(i + 1),
        ];
        out.push(BraidWord::new(n, letters).unwrap());
    }
    out
}
