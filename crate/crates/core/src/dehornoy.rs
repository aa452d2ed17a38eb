//! Word-problem baseline: handle reduction and the Dehornoy order.
//!
//! A word is rewritten until it contains no handle, at which point it is
//! empty, sigma-positive, or sigma-negative; the sign decides the order.
//! Used only to benchmark against the Dynnikov-coordinate engine.

use thiserror::Error;

use crate::braid::{BraidWord, Generator};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DehornoyError {
    #[error("handle reduction exceeded its step budget of {budget} rewrites")]
    BudgetExhausted { budget: u64 },
    #[error("strand count mismatch: {0} vs {1}")]
    StrandMismatch(usize, usize),
}

/// Which handle gets rewritten next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Among all handles, the lowest main index first, leftmost among ties.
    #[default]
    FullHRed,
    /// Segments processed in positional order, ignoring the global
    /// lowest-index rule. Same results, different rewrite sequences.
    LeftToRight,
}

#[derive(Debug, Clone, Copy)]
pub struct HandleConfig {
    pub strategy: Strategy,
    /// Rewrite budget per reduction; exceeding it is an error, never a
    /// silent truncation.
    pub step_budget: u64,
}

impl Default for HandleConfig {
    fn default() -> Self {
        HandleConfig { strategy: Strategy::FullHRed, step_budget: 10_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Less,
    Equal,
    Greater,
}

/// Removes adjacent inverse pairs until none remain.
pub fn free_reduce(letters: &[Generator]) -> Vec<Generator> {
    let mut out: Vec<Generator> = Vec::with_capacity(letters.len());
    for &g in letters {
        match out.last() {
            Some(&top) if top.index == g.index && top.sign == -g.sign => {
                out.pop();
            }
            _ => out.push(g),
        }
    }
    out
}

/// Free reduction at the word level.
pub fn free_reduce_word(w: &BraidWord) -> BraidWord {
    BraidWord::new(w.strands(), free_reduce(w.letters())).unwrap()
}

const NIL: u32 = u32::MAX;

/// A word in a doubly-linked arena, free-reduced between handle rewrites.
pub struct ReducibleWord {
    index: Vec<u32>,
    sign: Vec<i8>,
    prev: Vec<u32>,
    next: Vec<u32>,
    head: u32,
    free: Vec<u32>,
    len: usize,
}

impl ReducibleWord {
    pub fn from_letters(letters: &[Generator]) -> Self {
        let reduced = free_reduce(letters);
        let m = reduced.len();
        let mut w = ReducibleWord {
            index: Vec::with_capacity(m),
            sign: Vec::with_capacity(m),
            prev: Vec::with_capacity(m),
            next: Vec::with_capacity(m),
            head: NIL,
            free: Vec::new(),
            len: m,
        };
        for (pos, g) in reduced.iter().enumerate() {
            w.index.push(g.index as u32);
            w.sign.push(g.sign);
            w.prev.push(if pos == 0 { NIL } else { pos as u32 - 1 });
            w.next.push(if pos + 1 == m { NIL } else { pos as u32 + 1 });
        }
        if m > 0 {
            w.head = 0;
        }
        w
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn to_letters(&self) -> Vec<Generator> {
        let mut out = Vec::with_capacity(self.len);
        let mut cur = self.head;
        while cur != NIL {
            out.push(Generator { index: self.index[cur as usize] as usize, sign: self.sign[cur as usize] });
            cur = self.next[cur as usize];
        }
        out
    }

    fn alloc(&mut self, index: u32, sign: i8) -> u32 {
        self.len += 1;
        if let Some(slot) = self.free.pop() {
            let s = slot as usize;
            self.index[s] = index;
            self.sign[s] = sign;
            slot
        } else {
            self.index.push(index);
            self.sign.push(sign);
            self.prev.push(NIL);
            self.next.push(NIL);
            (self.index.len() - 1) as u32
        }
    }

    fn insert_after(&mut self, at: u32, index: u32, sign: i8) -> u32 {
        let node = self.alloc(index, sign);
        let n = self.next[at as usize];
        self.next[at as usize] = node;
        self.prev[node as usize] = at;
        self.next[node as usize] = n;
        if n != NIL {
            self.prev[n as usize] = node;
        }
        node
    }

    fn insert_before(&mut self, at: u32, index: u32, sign: i8) -> u32 {
        let node = self.alloc(index, sign);
        let p = self.prev[at as usize];
        self.prev[at as usize] = node;
        self.next[node as usize] = at;
        self.prev[node as usize] = p;
        if p != NIL {
            self.next[p as usize] = node;
        } else {
            self.head = node;
        }
        node
    }

    fn unlink(&mut self, node: u32) {
        let (p, n) = (self.prev[node as usize], self.next[node as usize]);
        if p != NIL {
            self.next[p as usize] = n;
        } else {
            self.head = n;
        }
        if n != NIL {
            self.prev[n as usize] = p;
        }
        self.free.push(node);
        self.len -= 1;
    }

    /// Cancels inverse pairs in the dirty span starting at `from`,
    /// cascading leftwards as removals expose new pairs. Never cancels a
    /// pair that touches the exclusive bounds `(l_bound, r_bound)`;
    /// letters there belong to enclosing reduction frames. Stops once the
    /// scan passes `stop` without cancelling, or reaches `r_bound`.
    fn cancel_span(&mut self, from: u32, stop: u32, l_bound: u32, r_bound: u32) {
        let mut cur = if from == NIL || from == l_bound {
            if l_bound == NIL {
                self.head
            } else {
                self.next[l_bound as usize]
            }
        } else {
            from
        };
        while cur != NIL && cur != r_bound {
            let p = self.prev[cur as usize];
            if p != NIL
                && p != l_bound
                && self.index[p as usize] == self.index[cur as usize]
                && self.sign[p as usize] == -self.sign[cur as usize]
            {
                let nxt = self.next[cur as usize];
                self.unlink(p);
                self.unlink(cur);
                cur = nxt;
            } else {
                if cur == stop {
                    break;
                }
                cur = self.next[cur as usize];
            }
        }
    }

    /// Rewrites the handle bracketed by `open` and `close` (letters
    /// `sigma_m^e ... sigma_m^{-e}`): the brackets are removed and every
    /// inner `sigma_{m+1}^d` becomes `sigma_{m+1}^{-e} sigma_m^d sigma_{m+1}^{e}`.
    /// Cancellation afterwards stays inside `(l_bound, r_bound)`.
    fn rewrite_handle(&mut self, open: u32, close: u32, l_bound: u32, r_bound: u32) {
        let m = self.index[open as usize];
        let e = self.sign[open as usize];
        debug_assert_eq!(self.index[close as usize], m);
        debug_assert_eq!(self.sign[close as usize], -e);

        let before = self.prev[open as usize];
        let mut cur = self.next[open as usize];
        while cur != close {
            let nxt = self.next[cur as usize];
            debug_assert!(self.index[cur as usize] > m);
            if self.index[cur as usize] == m + 1 {
                let d = self.sign[cur as usize];
                self.insert_before(cur, m + 1, -e);
                self.index[cur as usize] = m;
                self.sign[cur as usize] = d;
                self.insert_after(cur, m + 1, e);
            }
            cur = nxt;
        }
        let after = self.next[close as usize];
        self.unlink(open);
        self.unlink(close);
        let from = if before == NIL { self.head } else { before };
        let stop = if after == NIL { NIL } else { after };
        self.cancel_span(from, stop, l_bound, r_bound);
    }
}

#[derive(Clone, Copy)]
struct Segment {
    /// Exclusive left boundary (NIL = list head side).
    left: u32,
    /// Exclusive right boundary (NIL = list tail side).
    right: u32,
}

fn first_in(w: &ReducibleWord, seg: Segment) -> u32 {
    if seg.left == NIL {
        w.head
    } else {
        w.next[seg.left as usize]
    }
}

fn min_index_in(w: &ReducibleWord, seg: Segment) -> Option<u32> {
    let mut best: Option<u32> = None;
    let mut cur = first_in(w, seg);
    while cur != seg.right && cur != NIL {
        let idx = w.index[cur as usize];
        if best.map_or(true, |b| idx < b) {
            best = Some(idx);
        }
        cur = w.next[cur as usize];
    }
    best
}

/// Reduces every handle inside `seg` (boundaries exclusive; boundary
/// letters, when present, have strictly smaller index than everything
/// inside and are never touched).
///
/// A handle may only be rewritten when its interior holds no handle of
/// the next index, otherwise the rewrite regenerates the handle forever;
/// reducing the interior completely first makes every rewrite permitted.
fn reduce_segment(
    w: &mut ReducibleWord,
    seg: Segment,
    steps: &mut u64,
    cfg: &HandleConfig,
) -> Result<(), DehornoyError> {
    let Some(m) = min_index_in(w, seg) else {
        return Ok(());
    };
    // Phase 1: eliminate m-handles. Consecutive m-letters of opposite sign
    // bracket a handle; its interior is reduced first, then the handle is
    // rewritten, and the scan restarts (rewrites spawn new m-letters).
    'rescan: loop {
        let mut prev_m: u32 = NIL;
        let mut cur = first_in(w, seg);
        while cur != seg.right && cur != NIL {
            if w.index[cur as usize] == m {
                if prev_m != NIL && w.sign[prev_m as usize] == -w.sign[cur as usize] {
                    reduce_segment(w, Segment { left: prev_m, right: cur }, steps, cfg)?;
                    *steps += 1;
                    if *steps > cfg.step_budget {
                        return Err(DehornoyError::BudgetExhausted { budget: cfg.step_budget });
                    }
                    w.rewrite_handle(prev_m, cur, seg.left, seg.right);
                    continue 'rescan;
                }
                prev_m = cur;
            }
            cur = w.next[cur as usize];
        }
        break;
    }
    // Phase 2: the surviving m-letters all share one sign; the spans
    // between them are independent. Their reductions cannot create new
    // m-letters, so one pass suffices.
    let mut subs: Vec<Segment> = Vec::new();
    let mut left = seg.left;
    let mut cur = first_in(w, seg);
    while cur != seg.right && cur != NIL {
        if w.index[cur as usize] == m {
            subs.push(Segment { left, right: cur });
            left = cur;
        }
        cur = w.next[cur as usize];
    }
    subs.push(Segment { left, right: seg.right });
    subs.retain(|s| {
        let f = first_in(w, *s);
        f != s.right && f != NIL
    });
    match cfg.strategy {
        Strategy::FullHRed => {
            // Lowest inner index first, leftmost among ties.
            let mut keyed: Vec<(u32, usize)> = subs
                .iter()
                .enumerate()
                .filter_map(|(i, s)| min_index_in(w, *s).map(|mi| (mi, i)))
                .collect();
            keyed.sort();
            for (_, i) in keyed {
                reduce_segment(w, subs[i], steps, cfg)?;
            }
        }
        Strategy::LeftToRight => {
            for s in subs {
                reduce_segment(w, s, steps, cfg)?;
            }
        }
    }
    Ok(())
}

fn full_reduce(w: &mut ReducibleWord, cfg: &HandleConfig) -> Result<u64, DehornoyError> {
    let mut steps = 0u64;
    reduce_segment(w, Segment { left: NIL, right: NIL }, &mut steps, cfg)?;
    Ok(steps)
}

/// Rewrites `w` into an equivalent word that is empty, sigma-positive, or
/// sigma-negative.
pub fn handle_reduce(w: &BraidWord, cfg: &HandleConfig) -> Result<BraidWord, DehornoyError> {
    let mut rw = ReducibleWord::from_letters(w.letters());
    full_reduce(&mut rw, cfg)?;
    Ok(BraidWord::new(w.strands(), rw.to_letters()).unwrap())
}

/// Like [`handle_reduce`] but returns the in-progress word when the budget
/// runs out. Debugging aid.
#[doc(hidden)]
pub fn handle_reduce_partial(w: &BraidWord, cfg: &HandleConfig) -> (BraidWord, bool) {
    let mut rw = ReducibleWord::from_letters(w.letters());
    let done = full_reduce(&mut rw, cfg).is_ok();
    (BraidWord::new(w.strands(), rw.to_letters()).unwrap(), done)
}

/// Sign of a handle-free word: `Some(+1)` if its lowest-index generator
/// occurs only positively, `Some(-1)` if only negatively, `None` if empty.
pub fn definite_sign(w: &BraidWord) -> Option<i8> {
    let min = w.letters().iter().map(|g| g.index).min()?;
    let mut sign = 0i8;
    for g in w.letters() {
        if g.index == min {
            debug_assert!(sign == 0 || sign == g.sign, "word is not handle-free");
            sign = g.sign;
        }
    }
    Some(sign)
}

/// The Dehornoy order: the sign of `handle_reduce(w1^-1 w2)`.
/// Sigma-positive means `w1 < w2`; empty means equality of braids.
pub fn dehornoy_compare(
    w1: &BraidWord,
    w2: &BraidWord,
    cfg: &HandleConfig,
) -> Result<Comparison, DehornoyError> {
    if w1.strands() != w2.strands() {
        return Err(DehornoyError::StrandMismatch(w1.strands(), w2.strands()));
    }
    let mut letters: Vec<Generator> = w1.letters().iter().rev().map(|g| g.inverse()).collect();
    letters.extend_from_slice(w2.letters());
    compare_quotient_letters(&letters, cfg)
}

/// Same as [`dehornoy_compare`], for a pre-assembled quotient word
/// `w1^-1 w2` given as raw letters.
pub fn compare_quotient_letters(
    letters: &[Generator],
    cfg: &HandleConfig,
) -> Result<Comparison, DehornoyError> {
    let mut rw = ReducibleWord::from_letters(letters);
    full_reduce(&mut rw, cfg)?;
    if rw.is_empty() {
        return Ok(Comparison::Equal);
    }
    let reduced = rw.to_letters();
    let min = reduced.iter().map(|g| g.index).min().unwrap();
    let sign = reduced.iter().find(|g| g.index == min).unwrap().sign;
    Ok(if sign > 0 { Comparison::Less } else { Comparison::Greater })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::braid::{braid_equal, random_word, BraidWord, DynnikovState};

    fn word(n: usize, s: &str) -> BraidWord {
        BraidWord::parse(s, n).unwrap()
    }

    fn cfg() -> HandleConfig {
        HandleConfig::default()
    }

    #[test]
    fn free_reduce_examples() {
        assert!(free_reduce_word(&word(2, "s1S1")).is_empty());
        assert_eq!(free_reduce_word(&word(3, "s2s1S1s2")), word(3, "s2s2"));
        let w = free_reduce_word(&word(4, "s1s2S2S1s3"));
        assert_eq!(free_reduce_word(&w), w);
    }

    #[test]
    fn handle_reduce_examples() {
        assert!(handle_reduce(&word(2, "s1S1"), &cfg()).unwrap().is_empty());
        // The defining rewrite of a sigma_1 handle enclosing sigma_2.
        let out = handle_reduce(&word(3, "s1s2S1"), &cfg()).unwrap();
        assert_eq!(out, word(3, "S2s1s2"));
        assert!(braid_equal(&out, &word(3, "s1s2S1")).unwrap());
    }

    #[test]
    fn handle_reduce_output_is_definite_and_same_class() {
        for seed in 0..100 {
            let n = 2 + (seed as usize % 5);
            let w = random_word(n, 40, seed);
            let out = handle_reduce(&w, &cfg()).unwrap();
            assert!(braid_equal(&w, &out).unwrap(), "class changed (seed {seed})");
            // Free-reduced and handle-free: definite sign at the lowest index.
            assert_eq!(free_reduce(out.letters()).len(), out.len());
            if let Some(min) = out.letters().iter().map(|g| g.index).min() {
                let signs: Vec<i8> =
                    out.letters().iter().filter(|g| g.index == min).map(|g| g.sign).collect();
                assert!(signs.windows(2).all(|p| p[0] == p[1]), "mixed main-letter signs");
            }
        }
    }

    #[test]
    fn word_times_inverse_reduces_to_empty() {
        for seed in 0..500 {
            let n = 2 + (seed as usize % 5);
            let w = random_word(n, 30, seed);
            let prod = w.concat(&w.inverse()).unwrap();
            assert!(handle_reduce(&prod, &cfg()).unwrap().is_empty(), "seed {seed}");
        }
    }

    #[test]
    fn both_strategies_reach_definite_forms() {
        let lr = HandleConfig { strategy: Strategy::LeftToRight, ..cfg() };
        for seed in 200..260 {
            let w = random_word(4, 30, seed);
            let a = handle_reduce(&w, &cfg()).unwrap();
            let b = handle_reduce(&w, &lr).unwrap();
            assert!(braid_equal(&a, &b).unwrap());
            assert_eq!(definite_sign(&a).map(i8::signum), definite_sign(&b).map(i8::signum));
        }
    }

    #[test]
    fn compare_examples() {
        let w = word(3, "s1s2S1");
        assert_eq!(dehornoy_compare(&w, &w, &cfg()).unwrap(), Comparison::Equal);
        assert_eq!(
            dehornoy_compare(&BraidWord::identity(2), &word(2, "s1"), &cfg()).unwrap(),
            Comparison::Less
        );
        assert_eq!(
            dehornoy_compare(&word(2, "s1"), &BraidWord::identity(2), &cfg()).unwrap(),
            Comparison::Greater
        );
    }

    #[test]
    fn compare_agrees_with_dynnikov_equality() {
        for seed in 0..500u64 {
            let n = 2 + (seed as usize % 5);
            let w1 = random_word(n, 30, seed.wrapping_mul(2));
            let w2 = random_word(n, 30, seed.wrapping_mul(2) + 1);
            let eq = braid_equal(&w1, &w2).unwrap();
            let ord = dehornoy_compare(&w1, &w2, &cfg()).unwrap();
            assert_eq!(eq, ord == Comparison::Equal, "seed {seed}");
        }
    }

    #[test]
    fn order_is_antisymmetric_and_transitive() {
        let flip = |c: Comparison| match c {
            Comparison::Less => Comparison::Greater,
            Comparison::Greater => Comparison::Less,
            Comparison::Equal => Comparison::Equal,
        };
        for seed in 0..60u64 {
            let n = 2 + (seed as usize % 4);
            let ws: Vec<BraidWord> =
                (0..3).map(|k| random_word(n, 20 + (seed as usize % 40), seed * 3 + k)).collect();
            for a in 0..3 {
                for b in 0..3 {
                    let ab = dehornoy_compare(&ws[a], &ws[b], &cfg()).unwrap();
                    let ba = dehornoy_compare(&ws[b], &ws[a], &cfg()).unwrap();
                    assert_eq!(ab, flip(ba));
                    for c in 0..3 {
                        let bc = dehornoy_compare(&ws[b], &ws[c], &cfg()).unwrap();
                        let ac = dehornoy_compare(&ws[a], &ws[c], &cfg()).unwrap();
                        if ab == Comparison::Less && bc == Comparison::Less {
                            assert_eq!(ac, Comparison::Less);
                        }
                        if ab == Comparison::Equal && bc == Comparison::Equal {
                            assert_eq!(ac, Comparison::Equal);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn handle_reduction_preserves_dynnikov_state() {
        for seed in 0..100 {
            let n = 2 + (seed as usize % 5);
            let w = random_word(n, 50, seed + 7000);
            let out = handle_reduce(&w, &cfg()).unwrap();
            let u = DynnikovState::identity(n).unwrap();
            assert_eq!(u.apply_word(&w).unwrap(), u.apply_word(&out).unwrap());
        }
    }

    #[test]
    fn tiny_budget_is_reported() {
        let tight = HandleConfig { step_budget: 1, ..cfg() };
        // Needs two rewrites: each sigma_1 pair brackets a sigma_2.
        let w = word(3, "s1s1s2S1S1");
        let mut saw_budget_error = false;
        if let Err(DehornoyError::BudgetExhausted { budget }) = handle_reduce(&w, &tight) {
            saw_budget_error = budget == 1;
        }
        assert!(saw_budget_error);
        assert!(handle_reduce(&w, &cfg()).is_ok());
    }
}
