//! From grid motion to braid generators.
//!
//! Every strand (obstacle representative or agent) carries the exact
//! integer order key of its cell. During one unit timestep positions
//! interpolate linearly, so keys are linear in time and two strands swap
//! order at an exact rational instant. Sweeping those swap events in time
//! order yields the braid generators of the step: generator index = the
//! rank of the lower-keyed strand at the crossing, sign positive when the
//! left strand passes below (the counterclockwise swap).
//!
//! All event arithmetic is integer-exact; denominators stay bounded by
//! twice the key scale.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::braid::{BraidWord, DynnikovState, Generator};
use crate::map::{Cell, GridMap};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("strands {0} and {1} coincide at an integer time")]
    InvalidConfig(usize, usize),
    #[error("strand {strand} moves ({from:?} -> {to:?}) by more than one 4-neighbor edge")]
    NonUnitMove { strand: usize, from: (i64, i64), to: (i64, i64) },
    #[error("invalid solution: {0}")]
    InvalidSolution(String),
    #[error(transparent)]
    Braid(#[from] crate::braid::BraidError),
}

/// Linear motion of one strand over a unit timestep, in key/row space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrandMotion {
    pub key0: i64,
    pub key1: i64,
    pub row0: i64,
    pub row1: i64,
}

impl StrandMotion {
    pub fn stationary(key: i64, row: i64) -> Self {
        StrandMotion { key0: key, key1: key, row0: row, row1: row }
    }

    fn moves(&self) -> bool {
        self.key0 != self.key1
    }
}

/// One detected order swap: the crossing instant as an exact fraction,
/// the generator index (rank of the lower-keyed strand when processed),
/// and the crossing sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapEvent {
    pub time_num: i64,
    pub time_den: i64,
    pub index: usize,
    pub sign: i8,
}

/// An undispatched crossing between strands `a` (lower key before the
/// crossing) and `b`.
#[derive(Debug, Clone, Copy)]
struct Crossing {
    tn: i64,
    td: i64,
    a: usize,
    b: usize,
    sign: i8,
}

fn time_cmp(x: &Crossing, y: &Crossing) -> std::cmp::Ordering {
    (x.tn as i128 * y.td as i128).cmp(&(y.tn as i128 * x.td as i128))
}

/// Crossing of two strand motions, if their key order differs at the two
/// endpoints. Assumes distinct keys at both integer times.
fn crossing_of(sa: usize, sb: usize, ma: &StrandMotion, mb: &StrandMotion) -> Option<Crossing> {
    let before = ma.key0 < mb.key0;
    let after = ma.key1 < mb.key1;
    if before == after {
        return None;
    }
    // Identify the strand that is left before the crossing.
    let (a, b, la, lb) = if before { (sa, sb, ma, mb) } else { (sb, sa, mb, ma) };
    let g0 = lb.key0 - la.key0; // > 0
    let g1 = lb.key1 - la.key1; // < 0
    let (tn, td) = (g0, g0 - g1);
    debug_assert!(tn > 0 && tn < td);
    // Row comparison at the crossing instant: rows are linear too, so the
    // difference sign is (dr0 * td + (dr1 - dr0) * tn).
    let dr0 = la.row0 - lb.row0;
    let dr1 = la.row1 - lb.row1;
    let delta = dr0 as i128 * td as i128 + (dr1 - dr0) as i128 * tn as i128;
    debug_assert!(delta != 0, "strands coincide mid-step");
    let sign = if delta < 0 { 1 } else { -1 };
    Some(Crossing { tn, td, a, b, sign })
}

fn check_distinct_keys(motions: &[StrandMotion]) -> Result<(), TraceError> {
    let mut seen0: Vec<(i64, usize)> = motions.iter().enumerate().map(|(i, m)| (m.key0, i)).collect();
    seen0.sort();
    for w in seen0.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(TraceError::InvalidConfig(w[0].1, w[1].1));
        }
    }
    let mut seen1: Vec<(i64, usize)> = motions.iter().enumerate().map(|(i, m)| (m.key1, i)).collect();
    seen1.sort();
    for w in seen1.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(TraceError::InvalidConfig(w[0].1, w[1].1));
        }
    }
    Ok(())
}

/// Dispatches time-sorted crossings through a rank array, producing
/// generators. Simultaneous crossings are applied in an order that keeps
/// every applied pair rank-adjacent, smallest rank first; any such order
/// gives the same braid.
fn dispatch(
    order0: &[usize],
    mut crossings: Vec<Crossing>,
    mut emit: impl FnMut(&Crossing, usize),
) -> Result<(), TraceError> {
    if crossings.is_empty() {
        return Ok(());
    }
    crossings.sort_by(|x, y| time_cmp(x, y).then_with(|| (x.a, x.b).cmp(&(y.a, y.b))));
    let m = order0.len();
    let mut rank_of = vec![0usize; m];
    for (r, &s) in order0.iter().enumerate() {
        rank_of[s] = r;
    }
    let mut i = 0;
    while i < crossings.len() {
        let mut j = i + 1;
        while j < crossings.len() && time_cmp(&crossings[i], &crossings[j]).is_eq() {
            j += 1;
        }
        let mut pending: Vec<Crossing> = crossings[i..j].to_vec();
        while !pending.is_empty() {
            let mut pick: Option<usize> = None;
            let mut pick_rank = usize::MAX;
            for (idx, c) in pending.iter().enumerate() {
                let (ra, rb) = (rank_of[c.a], rank_of[c.b]);
                if ra + 1 == rb && ra < pick_rank {
                    pick = Some(idx);
                    pick_rank = ra;
                }
            }
            let Some(idx) = pick else {
                return Err(TraceError::InvalidSolution(
                    "simultaneous crossings never became rank-adjacent".into(),
                ));
            };
            let c = pending.swap_remove(idx);
            emit(&c, pick_rank + 1);
            rank_of.swap(c.a, c.b);
        }
        i = j;
    }
    Ok(())
}

/// The full swap-event list of one step over all strands, in dispatch
/// order with exact times.
pub fn swap_events(motions: &[StrandMotion]) -> Result<Vec<SwapEvent>, TraceError> {
    check_distinct_keys(motions)?;
    let mut crossings = Vec::new();
    for a in 0..motions.len() {
        for b in a + 1..motions.len() {
            if !(motions[a].moves() || motions[b].moves()) {
                continue;
            }
            if let Some(c) = crossing_of(a, b, &motions[a], &motions[b]) {
                crossings.push(c);
            }
        }
    }
    let mut order0: Vec<usize> = (0..motions.len()).collect();
    order0.sort_by_key(|&s| motions[s].key0);
    let mut events = Vec::new();
    dispatch(&order0, crossings, |c, index| {
        let g = gcd(c.tn, c.td);
        events.push(SwapEvent { time_num: c.tn / g, time_den: c.td / g, index, sign: c.sign });
    })?;
    Ok(events)
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Generators of one step, without event times.
pub fn step_generators(motions: &[StrandMotion]) -> Result<Vec<Generator>, TraceError> {
    Ok(swap_events(motions)?
        .into_iter()
        .map(|e| Generator { index: e.index, sign: e.sign })
        .collect())
}

/// One step of background strands (obstacles plus already-planned agents)
/// with its internal crossings precomputed, so that a search can cheaply
/// ask for the generator sequence with one extra moving agent inserted.
#[derive(Debug, Clone)]
pub struct BackgroundStep {
    motions: Vec<StrandMotion>,
    order0: Vec<usize>,
    crossings: Vec<Crossing>,
}

impl BackgroundStep {
    pub fn new(motions: Vec<StrandMotion>) -> Result<Self, TraceError> {
        check_distinct_keys(&motions)?;
        let movers: Vec<usize> = (0..motions.len()).filter(|&s| motions[s].moves()).collect();
        let mut crossings = Vec::new();
        for (mi, &a) in movers.iter().enumerate() {
            for b in 0..motions.len() {
                if movers[..=mi].contains(&b) {
                    continue;
                }
                if let Some(c) = crossing_of(a, b, &motions[a], &motions[b]) {
                    crossings.push(c);
                }
            }
        }
        let mut order0: Vec<usize> = (0..motions.len()).collect();
        order0.sort_by_key(|&s| motions[s].key0);
        Ok(BackgroundStep { motions, order0, crossings })
    }

    pub fn strands(&self) -> usize {
        self.motions.len()
    }

    pub fn has_events(&self) -> bool {
        !self.crossings.is_empty()
    }

    /// Generators of the step with the extra agent strand appended as id
    /// `self.strands()`.
    pub fn generators_with_agent(&self, agent: StrandMotion) -> Result<Vec<Generator>, TraceError> {
        let aid = self.motions.len();
        let mut crossings = self.crossings.clone();
        for (b, m) in self.motions.iter().enumerate() {
            if agent.key0 == m.key0 || agent.key1 == m.key1 {
                return Err(TraceError::InvalidConfig(aid, b));
            }
            if let Some(c) = crossing_of(aid, b, &agent, m) {
                crossings.push(c);
            }
        }
        let mut order0 = Vec::with_capacity(aid + 1);
        let mut inserted = false;
        for &s in &self.order0 {
            if !inserted && agent.key0 < self.motions[s].key0 {
                order0.push(aid);
                inserted = true;
            }
            order0.push(s);
        }
        if !inserted {
            order0.push(aid);
        }
        let mut gens = Vec::new();
        dispatch(&order0, crossings, |c, index| {
            gens.push(Generator { index, sign: c.sign });
        })?;
        Ok(gens)
    }

    /// Generators of the background step alone.
    pub fn generators(&self) -> Result<Vec<Generator>, TraceError> {
        let mut gens = Vec::new();
        dispatch(&self.order0, self.crossings.clone(), |c, index| {
            gens.push(Generator { index, sign: c.sign });
        })?;
        Ok(gens)
    }
}

fn motion_of_cells(map: &GridMap, from: Cell, to: Cell, strand: usize) -> Result<StrandMotion, TraceError> {
    let (dc, dr) = (to.col as i64 - from.col as i64, to.row as i64 - from.row as i64);
    if dc.abs() + dr.abs() > 1 {
        return Err(TraceError::NonUnitMove {
            strand,
            from: (from.col as i64, from.row as i64),
            to: (to.col as i64, to.row as i64),
        });
    }
    Ok(StrandMotion {
        key0: map.order_key(from).0,
        key1: map.order_key(to).0,
        row0: from.row as i64,
        row1: to.row as i64,
    })
}

/// Position along a timed path, resting at the final cell.
pub fn position(path: &[Cell], t: usize) -> Cell {
    path[t.min(path.len() - 1)]
}

/// Checks vertex conflicts, swap conflicts, unit moves, and map validity
/// for a set of timed paths.
pub fn check_conflict_free(map: &GridMap, paths: &[Vec<Cell>]) -> Result<(), TraceError> {
    let horizon = paths.iter().map(Vec::len).max().unwrap_or(0);
    for (i, p) in paths.iter().enumerate() {
        if p.is_empty() {
            return Err(TraceError::InvalidSolution(format!("agent {i} has an empty path")));
        }
        for c in p {
            if !map.is_free(*c) {
                return Err(TraceError::InvalidSolution(format!(
                    "agent {i} visits blocked or out-of-bounds cell ({}, {})",
                    c.col, c.row
                )));
            }
        }
        for t in 0..p.len().saturating_sub(1) {
            motion_of_cells(map, p[t], p[t + 1], i)?;
        }
    }
    for t in 0..horizon {
        for i in 0..paths.len() {
            for j in i + 1..paths.len() {
                let (pi, pj) = (position(&paths[i], t), position(&paths[j], t));
                if pi == pj {
                    return Err(TraceError::InvalidSolution(format!(
                        "vertex conflict between agents {i} and {j} at t={t}"
                    )));
                }
                if t + 1 < horizon {
                    let (ni, nj) = (position(&paths[i], t + 1), position(&paths[j], t + 1));
                    if pi == nj && pj == ni && pi != ni {
                        return Err(TraceError::InvalidSolution(format!(
                            "swap conflict between agents {i} and {j} at t={t}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// The braid of a complete solution over `r + n` strands (obstacle
/// representatives first by construction of the rank order, then agents;
/// strand identity is by initial key rank).
#[derive(Debug, Clone)]
pub struct SolutionBraid {
    pub strands: usize,
    pub word: BraidWord,
    /// `None` exactly when there are fewer than two strands.
    pub state: Option<DynnikovState>,
}

impl SolutionBraid {
    pub fn word_string(&self) -> String {
        self.word.to_string()
    }

    pub fn state_line(&self) -> String {
        match &self.state {
            Some(s) => s.serialize(),
            None => "1".to_string(),
        }
    }
}

/// Concatenates per-step swap events over a whole solution, with obstacle
/// representatives as static strands.
pub fn solution_braid(map: &GridMap, paths: &[Vec<Cell>]) -> Result<SolutionBraid, TraceError> {
    check_conflict_free(map, paths)?;
    let reps: Vec<Cell> = map.components().iter().map(|c| c.representative).collect();
    let m = reps.len() + paths.len();
    let horizon = paths.iter().map(Vec::len).max().unwrap_or(1);
    let mut state = if m >= 2 { Some(DynnikovState::identity(m)?) } else { None };
    let mut word = BraidWord::identity(m);
    for t in 0..horizon.saturating_sub(1) {
        let mut motions = Vec::with_capacity(m);
        for rep in &reps {
            motions.push(StrandMotion::stationary(map.order_key(*rep).0, rep.row as i64));
        }
        for (i, p) in paths.iter().enumerate() {
            motions.push(motion_of_cells(map, position(p, t), position(p, t + 1), reps.len() + i)?);
        }
        for g in step_generators(&motions)? {
            word.push(g)?;
            if let Some(s) = state.as_mut() {
                s.apply_mut(g)?;
            }
        }
    }
    Ok(SolutionBraid { strands: m, word, state })
}

/// 1-based rank of agent `idx`'s start among all strand anchors (obstacle
/// representatives plus the first `agents_upto` starts). This is the strand
/// position the agent's motion begins at.
pub fn initial_rank_of_agent(map: &GridMap, starts: &[Cell], agents_upto: usize, idx: usize) -> usize {
    let key = map.order_key(starts[idx]).0;
    let mut rank = 1;
    for c in map.components() {
        if map.order_key(c.representative).0 < key {
            rank += 1;
        }
    }
    for s in &starts[..agents_upto] {
        if map.order_key(*s).0 < key {
            rank += 1;
        }
    }
    rank
}

/// JSON form of a solution: per-agent list of (column, row) per timestep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionJson {
    pub paths: Vec<Vec<Cell>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::braid::braid_equal;

    fn cells(spec: &[(u32, u32)]) -> Vec<Cell> {
        spec.iter().map(|&(c, r)| Cell::new(c, r)).collect()
    }

    /// Three-agent solution on an empty 4x3 grid tracing the clockwise /
    /// counterclockwise / clockwise swap sequence.
    pub(crate) fn fixture_swaps_cw_ccw_cw() -> (GridMap, Vec<Vec<Cell>>) {
        let map = GridMap::empty(4, 3);
        let a1 = cells(&[(0, 0), (0, 0), (1, 0), (1, 0), (2, 0), (2, 1), (2, 2), (3, 2)]);
        let a2 = cells(&[(0, 2), (1, 2), (1, 2), (2, 2), (2, 2), (3, 2), (3, 1), (3, 1)]);
        let a3 = cells(&[(1, 1); 8]);
        (map, vec![a1, a2, a3])
    }

    /// The mirror solution: counterclockwise / clockwise / counterclockwise.
    pub(crate) fn fixture_swaps_ccw_cw_ccw() -> (GridMap, Vec<Vec<Cell>>) {
        let map = GridMap::empty(4, 3);
        let a1 = cells(&[
            (0, 2),
            (1, 2),
            (1, 2),
            (1, 1),
            (1, 0),
            (2, 0),
            (3, 0),
            (3, 0),
            (3, 0),
            (3, 0),
        ]);
        let a2 = cells(&[
            (1, 1),
            (1, 1),
            (0, 1),
            (0, 1),
            (0, 1),
            (0, 1),
            (0, 1),
            (0, 1),
            (1, 1),
            (2, 1),
        ]);
        let a3 = cells(&[
            (2, 1),
            (2, 1),
            (2, 1),
            (2, 1),
            (2, 1),
            (2, 1),
            (2, 1),
            (2, 0),
            (2, 0),
            (2, 0),
        ]);
        (map, vec![a1, a2, a3])
    }

    #[test]
    fn counterclockwise_pass_is_sigma1() {
        // Two agents rotate counterclockwise around a 2x2 block: the left
        // agent sweeps along the bottom.
        let map = GridMap::empty(2, 2);
        let paths = vec![cells(&[(0, 0), (1, 0)]), cells(&[(1, 1), (0, 1)])];
        let sb = solution_braid(&map, &paths).unwrap();
        assert_eq!(sb.word_string(), "s1");
    }

    #[test]
    fn clockwise_pass_is_sigma1_inverse() {
        // The mirror rotation: the left agent sweeps along the top.
        let map = GridMap::empty(2, 2);
        let paths = vec![
            cells(&[(0, 0), (0, 1), (1, 1)]),
            cells(&[(1, 1), (1, 0), (0, 0)]),
        ];
        let sb = solution_braid(&map, &paths).unwrap();
        assert_eq!(sb.word_string(), "S1");
    }

    #[test]
    fn all_waiting_gives_empty_events() {
        let map = GridMap::empty(4, 4);
        let motions = vec![
            StrandMotion::stationary(0, 0),
            StrandMotion::stationary(7, 2),
            StrandMotion::stationary(11, 1),
        ];
        assert!(swap_events(&motions).unwrap().is_empty());
        let paths = vec![cells(&[(0, 0); 5]), cells(&[(2, 2); 5])];
        let sb = solution_braid(&map, &paths).unwrap();
        assert!(sb.word.is_empty());
        assert!(sb.state.unwrap().is_identity());
    }

    #[test]
    fn first_block_of_cw_fixture_is_sigma2_inverse() {
        let (map, paths) = fixture_swaps_cw_ccw_cw();
        let motions: Vec<StrandMotion> = paths
            .iter()
            .map(|p| {
                StrandMotion {
                    key0: map.order_key(p[0]).0,
                    key1: map.order_key(p[1]).0,
                    row0: p[0].row as i64,
                    row1: p[1].row as i64,
                }
            })
            .collect();
        let events = swap_events(&motions).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!((events[0].index, events[0].sign), (2, -1));
        assert_eq!((events[0].time_num, events[0].time_den), (3, 4));
    }

    #[test]
    fn worked_three_agent_solutions() {
        let (map, paths) = fixture_swaps_cw_ccw_cw();
        let sb = solution_braid(&map, &paths).unwrap();
        assert_eq!(sb.word_string(), "S2s1S2");
        let st = sb.state.unwrap();
        assert_eq!(st.serialize(), "3 2 -1 -3 3");

        let (map, paths) = fixture_swaps_ccw_cw_ccw();
        let sb = solution_braid(&map, &paths).unwrap();
        assert_eq!(sb.word_string(), "S1s2S1");
    }

    #[test]
    fn obstacle_strand_shifts_indices() {
        // The same counterclockwise pass with an obstacle strand far to the
        // left: the obstacle occupies rank 1 and the agents swap at rank 2.
        let text = "type octile\nheight 2\nwidth 4\nmap\n@...\n....\n";
        let map = GridMap::parse(text).unwrap();
        assert_eq!(map.components().len(), 1);
        let paths = vec![cells(&[(1, 0), (2, 0)]), cells(&[(2, 1), (1, 1)])];
        let sb = solution_braid(&map, &paths).unwrap();
        assert_eq!(sb.strands, 3);
        assert_eq!(sb.word_string(), "s2");
    }

    #[test]
    fn background_step_matches_full_sweep() {
        let map = GridMap::empty(6, 6);
        // Background: one static, one mover; the agent crosses both.
        let bg = vec![
            StrandMotion::stationary(map.order_key(Cell::new(2, 3)).0, 3),
            StrandMotion {
                key0: map.order_key(Cell::new(3, 1)).0,
                key1: map.order_key(Cell::new(3, 0)).0,
                row0: 1,
                row1: 0,
            },
        ];
        let agent = StrandMotion {
            key0: map.order_key(Cell::new(2, 2)).0,
            key1: map.order_key(Cell::new(3, 2)).0,
            row0: 2,
            row1: 2,
        };
        let bgs = BackgroundStep::new(bg.clone()).unwrap();
        let merged = bgs.generators_with_agent(agent).unwrap();
        let mut all = bg;
        all.push(agent);
        let direct = step_generators(&all).unwrap();
        assert_eq!(merged.len(), 2);
        assert_eq!(merged, direct);
    }

    #[test]
    fn conflicting_solution_is_rejected() {
        let map = GridMap::empty(3, 3);
        // Vertex conflict at t=1.
        let paths = vec![cells(&[(0, 0), (1, 0)]), cells(&[(2, 0), (1, 0)])];
        assert!(matches!(
            solution_braid(&map, &paths),
            Err(TraceError::InvalidSolution(_))
        ));
        // Swap conflict.
        let paths = vec![cells(&[(0, 0), (1, 0)]), cells(&[(1, 0), (0, 0)])];
        assert!(matches!(
            solution_braid(&map, &paths),
            Err(TraceError::InvalidSolution(_))
        ));
        // Non-unit move.
        let paths = vec![cells(&[(0, 0), (2, 0)])];
        assert!(matches!(solution_braid(&map, &paths), Err(TraceError::NonUnitMove { .. })));
    }

    #[test]
    fn disjoint_simultaneous_events_commute() {
        // Two independent counterclockwise passes timed to cross at the
        // same instant; the dispatch order must not matter.
        let map = GridMap::empty(8, 2);
        let paths = vec![
            cells(&[(0, 0), (1, 0)]),
            cells(&[(1, 1), (0, 1)]),
            cells(&[(4, 0), (5, 0)]),
            cells(&[(5, 1), (4, 1)]),
        ];
        let sb = solution_braid(&map, &paths).unwrap();
        let w13 = BraidWord::parse("s1s3", 4).unwrap();
        let w31 = BraidWord::parse("s3s1", 4).unwrap();
        assert!(braid_equal(&sb.word, &w13).unwrap());
        assert!(braid_equal(&sb.word, &w31).unwrap());
    }

    #[test]
    fn triple_simultaneous_crossing_resolves() {
        // Three strands whose keys meet at the same instant: an x-mover, a
        // static strand, and an opposite x-mover. Reversal of all three.
        let map = GridMap::empty(4, 14);
        let paths = vec![
            cells(&[(0, 5), (1, 5)]),
            cells(&[(0, 10), (0, 10)]),
            cells(&[(1, 0), (0, 0)]),
        ];
        let sb = solution_braid(&map, &paths).unwrap();
        let perm = crate::braid::permutation(&sb.word);
        assert_eq!((perm.apply(1), perm.apply(2), perm.apply(3)), (3, 2, 1));
        // Both serializations of the triple point are the same braid.
        let alt = BraidWord::parse("s1S2S1", 3).unwrap();
        let direct = BraidWord::parse("S2S1s2", 3).unwrap();
        assert!(braid_equal(&sb.word, &alt).unwrap() || braid_equal(&sb.word, &direct).unwrap());
    }

    #[test]
    fn reversal_round_trip_is_identity() {
        let (map, paths) = fixture_swaps_cw_ccw_cw();
        let back: Vec<Vec<Cell>> = paths
            .iter()
            .map(|p| {
                let mut q = p.clone();
                let mut rev: Vec<Cell> = p.iter().rev().cloned().collect();
                q.append(&mut rev);
                q
            })
            .collect();
        let sb = solution_braid(&map, &back).unwrap();
        assert!(sb.state.unwrap().is_identity());
    }

    #[test]
    fn initial_rank_tracks_key_order() {
        let map = GridMap::empty(4, 3);
        let starts = cells(&[(0, 0), (0, 2), (1, 1)]);
        assert_eq!(initial_rank_of_agent(&map, &starts, 3, 0), 1);
        assert_eq!(initial_rank_of_agent(&map, &starts, 3, 1), 2);
        assert_eq!(initial_rank_of_agent(&map, &starts, 3, 2), 3);
        assert_eq!(initial_rank_of_agent(&map, &starts, 1, 0), 1);
    }
}
