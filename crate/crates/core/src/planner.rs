//! Homotopy-aware revised prioritized planning.
//!
//! Agents are planned one priority round at a time. A round runs a single
//! global best-first search whose nodes are `(plan, timed vertex, braid)`
//! triples: the braid is the label of everything that has moved so far
//! (obstacle strands, the already-planned agents replayed from their paths,
//! and the agent being planned), so two search nodes at the same timed
//! vertex are merged exactly when the partial solutions are homotopic.
//! Each round collects up to `K` plans with pairwise-distinct solution
//! braids; the next round continues from all of them in parallel under one
//! priority queue, popping the global minimum of
//! `cost(plan) + D + h`.
//!
//! The braid label is pluggable: Dynnikov coordinates (the fast path) or
//! free-reduced words ordered by handle reduction (the Dehornoy-order
//! baseline, kept only for benchmarking).

use std::cell::{Cell as StdCell, RefCell};
use std::collections::{BinaryHeap, BTreeMap, HashMap, HashSet};
use std::rc::Rc;
use std::str::FromStr;

use thiserror::Error;

use crate::braid::{BraidError, BraidWord, DynnikovState, Generator};
use crate::dehornoy::{compare_quotient_letters, Comparison, DehornoyError, HandleConfig};
use crate::map::{Cell, GridMap, Instance, MapError};
use crate::trace::{position, BackgroundStep, StrandMotion, TraceError};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Braid(#[from] BraidError),
    #[error("goal of agent {0} is unreachable from its start")]
    GoalUnreachable(usize),
    #[error("no plan survived the round for agent {agent} (horizon {horizon})")]
    RoundFailed { agent: usize, horizon: u32 },
    #[error("target braid has {got} strands, instance needs {want}")]
    TargetStrandMismatch { got: usize, want: usize },
    #[error("target braid is in the wrong coset: its permutation does not match the start/goal key order")]
    CosetMismatch,
    #[error("no plan with the target braid found for agent {agent} within horizon {horizon}")]
    TargetNotFound { agent: usize, horizon: u32 },
    #[error(transparent)]
    Dehornoy(#[from] DehornoyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Dynnikov,
    Dehornoy,
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dynnikov" | "dyn" => Ok(Engine::Dynnikov),
            "dehornoy" | "hr" => Ok(Engine::Dehornoy),
            other => Err(format!("unknown engine '{other}' (expected dynnikov or dehornoy)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlannerConfig {
    pub k: usize,
    pub horizon: Option<u32>,
    pub engine: Engine,
    pub handle: HandleConfig,
    /// Record the sequence of popped f-values (test instrumentation).
    pub record_pops: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            k: 1,
            horizon: None,
            engine: Engine::Dynnikov,
            handle: HandleConfig::default(),
            record_pops: false,
        }
    }
}

/// One finished multi-agent plan.
#[derive(Debug, Clone)]
pub struct Plan {
    /// Timed vertex path per agent; the agent rests at the final cell.
    pub paths: Vec<Vec<Cell>>,
    /// Sum over agents of the time from which each rests at its goal.
    pub cost: u64,
    /// Braid of the full solution over `r + n` strands.
    pub braid_word: BraidWord,
    /// Dynnikov state of the word; `None` when there are fewer than two
    /// strands.
    pub braid_state: Option<DynnikovState>,
}

#[derive(Debug, Clone, Default)]
pub struct RoundStats {
    pub agent: usize,
    pub nodes_created: u64,
    pub popped: u64,
    pub comparisons: u64,
    pub label_updates: u64,
    pub plans_found: usize,
    /// Natural log of the largest coordinate magnitude over the round's
    /// solution braids (Dynnikov engine only).
    pub max_coord_ln: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug)]
pub struct PlannerOutput {
    pub plans: Vec<Plan>,
    pub rounds: Vec<RoundStats>,
    pub warnings: Vec<String>,
    /// Popped f-values per round, when requested.
    pub pop_trace: Option<Vec<Vec<u64>>>,
}

thread_local! {
    static CMP_COUNT: StdCell<u64> = const { StdCell::new(0) };
    static UPD_COUNT: StdCell<u64> = const { StdCell::new(0) };
    static HR_ID: StdCell<u64> = const { StdCell::new(0) };
    static HR_BUDGET_HIT: StdCell<bool> = const { StdCell::new(false) };
    static HR_CONFIG: StdCell<HandleConfig> = StdCell::new(HandleConfig::default());
    static HR_MEMO: RefCell<HashMap<(u64, u64), std::cmp::Ordering>> =
        RefCell::new(HashMap::new());
}

fn bump(counter: &'static std::thread::LocalKey<StdCell<u64>>) {
    counter.with(|c| c.set(c.get() + 1));
}

fn counter_snapshot() -> (u64, u64) {
    (CMP_COUNT.with(StdCell::get), UPD_COUNT.with(StdCell::get))
}

/// Natural log of a big integer's magnitude (0 maps to 0).
pub fn ln_big(x: &num_bigint::BigInt) -> f64 {
    use num_traits::{Signed, ToPrimitive, Zero};
    let a = x.abs();
    if a.is_zero() {
        return 0.0;
    }
    let bits = a.bits();
    if bits <= 52 {
        a.to_f64().unwrap().ln()
    } else {
        let shifted = (&a >> (bits - 52)).to_f64().unwrap();
        shifted.ln() + (bits - 52) as f64 * std::f64::consts::LN_2
    }
}

/// The braid label a search node carries.
trait Label: Clone + Ord {
    fn identity(strands: usize) -> Self;
    fn apply(&self, gens: &[Generator]) -> Self;
    fn word(&self) -> Vec<Generator>;
    fn dynnikov(&self, strands: usize) -> Option<DynnikovState>;
    /// Coordinates for statistics only; engines that would have to compute
    /// them from scratch return `None` so metrics do not distort timings.
    fn dynnikov_for_stats(&self, strands: usize) -> Option<DynnikovState>;
}

// ---------------------------------------------------------------------------
// Dynnikov-coordinate label
// ---------------------------------------------------------------------------

/// `None` when the round has fewer than two strands (the group is trivial).
#[derive(Debug, Clone)]
struct DynLabel {
    state: Rc<Option<DynnikovState>>,
    word: Rc<WordChain>,
}

#[derive(Debug)]
struct WordChain {
    gens: Vec<Generator>,
    parent: Option<Rc<WordChain>>,
}

impl WordChain {
    fn root() -> Rc<Self> {
        Rc::new(WordChain { gens: Vec::new(), parent: None })
    }

    fn collect(self: &Rc<Self>) -> Vec<Generator> {
        let mut segments = Vec::new();
        let mut cur = Some(self.clone());
        while let Some(node) = cur {
            if !node.gens.is_empty() {
                segments.push(node.gens.clone());
            }
            cur = node.parent.clone();
        }
        segments.reverse();
        segments.concat()
    }
}

impl PartialEq for DynLabel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for DynLabel {}

impl PartialOrd for DynLabel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DynLabel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        bump(&CMP_COUNT);
        if Rc::ptr_eq(&self.state, &other.state) {
            return std::cmp::Ordering::Equal;
        }
        self.state.cmp(&other.state)
    }
}

impl Label for DynLabel {
    fn identity(strands: usize) -> Self {
        let state = if strands >= 2 {
            Some(DynnikovState::identity(strands).expect("strands >= 2"))
        } else {
            None
        };
        DynLabel { state: Rc::new(state), word: WordChain::root() }
    }

    fn apply(&self, gens: &[Generator]) -> Self {
        if gens.is_empty() {
            return self.clone();
        }
        bump(&UPD_COUNT);
        let state = match self.state.as_ref() {
            Some(s) => {
                let mut next = s.clone();
                for g in gens {
                    next.apply_mut(*g).expect("generator in range");
                }
                Some(next)
            }
            None => None,
        };
        DynLabel {
            state: Rc::new(state),
            word: Rc::new(WordChain { gens: gens.to_vec(), parent: Some(self.word.clone()) }),
        }
    }

    fn word(&self) -> Vec<Generator> {
        self.word.collect()
    }

    fn dynnikov(&self, _strands: usize) -> Option<DynnikovState> {
        self.state.as_ref().clone()
    }

    fn dynnikov_for_stats(&self, _strands: usize) -> Option<DynnikovState> {
        self.state.as_ref().clone()
    }
}

// ---------------------------------------------------------------------------
// Dehornoy-order label (benchmark baseline)
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct HrChain {
    gens: Vec<Generator>,
    parent: Option<Rc<HrChain>>,
    depth: u32,
    id: u64,
}

#[derive(Debug, Clone)]
struct HrLabel {
    chain: Rc<HrChain>,
}

fn hr_fresh_id() -> u64 {
    HR_ID.with(|c| {
        let v = c.get() + 1;
        c.set(v);
        v
    })
}

impl HrLabel {
    fn suffix_from(&self, ancestor: &Rc<HrChain>) -> Vec<Generator> {
        let mut segments = Vec::new();
        let mut cur = self.chain.clone();
        while !Rc::ptr_eq(&cur, ancestor) {
            segments.push(cur.gens.clone());
            cur = cur.parent.clone().expect("ancestor is on the chain");
        }
        segments.reverse();
        segments.concat()
    }
}

impl PartialEq for HrLabel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for HrLabel {}

impl PartialOrd for HrLabel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HrLabel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        bump(&CMP_COUNT);
        if Rc::ptr_eq(&self.chain, &other.chain) {
            return std::cmp::Ordering::Equal;
        }
        let key = if self.chain.id < other.chain.id {
            (self.chain.id, other.chain.id)
        } else {
            (other.chain.id, self.chain.id)
        };
        let flip = self.chain.id > other.chain.id;
        if let Some(cached) = HR_MEMO.with(|m| m.borrow().get(&key).copied()) {
            return if flip { cached.reverse() } else { cached };
        }
        // Strip the common ancestor, then order the quotient word by
        // handle reduction.
        let (mut a, mut b) = (self.chain.clone(), other.chain.clone());
        while a.depth > b.depth {
            a = a.parent.clone().expect("depth counts ancestors");
        }
        while b.depth > a.depth {
            b = b.parent.clone().expect("depth counts ancestors");
        }
        while !Rc::ptr_eq(&a, &b) {
            a = a.parent.clone().expect("chains share a root");
            b = b.parent.clone().expect("chains share a root");
        }
        let sa = self.suffix_from(&a);
        let sb = other.suffix_from(&a);
        let mut quotient: Vec<Generator> = sa.iter().rev().map(|g| g.inverse()).collect();
        quotient.extend_from_slice(&sb);
        let cfg = HR_CONFIG.with(StdCell::get);
        let ord = match compare_quotient_letters(&quotient, &cfg) {
            Ok(Comparison::Less) => std::cmp::Ordering::Less,
            Ok(Comparison::Equal) => std::cmp::Ordering::Equal,
            Ok(Comparison::Greater) => std::cmp::Ordering::Greater,
            Err(DehornoyError::BudgetExhausted { .. }) => {
                HR_BUDGET_HIT.with(|f| f.set(true));
                // The search aborts as soon as the flag is seen; the value
                // returned here is never trusted.
                self.chain.id.cmp(&other.chain.id)
            }
            Err(_) => unreachable!("quotient letters share a strand count"),
        };
        let canonical = if flip { ord.reverse() } else { ord };
        HR_MEMO.with(|m| m.borrow_mut().insert(key, canonical));
        if flip {
            canonical.reverse()
        } else {
            canonical
        }
    }
}

impl Label for HrLabel {
    fn identity(_strands: usize) -> Self {
        HrLabel {
            chain: Rc::new(HrChain { gens: Vec::new(), parent: None, depth: 0, id: hr_fresh_id() }),
        }
    }

    fn apply(&self, gens: &[Generator]) -> Self {
        if gens.is_empty() {
            return self.clone();
        }
        bump(&UPD_COUNT);
        HrLabel {
            chain: Rc::new(HrChain {
                gens: gens.to_vec(),
                parent: Some(self.chain.clone()),
                depth: self.chain.depth + 1,
                id: hr_fresh_id(),
            }),
        }
    }

    fn word(&self) -> Vec<Generator> {
        let mut segments = Vec::new();
        let mut cur = Some(self.chain.clone());
        while let Some(node) = cur {
            if !node.gens.is_empty() {
                segments.push(node.gens.clone());
            }
            cur = node.parent.clone();
        }
        segments.reverse();
        segments.concat()
    }

    fn dynnikov(&self, strands: usize) -> Option<DynnikovState> {
        if strands < 2 {
            return None;
        }
        let mut state = DynnikovState::identity(strands).expect("strands >= 2");
        for g in self.word() {
            state.apply_mut(g).expect("generator in range");
        }
        Some(state)
    }

    fn dynnikov_for_stats(&self, _strands: usize) -> Option<DynnikovState> {
        None
    }
}

// ---------------------------------------------------------------------------
// Round machinery
// ---------------------------------------------------------------------------

/// Per-parent-plan context for one round.
struct PlanCtx {
    paths: Vec<Vec<Cell>>,
    cost: u64,
    /// Time from which every parent agent rests.
    t_rest: u32,
    /// Earliest time the current agent may settle on its goal.
    t_settle: u32,
    /// Background step sweeps for t in 0..t_rest, then a static one.
    backgrounds: Vec<BackgroundStep>,
    static_background: BackgroundStep,
    /// Occupancy by parents at each t in 0..=t_rest.
    occupancy: Vec<HashMap<Cell, usize>>,
}

impl PlanCtx {
    fn background(&self, t: u32) -> &BackgroundStep {
        if (t as usize) < self.backgrounds.len() {
            &self.backgrounds[t as usize]
        } else {
            &self.static_background
        }
    }

    fn occupied(&self, c: Cell, t: u32) -> Option<usize> {
        let idx = (t as usize).min(self.occupancy.len() - 1);
        self.occupancy[idx].get(&c).copied()
    }
}

fn build_plan_ctx(
    map: &GridMap,
    reps: &[Cell],
    paths: Vec<Vec<Cell>>,
    cost: u64,
    goal: Cell,
) -> Result<PlanCtx, PlanError> {
    let t_rest = paths.iter().map(|p| p.len() as u32 - 1).max().unwrap_or(0);
    let t_settle = settle_time(&paths, goal);
    let mut backgrounds = Vec::with_capacity(t_rest as usize);
    for t in 0..t_rest {
        let mut motions = Vec::with_capacity(reps.len() + paths.len());
        for rep in reps {
            motions.push(StrandMotion::stationary(map.order_key(*rep).0, rep.row as i64));
        }
        for p in &paths {
            let (from, to) = (position(p, t as usize), position(p, t as usize + 1));
            motions.push(StrandMotion {
                key0: map.order_key(from).0,
                key1: map.order_key(to).0,
                row0: from.row as i64,
                row1: to.row as i64,
            });
        }
        backgrounds.push(BackgroundStep::new(motions)?);
    }
    let mut static_motions = Vec::with_capacity(reps.len() + paths.len());
    for rep in reps {
        static_motions.push(StrandMotion::stationary(map.order_key(*rep).0, rep.row as i64));
    }
    for p in &paths {
        let c = position(p, t_rest as usize);
        static_motions.push(StrandMotion::stationary(map.order_key(c).0, c.row as i64));
    }
    let static_background = BackgroundStep::new(static_motions)?;
    let mut occupancy = Vec::with_capacity(t_rest as usize + 1);
    for t in 0..=t_rest {
        let mut occ = HashMap::new();
        for (idx, p) in paths.iter().enumerate() {
            occ.insert(position(p, t as usize), idx);
        }
        occupancy.push(occ);
    }
    if occupancy.is_empty() {
        occupancy.push(HashMap::new());
    }
    Ok(PlanCtx { paths, cost, t_rest, t_settle, backgrounds, static_background, occupancy })
}

struct Node<L> {
    plan: u16,
    cell: Cell,
    t: u32,
    label: L,
    parent: u32,
    d: u32,
    closed: bool,
}

#[derive(PartialEq, Eq)]
struct OpenEntry {
    f: u64,
    d: u32,
    plan: u16,
    vkey: i64,
    seq: u64,
    node: u32,
}

impl Ord for OpenEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap: invert so that the smallest f pops
        // first; ties prefer the deeper node, then plan id, then key order.
        other
            .f
            .cmp(&self.f)
            .then_with(|| self.d.cmp(&other.d))
            .then_with(|| other.plan.cmp(&self.plan))
            .then_with(|| other.vkey.cmp(&self.vkey))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

enum RoundMode<L> {
    /// Collect up to K plans with pairwise-distinct solution braids.
    Collect { k: usize },
    /// Collect exactly the plan whose solution braid equals the target.
    Targeted { target: L },
}

struct SurvivingPlan<L> {
    paths: Vec<Vec<Cell>>,
    cost: u64,
    label: L,
    word: Vec<Generator>,
}

struct RoundResult<L> {
    plans: Vec<SurvivingPlan<L>>,
    stats: RoundStats,
    pops: Vec<u64>,
}

#[allow(clippy::too_many_arguments)]
fn plan_round<L: Label>(
    map: &GridMap,
    instance: &Instance,
    reps: &[Cell],
    parents: &[SurvivingPlan<L>],
    agent: usize,
    horizon: u32,
    mode: RoundMode<L>,
    record_pops: bool,
) -> Result<RoundResult<L>, PlanError> {
    let goal = instance.goals[agent];
    let start = instance.starts[agent];
    let strands = reps.len() + agent + 1;
    let dist = map.bfs_distances(goal).map_err(|_| PlanError::GoalUnreachable(agent))?;
    if map.distance_at(&dist, start) == u32::MAX {
        return Err(PlanError::GoalUnreachable(agent));
    }
    let future: HashSet<Cell> = instance.starts[agent + 1..].iter().copied().collect();

    let (cmp0, upd0) = counter_snapshot();
    let mut stats = RoundStats { agent, ..RoundStats::default() };
    let mut pops = Vec::new();

    let mut ctxs = Vec::with_capacity(parents.len());
    for p in parents {
        ctxs.push(build_plan_ctx(map, reps, p.paths.clone(), p.cost, goal)?);
    }

    let mut nodes: Vec<Node<L>> = Vec::new();
    let mut visited: BTreeMap<(u16, u32, i64, L), u32> = BTreeMap::new();
    let mut open: BinaryHeap<OpenEntry> = BinaryHeap::new();
    let mut seq = 0u64;

    for (pid, ctx) in ctxs.iter().enumerate() {
        debug_assert!(ctx.occupied(start, 0).is_none(), "a parent path visits this start");
        let label = L::identity(strands);
        let node = Node {
            plan: pid as u16,
            cell: start,
            t: 0,
            label: label.clone(),
            parent: u32::MAX,
            d: 0,
            closed: false,
        };
        let id = nodes.len() as u32;
        nodes.push(node);
        stats.nodes_created += 1;
        visited.insert((pid as u16, 0, map.order_key(start).0, label), id);
        let f = ctx.cost + map.distance_at(&dist, start) as u64;
        open.push(OpenEntry { f, d: 0, plan: pid as u16, vkey: map.order_key(start).0, seq, node: id });
        seq += 1;
    }

    struct Collected<L> {
        plan: u16,
        label: L,
        word: Vec<Generator>,
        path: Vec<Cell>,
        reach: u32,
    }
    let mut collected: Vec<Collected<L>> = Vec::new();
    let mut seen_labels: Vec<Vec<L>> = vec![Vec::new(); parents.len()];

    'search: while let Some(entry) = open.pop() {
        if HR_BUDGET_HIT.with(StdCell::get) {
            return Err(PlanError::Dehornoy(DehornoyError::BudgetExhausted {
                budget: HR_CONFIG.with(StdCell::get).step_budget,
            }));
        }
        let nid = entry.node;
        if nodes[nid as usize].closed {
            continue;
        }
        nodes[nid as usize].closed = true;
        stats.popped += 1;
        if record_pops {
            pops.push(entry.f);
        }
        let (plan, cell, t) = {
            let n = &nodes[nid as usize];
            (n.plan, n.cell, n.t)
        };
        let ctx = &ctxs[plan as usize];

        if cell == goal && t >= ctx.t_settle {
            // Fold the tail: the agent rests at its goal while parents
            // finish, so the label of the full solution is deterministic
            // from here.
            let mut full = nodes[nid as usize].label.clone();
            let mut tail_gens = Vec::new();
            let resting = StrandMotion::stationary(map.order_key(goal).0, goal.row as i64);
            for tt in t..ctx.t_rest {
                let gens = ctx.background(tt).generators_with_agent(resting)?;
                if !gens.is_empty() {
                    full = full.apply(&gens);
                    tail_gens.extend_from_slice(&gens);
                }
            }
            let duplicate = seen_labels[plan as usize].iter().any(|l| l.cmp(&full).is_eq());
            if !duplicate {
                seen_labels[plan as usize].push(full.clone());
                // Reconstruct the agent's path and , if it arrived early,
                // extend it with waits to the parents' rest time.
                let mut cells = Vec::new();
                let mut cur = nid;
                while cur != u32::MAX {
                    cells.push(nodes[cur as usize].cell);
                    cur = nodes[cur as usize].parent;
                }
                cells.reverse();
                while (cells.len() as u32) <= ctx.t_rest {
                    cells.push(goal);
                }
                let mut reach = cells.len() as u32 - 1;
                while reach > 0 && cells[reach as usize - 1] == goal {
                    reach -= 1;
                }
                let mut word = nodes[nid as usize].label.word();
                word.extend_from_slice(&tail_gens);
                let accept = match &mode {
                    RoundMode::Collect { .. } => true,
                    RoundMode::Targeted { target } => target.cmp(&full).is_eq(),
                };
                if accept {
                    collected.push(Collected {
                        plan,
                        label: full,
                        word,
                        path: cells,
                        reach,
                    });
                    let enough = match &mode {
                        RoundMode::Collect { k } => collected.len() >= *k,
                        RoundMode::Targeted { .. } => true,
                    };
                    if enough {
                        break 'search;
                    }
                }
            }
        }

        // Expand: wait or move to a free 4-neighbor, against the parents'
        // reservations, excluding future starts except when one is this
        // agent's goal.
        if t + 1 > horizon {
            continue;
        }
        let mut targets: Vec<Cell> = Vec::with_capacity(5);
        targets.push(cell);
        targets.extend(map.free_neighbors(cell));
        for target in targets {
            if future.contains(&target) && target != goal {
                continue;
            }
            if map.distance_at(&dist, target) == u32::MAX {
                continue;
            }
            if ctx.occupied(target, t + 1).is_some() {
                continue; // vertex conflict
            }
            if target != cell {
                if let Some(q) = ctx.occupied(target, t) {
                    if position(&ctx.paths[q], t as usize + 1) == cell {
                        continue; // swap conflict
                    }
                }
            }
            let motion = StrandMotion {
                key0: map.order_key(cell).0,
                key1: map.order_key(target).0,
                row0: cell.row as i64,
                row1: target.row as i64,
            };
            let gens = ctx.background(t).generators_with_agent(motion)?;
            let label = nodes[nid as usize].label.apply(&gens);
            match visited.entry((plan, t + 1, map.order_key(target).0, label.clone())) {
                std::collections::btree_map::Entry::Occupied(slot) => {
                    // The timed graph is leveled, so D never improves; the
                    // update branch is kept for fidelity to the search
                    // formulation but cannot fire.
                    let existing = *slot.get();
                    let d_new = t + 1;
                    if nodes[existing as usize].d > d_new {
                        nodes[existing as usize].d = d_new;
                    }
                }
                std::collections::btree_map::Entry::Vacant(slot) => {
                    let id = nodes.len() as u32;
                    nodes.push(Node {
                        plan,
                        cell: target,
                        t: t + 1,
                        label,
                        parent: nid,
                        d: t + 1,
                        closed: false,
                    });
                    stats.nodes_created += 1;
                    slot.insert(id);
                    let f = ctx.cost + (t + 1) as u64 + map.distance_at(&dist, target) as u64;
                    open.push(OpenEntry {
                        f,
                        d: t + 1,
                        plan,
                        vkey: map.order_key(target).0,
                        seq,
                        node: id,
                    });
                    seq += 1;
                }
            }
        }
    }

    let mut plans = Vec::with_capacity(collected.len());
    for c in collected {
        let ctx = &ctxs[c.plan as usize];
        let mut paths = ctx.paths.clone();
        paths.push(c.path);
        plans.push(SurvivingPlan {
            paths,
            cost: ctx.cost + c.reach as u64,
            label: c.label,
            word: c.word,
        });
    }
    let (cmp1, upd1) = counter_snapshot();
    stats.comparisons = cmp1 - cmp0;
    stats.label_updates = upd1 - upd0;
    stats.plans_found = plans.len();
    Ok(RoundResult { plans, stats, pops })
}

fn default_horizon<L>(map: &GridMap, n: usize, parents: &[SurvivingPlan<L>]) -> u32 {
    let t_rest = parents.iter().flat_map(|p| p.paths.iter().map(|q| q.len() as u32)).max().unwrap_or(1);
    t_rest + 4 * (map.width() + map.height()) + n as u32
}

fn run_planner<L: Label>(
    map: &GridMap,
    instance: &Instance,
    cfg: &PlannerConfig,
) -> Result<PlannerOutput, PlanError> {
    instance.validate(map)?;
    HR_CONFIG.with(|c| c.set(cfg.handle));
    HR_BUDGET_HIT.with(|f| f.set(false));
    HR_MEMO.with(|m| m.borrow_mut().clear());
    let reps: Vec<Cell> = map.components().iter().map(|c| c.representative).collect();
    let n = instance.agents();
    let mut plans: Vec<SurvivingPlan<L>> = vec![SurvivingPlan {
        paths: Vec::new(),
        cost: 0,
        label: L::identity(reps.len()),
        word: Vec::new(),
    }];
    let mut rounds = Vec::new();
    let mut warnings = Vec::new();
    let mut pop_trace = if cfg.record_pops { Some(Vec::new()) } else { None };
    for agent in 0..n {
        let horizon = cfg.horizon.unwrap_or_else(|| default_horizon(map, n, &plans));
        let t0 = std::time::Instant::now();
        let result = plan_round(
            map,
            instance,
            &reps,
            &plans,
            agent,
            horizon,
            RoundMode::Collect { k: cfg.k },
            cfg.record_pops,
        )?;
        let mut stats = result.stats;
        stats.seconds = t0.elapsed().as_secs_f64();
        if let Some(tr) = pop_trace.as_mut() {
            tr.push(result.pops);
        }
        if result.plans.is_empty() {
            return Err(PlanError::RoundFailed { agent, horizon });
        }
        if result.plans.len() < cfg.k {
            warnings.push(format!(
                "round {}: only {} of {} homotopy classes reachable within horizon {}",
                agent,
                result.plans.len(),
                cfg.k,
                horizon
            ));
        }
        plans = result.plans;
        stats.max_coord_ln = plans
            .iter()
            .filter_map(|p| p.label.dynnikov_for_stats(reps.len() + agent + 1))
            .map(|s| ln_big(&s.max_abs()))
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        rounds.push(stats);
    }
    let strands = reps.len() + n;
    let out_plans = plans
        .into_iter()
        .map(|p| {
            let braid_word = BraidWord::new(strands.max(1), p.word.clone())?;
            let braid_state = p.label.dynnikov(strands);
            Ok(Plan { paths: p.paths, cost: p.cost, braid_word, braid_state })
        })
        .collect::<Result<Vec<_>, PlanError>>()?;
    Ok(PlannerOutput { plans: out_plans, rounds, warnings, pop_trace })
}

/// Homotopy-aware revised prioritized planning: up to `K` plans whose
/// solution braids are pairwise distinct.
pub fn hrpp(map: &GridMap, instance: &Instance, cfg: &PlannerConfig) -> Result<PlannerOutput, PlanError> {
    match cfg.engine {
        Engine::Dynnikov => run_planner::<DynLabel>(map, instance, cfg),
        Engine::Dehornoy => run_planner::<HrLabel>(map, instance, cfg),
    }
}

/// Strand position (1-based) of agent `idx`'s start among obstacle
/// representatives and the starts of agents `0..=upto`.
fn start_rank(map: &GridMap, instance: &Instance, upto: usize, idx: usize) -> usize {
    crate::trace::initial_rank_of_agent(map, &instance.starts[..=upto], upto + 1, idx)
}

/// The permutation a solution braid must induce: every obstacle strand
/// returns to its own key rank and agent `i`'s strand moves from the rank
/// of `s_i` to the rank of `g_i`.
fn required_permutation(map: &GridMap, instance: &Instance) -> crate::braid::StrandPermutation {
    let reps: Vec<Cell> = map.components().iter().map(|c| c.representative).collect();
    let n = instance.agents();
    let mut entities: Vec<(i64, usize)> = Vec::new();
    for (i, rep) in reps.iter().enumerate() {
        entities.push((map.order_key(*rep).0, i));
    }
    for (i, s) in instance.starts.iter().enumerate() {
        entities.push((map.order_key(*s).0, reps.len() + i));
    }
    let mut final_pos: Vec<(i64, usize)> = Vec::new();
    for (i, rep) in reps.iter().enumerate() {
        final_pos.push((map.order_key(*rep).0, i));
    }
    for (i, g) in instance.goals.iter().enumerate() {
        final_pos.push((map.order_key(*g).0, reps.len() + i));
    }
    entities.sort();
    final_pos.sort();
    let mut final_rank = vec![0usize; reps.len() + n];
    for (rank, (_, ent)) in final_pos.iter().enumerate() {
        final_rank[*ent] = rank + 1;
    }
    let mapping = entities.iter().map(|(_, ent)| final_rank[*ent]).collect();
    crate::braid::StrandPermutation::from_mapping(mapping)
}

#[derive(Debug)]
pub struct TargetedOutput {
    pub plan: Plan,
    pub rounds: Vec<RoundStats>,
}

/// Plans a single solution whose braid equals `target` (a word over
/// `r + n` strands), searching per agent for the projected intermediate
/// braid as in conventional revised prioritized planning.
pub fn targeted_hrpp(
    map: &GridMap,
    instance: &Instance,
    target: &BraidWord,
    cfg: &PlannerConfig,
) -> Result<TargetedOutput, PlanError> {
    instance.validate(map)?;
    let reps: Vec<Cell> = map.components().iter().map(|c| c.representative).collect();
    let n = instance.agents();
    if n == 0 {
        return Err(PlanError::Map(MapError::BadInstance("no agents".into())));
    }
    let strands = reps.len() + n;
    if target.strands() != strands.max(1) {
        return Err(PlanError::TargetStrandMismatch { got: target.strands(), want: strands.max(1) });
    }
    if crate::braid::permutation(target) != required_permutation(map, instance) {
        return Err(PlanError::CosetMismatch);
    }
    // Project the target down to each prefix of the priority order by
    // forgetting the later agents' strands, last first.
    let mut words: Vec<BraidWord> = vec![BraidWord::identity(1); n];
    words[n - 1] = target.clone();
    for a in (1..n).rev() {
        let k = start_rank(map, instance, a, a);
        words[a - 1] = crate::braid::forget_strand(&words[a], k)?;
    }
    let mut plans: Vec<SurvivingPlan<DynLabel>> = vec![SurvivingPlan {
        paths: Vec::new(),
        cost: 0,
        label: DynLabel::identity(reps.len()),
        word: Vec::new(),
    }];
    let mut rounds = Vec::new();
    for agent in 0..n {
        let m = reps.len() + agent + 1;
        let target_label = DynLabel::identity(m).apply_target(&words[agent]);
        let horizon = cfg.horizon.unwrap_or_else(|| default_horizon(map, n, &plans));
        let t0 = std::time::Instant::now();
        let result = plan_round(
            map,
            instance,
            &reps,
            &plans,
            agent,
            horizon,
            RoundMode::Targeted { target: target_label },
            false,
        )?;
        let mut stats = result.stats;
        stats.seconds = t0.elapsed().as_secs_f64();
        rounds.push(stats);
        if result.plans.is_empty() {
            return Err(PlanError::TargetNotFound { agent, horizon });
        }
        plans = result.plans;
    }
    let p = plans.remove(0);
    let braid_word = BraidWord::new(strands.max(1), p.word.clone())?;
    let braid_state = p.label.dynnikov(strands);
    Ok(TargetedOutput {
        plan: Plan { paths: p.paths, cost: p.cost, braid_word, braid_state },
        rounds,
    })
}

impl DynLabel {
    /// Label for a target word (no update counting; setup only).
    fn apply_target(&self, w: &BraidWord) -> DynLabel {
        let state = match self.state.as_ref() {
            Some(s) => {
                let mut next = s.clone();
                for g in w.letters() {
                    next.apply_mut(*g).expect("target word in range");
                }
                Some(next)
            }
            None => None,
        };
        DynLabel { state: Rc::new(state), word: WordChain::root() }
    }
}

/// Earliest time the next agent may settle on `goal`: one past the last
/// timestep any of the given paths occupies it.
pub fn settle_time(paths: &[Vec<Cell>], goal: Cell) -> u32 {
    let mut t_settle = 0;
    for p in paths {
        for (t, c) in p.iter().enumerate() {
            if *c == goal {
                t_settle = t_settle.max(t as u32 + 1);
            }
        }
    }
    t_settle
}

/// The round's goal condition: standing on the goal at or after the
/// settle time.
pub fn goal_reached(cell: Cell, t: u32, goal: Cell, t_settle: u32) -> bool {
    cell == goal && t >= t_settle
}

/// Independent conflict validator used by tests and the CLI.
pub fn validate_plan(map: &GridMap, instance: &Instance, plan: &Plan) -> Result<(), PlanError> {
    if plan.paths.len() != instance.agents() {
        return Err(PlanError::Trace(TraceError::InvalidSolution("wrong agent count".into())));
    }
    for (i, p) in plan.paths.iter().enumerate() {
        if p.first() != Some(&instance.starts[i]) {
            return Err(PlanError::Trace(TraceError::InvalidSolution(format!(
                "agent {i} does not begin at its start"
            ))));
        }
        if p.last() != Some(&instance.goals[i]) {
            return Err(PlanError::Trace(TraceError::InvalidSolution(format!(
                "agent {i} does not end at its goal"
            ))));
        }
    }
    crate::trace::check_conflict_free(map, &plan.paths)?;
    Ok(())
}
