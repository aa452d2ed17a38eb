//! Planar grid domain: map parsing, obstacle components, the tilted order
//! key, instance generation and Moving-AI file I/O.
//!
//! Cells sit at unit-square centers `(column, row)`. Free cells under
//! 4-connectivity form the planning domain; blocked cells group into
//! obstacle components under 8-connectivity (corner-touching obstacles act
//! as one), each with a representative cell that anchors its strand.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapError {
    #[error("malformed map header: {0}")]
    BadHeader(String),
    #[error("map row {row} has length {got}, expected {want}")]
    RaggedRow { row: usize, got: usize, want: usize },
    #[error("unknown map symbol '{symbol}' at row {row}, column {col}")]
    UnknownSymbol { symbol: char, row: usize, col: usize },
    #[error("cell ({0}, {1}) out of bounds")]
    OutOfBounds(i64, i64),
    #[error("map has {free} free cells, need at least {need} for {agents} agents")]
    TooDense { free: usize, need: usize, agents: usize },
    #[error("instance sampling budget exhausted after {0} attempts")]
    InfeasibleDensity(usize),
    #[error("malformed scenario line {0}: {1}")]
    BadScenLine(usize, String),
    #[error("instance invalid: {0}")]
    BadInstance(String),
}

/// A grid cell, addressed as (column, row).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(from = "(u32, u32)", into = "(u32, u32)")]
pub struct Cell {
    pub col: u32,
    pub row: u32,
}

impl From<(u32, u32)> for Cell {
    fn from((col, row): (u32, u32)) -> Self {
        Cell { col, row }
    }
}

impl From<Cell> for (u32, u32) {
    fn from(c: Cell) -> Self {
        (c.col, c.row)
    }
}

impl Cell {
    pub fn new(col: u32, row: u32) -> Self {
        Cell { col, row }
    }

    /// Center of the cell's unit square in continuous coordinates.
    pub fn center(&self) -> [f64; 2] {
        [self.col as f64, self.row as f64]
    }
}

/// Exact integer linearization of the slightly inclined x-axis:
/// `key = column * (height + 1) + row`, strictly monotone in the
/// lexicographic (column, row) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrderKey(pub i64);

/// One 8-connected component of blocked cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObstacleComponent {
    pub id: usize,
    /// Member cells in sorted (column, row) order.
    pub cells: Vec<Cell>,
    /// The lexicographically smallest member; anchors the obstacle strand.
    pub representative: Cell,
}

#[derive(Debug, Clone)]
pub struct GridMap {
    width: u32,
    height: u32,
    blocked: Vec<bool>,
    components: Vec<ObstacleComponent>,
}

impl GridMap {
    pub fn from_grid(width: u32, height: u32, blocked: Vec<bool>) -> Self {
        assert_eq!(blocked.len(), (width * height) as usize);
        let mut map = GridMap { width, height, blocked, components: Vec::new() };
        map.components = map.compute_components();
        map
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self::from_grid(width, height, vec![false; (width * height) as usize])
    }

    /// Parses the Moving-AI `.map` format: `type octile`, `height H`,
    /// `width W`, `map`, then `H` rows of `W` symbols. `.` and `G` are
    /// free; `@`, `O`, `T` are blocked.
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let mut lines = text.lines();
        let type_line = lines.next().ok_or_else(|| MapError::BadHeader("empty input".into()))?;
        if !type_line.trim_end().starts_with("type") {
            return Err(MapError::BadHeader(format!("expected 'type ...', got '{type_line}'")));
        }
        let mut height: Option<u32> = None;
        let mut width: Option<u32> = None;
        for _ in 0..2 {
            let line =
                lines.next().ok_or_else(|| MapError::BadHeader("truncated header".into()))?;
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("height"), Some(v)) => {
                    height =
                        Some(v.parse().map_err(|_| MapError::BadHeader(line.to_string()))?)
                }
                (Some("width"), Some(v)) => {
                    width = Some(v.parse().map_err(|_| MapError::BadHeader(line.to_string()))?)
                }
                _ => return Err(MapError::BadHeader(line.to_string())),
            }
        }
        let (height, width) = (
            height.ok_or_else(|| MapError::BadHeader("missing height".into()))?,
            width.ok_or_else(|| MapError::BadHeader("missing width".into()))?,
        );
        let map_line = lines.next().ok_or_else(|| MapError::BadHeader("missing 'map'".into()))?;
        if map_line.trim() != "map" {
            return Err(MapError::BadHeader(format!("expected 'map', got '{map_line}'")));
        }
        let mut blocked = vec![false; (width * height) as usize];
        for row in 0..height as usize {
            let line = lines
                .next()
                .ok_or(MapError::RaggedRow { row, got: 0, want: width as usize })?
                .trim_end_matches(['\r', '\n']);
            if line.chars().count() != width as usize {
                return Err(MapError::RaggedRow {
                    row,
                    got: line.chars().count(),
                    want: width as usize,
                });
            }
            for (col, ch) in line.chars().enumerate() {
                let b = match ch {
                    '.' | 'G' => false,
                    '@' | 'O' | 'T' => true,
                    other => {
                        return Err(MapError::UnknownSymbol { symbol: other, row, col })
                    }
                };
                blocked[col * height as usize + row] = b;
            }
        }
        Ok(Self::from_grid(width, height, blocked))
    }

    fn idx(&self, c: Cell) -> usize {
        (c.col * self.height + c.row) as usize
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn in_bounds(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && col < self.width as i64 && row < self.height as i64
    }

    pub fn is_free(&self, c: Cell) -> bool {
        c.col < self.width && c.row < self.height && !self.blocked[self.idx(c)]
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        c.col < self.width && c.row < self.height && self.blocked[self.idx(c)]
    }

    /// The multiplier `M = height + 1` of the order key.
    pub fn key_scale(&self) -> i64 {
        self.height as i64 + 1
    }

    pub fn order_key(&self, c: Cell) -> OrderKey {
        OrderKey(c.col as i64 * self.key_scale() + c.row as i64)
    }

    pub fn components(&self) -> &[ObstacleComponent] {
        &self.components
    }

    /// Free 4-neighbors of a free cell.
    pub fn free_neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        const D: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        D.iter().filter_map(move |&(dc, dr)| {
            let (col, row) = (c.col as i64 + dc, c.row as i64 + dr);
            if self.in_bounds(col, row) {
                let cell = Cell::new(col as u32, row as u32);
                if self.is_free(cell) {
                    return Some(cell);
                }
            }
            None
        })
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for col in 0..self.width {
            for row in 0..self.height {
                let c = Cell::new(col, row);
                if self.is_free(c) {
                    out.push(c);
                }
            }
        }
        out
    }

    fn compute_components(&self) -> Vec<ObstacleComponent> {
        let mut comp_of = vec![usize::MAX; self.blocked.len()];
        let mut comps: Vec<Vec<Cell>> = Vec::new();
        for col in 0..self.width {
            for row in 0..self.height {
                let seed = Cell::new(col, row);
                if !self.is_blocked(seed) || comp_of[self.idx(seed)] != usize::MAX {
                    continue;
                }
                let id = comps.len();
                let mut members = Vec::new();
                let mut queue = VecDeque::from([seed]);
                comp_of[self.idx(seed)] = id;
                while let Some(c) = queue.pop_front() {
                    members.push(c);
                    for dc in -1i64..=1 {
                        for dr in -1i64..=1 {
                            if dc == 0 && dr == 0 {
                                continue;
                            }
                            let (nc, nr) = (c.col as i64 + dc, c.row as i64 + dr);
                            if !self.in_bounds(nc, nr) {
                                continue;
                            }
                            let nb = Cell::new(nc as u32, nr as u32);
                            if self.is_blocked(nb) && comp_of[self.idx(nb)] == usize::MAX {
                                comp_of[self.idx(nb)] = id;
                                queue.push_back(nb);
                            }
                        }
                    }
                }
                members.sort();
                comps.push(members);
            }
        }
        comps
            .into_iter()
            .enumerate()
            .map(|(id, cells)| {
                let representative = cells[0];
                ObstacleComponent { id, cells, representative }
            })
            .collect()
    }

    /// Breadth-first distances over free cells from `from`; `u32::MAX`
    /// marks unreachable cells.
    pub fn bfs_distances(&self, from: Cell) -> Result<Vec<u32>, MapError> {
        if !self.is_free(from) {
            return Err(MapError::OutOfBounds(from.col as i64, from.row as i64));
        }
        let mut dist = vec![u32::MAX; self.blocked.len()];
        dist[self.idx(from)] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            let d = dist[self.idx(c)];
            for nb in self.free_neighbors(c) {
                if dist[self.idx(nb)] == u32::MAX {
                    dist[self.idx(nb)] = d + 1;
                    queue.push_back(nb);
                }
            }
        }
        Ok(dist)
    }

    pub fn distance_at(&self, dist: &[u32], c: Cell) -> u32 {
        dist[self.idx(c)]
    }

    /// Reachability from `from` to `to` with `avoid` treated as blocked.
    pub fn reachable_avoiding(&self, from: Cell, to: Cell, avoid: &[Cell]) -> bool {
        if !self.is_free(from) || !self.is_free(to) {
            return false;
        }
        if avoid.contains(&from) && from != to {
            return false;
        }
        if from == to {
            return true;
        }
        if avoid.contains(&to) {
            return false;
        }
        let mut seen = vec![false; self.blocked.len()];
        seen[self.idx(from)] = true;
        for a in avoid {
            if self.is_free(*a) {
                seen[self.idx(*a)] = true;
            }
        }
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            for nb in self.free_neighbors(c) {
                if nb == to {
                    return true;
                }
                if !seen[self.idx(nb)] {
                    seen[self.idx(nb)] = true;
                    queue.push_back(nb);
                }
            }
        }
        false
    }
}

/// A planning instance: per-agent starts and goals on free cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub starts: Vec<Cell>,
    pub goals: Vec<Cell>,
}

impl Instance {
    pub fn agents(&self) -> usize {
        self.starts.len()
    }

    pub fn validate(&self, map: &GridMap) -> Result<(), MapError> {
        if self.starts.len() != self.goals.len() {
            return Err(MapError::BadInstance("starts/goals length mismatch".into()));
        }
        for (i, s) in self.starts.iter().enumerate() {
            if !map.is_free(*s) {
                return Err(MapError::BadInstance(format!("start {i} not on a free cell")));
            }
            if self.starts[..i].contains(s) {
                return Err(MapError::BadInstance(format!("duplicate start {i}")));
            }
        }
        for (i, g) in self.goals.iter().enumerate() {
            if !map.is_free(*g) {
                return Err(MapError::BadInstance(format!("goal {i} not on a free cell")));
            }
            if self.goals[..i].contains(g) {
                return Err(MapError::BadInstance(format!("duplicate goal {i}")));
            }
        }
        Ok(())
    }

    /// The revised-prioritized-planning feasibility condition: agent `i`
    /// can reach its goal in the static map while the later starts
    /// `s_{i+1..}` and earlier goals `g_{..i}` are treated as blocked.
    pub fn rpp_feasible(&self, map: &GridMap) -> bool {
        let n = self.agents();
        (0..n).all(|i| {
            let mut avoid: Vec<Cell> = self.starts[i + 1..].to_vec();
            avoid.extend_from_slice(&self.goals[..i]);
            avoid.retain(|c| *c != self.starts[i] && *c != self.goals[i]);
            map.reachable_avoiding(self.starts[i], self.goals[i], &avoid)
        })
    }
}

/// Rejection-samples an instance with distinct starts, distinct goals, and
/// the revised-prioritized-planning reachability condition, deterministic
/// per seed.
pub fn gen_instance(map: &GridMap, n: usize, seed: u64) -> Result<Instance, MapError> {
    gen_instance_budgeted(map, n, seed, 10_000)
}

pub fn gen_instance_budgeted(
    map: &GridMap,
    n: usize,
    seed: u64,
    budget: usize,
) -> Result<Instance, MapError> {
    let free = map.free_cells();
    if free.len() < 2 * n {
        return Err(MapError::TooDense { free: free.len(), need: 2 * n, agents: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..budget {
        let mut pool = free.clone();
        pool.shuffle(&mut rng);
        let starts: Vec<Cell> = pool[..n].to_vec();
        let mut pool2 = free.clone();
        pool2.shuffle(&mut rng);
        let goals: Vec<Cell> = pool2[..n].to_vec();
        let inst = Instance { starts, goals };
        if inst.rpp_feasible(map) {
            return Ok(inst);
        }
    }
    Err(MapError::InfeasibleDensity(budget))
}

/// Like [`gen_instance`], but additionally enforcing the separation
/// conditions under which the planner is complete: no two starts or two
/// goals 8-adjacent, no start/goal 8-adjacent to an obstacle, and no
/// `g_i` 8-adjacent to `s_j` for `i < j`.
pub fn gen_instance_separated(
    map: &GridMap,
    n: usize,
    seed: u64,
    budget: usize,
) -> Result<Instance, MapError> {
    let adjacent = |a: Cell, b: Cell| {
        (a.col as i64 - b.col as i64).abs() <= 1 && (a.row as i64 - b.row as i64).abs() <= 1
    };
    let clear_of_obstacles = |c: Cell| {
        for dc in -1i64..=1 {
            for dr in -1i64..=1 {
                let (nc, nr) = (c.col as i64 + dc, c.row as i64 + dr);
                if map.in_bounds(nc, nr) && map.is_blocked(Cell::new(nc as u32, nr as u32)) {
                    return false;
                }
            }
        }
        true
    };
    let free: Vec<Cell> = map.free_cells().into_iter().filter(|c| clear_of_obstacles(*c)).collect();
    if free.len() < 2 * n {
        return Err(MapError::TooDense { free: free.len(), need: 2 * n, agents: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: for _ in 0..budget {
        let mut pool = free.clone();
        pool.shuffle(&mut rng);
        let starts: Vec<Cell> = pool[..n].to_vec();
        let mut pool2 = free.clone();
        pool2.shuffle(&mut rng);
        let goals: Vec<Cell> = pool2[..n].to_vec();
        for i in 0..n {
            for j in 0..n {
                if i < j && (adjacent(starts[i], starts[j]) || adjacent(goals[i], goals[j])) {
                    continue 'attempt;
                }
                if i < j && adjacent(goals[i], starts[j]) {
                    continue 'attempt;
                }
            }
        }
        let inst = Instance { starts, goals };
        if inst.rpp_feasible(map) {
            return Ok(inst);
        }
    }
    Err(MapError::InfeasibleDensity(budget))
}

/// Parses a Moving-AI `.scen` file against a map. Returns the instance and
/// any warnings (e.g. a map-name mismatch); `max_agents` truncates.
pub fn parse_scen(
    text: &str,
    map: &GridMap,
    map_name: Option<&str>,
    max_agents: Option<usize>,
) -> Result<(Instance, Vec<String>), MapError> {
    let mut warnings = Vec::new();
    let mut starts = Vec::new();
    let mut goals = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if lineno == 0 && trimmed.starts_with("version") {
            continue;
        }
        if let Some(max) = max_agents {
            if starts.len() >= max {
                break;
            }
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 8 {
            return Err(MapError::BadScenLine(lineno + 1, "expected 8+ fields".into()));
        }
        if let Some(name) = map_name {
            if fields[1] != name {
                let w = format!("scenario line {} names map '{}', expected '{}'", lineno + 1, fields[1], name);
                if !warnings.contains(&w) {
                    warnings.push(w);
                }
            }
        }
        let nums: Vec<u32> = fields[4..8]
            .iter()
            .map(|f| f.parse().map_err(|_| MapError::BadScenLine(lineno + 1, (*f).to_string())))
            .collect::<Result<_, _>>()?;
        let (s, g) = (Cell::new(nums[0], nums[1]), Cell::new(nums[2], nums[3]));
        for c in [s, g] {
            if !map.is_free(c) {
                return Err(MapError::BadScenLine(
                    lineno + 1,
                    format!("cell ({}, {}) is not free", c.col, c.row),
                ));
            }
        }
        starts.push(s);
        goals.push(g);
    }
    Ok((Instance { starts, goals }, warnings))
}

/// Writes an instance in the Moving-AI `.scen` format.
pub fn write_scen(instance: &Instance, map: &GridMap, map_name: &str) -> String {
    let mut out = String::from("version 1\n");
    for (s, g) in instance.starts.iter().zip(&instance.goals) {
        let dist =
            (s.col as i64 - g.col as i64).abs() + (s.row as i64 - g.row as i64).abs();
        out.push_str(&format!(
            "0\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            map_name,
            map.width(),
            map.height(),
            s.col,
            s.row,
            g.col,
            g.row,
            dist
        ));
    }
    out
}
