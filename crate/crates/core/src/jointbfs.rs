//! Exhaustive joint-space enumeration of solution homotopy classes.
//!
//! Breadth-first search over joint agent configurations paired with the
//! braid state of the motion so far. Exponential in the number of agents;
//! used as an independent oracle in tests, as the optimal-one baseline for
//! tiny instances, and nowhere else.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};

use crate::braid::{BraidWord, DynnikovState};
use crate::map::{Cell, GridMap, Instance};
use crate::planner::PlanError;
use crate::trace::{step_generators, StrandMotion};

/// One homotopy class reached within the makespan bound, with the earliest
/// witness solution found for it.
#[derive(Debug, Clone)]
pub struct ClassWitness {
    /// `None` when there are fewer than two strands.
    pub state: Option<DynnikovState>,
    pub word: BraidWord,
    pub paths: Vec<Vec<Cell>>,
    pub cost: u64,
    pub makespan: u32,
}

struct SearchNode {
    positions: Vec<Cell>,
    label: Option<DynnikovState>,
    parent: usize,
}

/// Enumerates every homotopy class of solutions with makespan at most
/// `max_makespan`. `node_budget` caps the explored joint states.
pub fn enumerate_classes(
    map: &GridMap,
    instance: &Instance,
    max_makespan: u32,
    node_budget: usize,
) -> Result<Vec<ClassWitness>, PlanError> {
    instance.validate(map)?;
    let n = instance.agents();
    let reps: Vec<Cell> = map.components().iter().map(|c| c.representative).collect();
    let strands = reps.len() + n;
    let rep_motions: Vec<StrandMotion> =
        reps.iter().map(|r| StrandMotion::stationary(map.order_key(*r).0, r.row as i64)).collect();

    let dists: Vec<Vec<u32>> = instance
        .goals
        .iter()
        .map(|g| map.bfs_distances(*g))
        .collect::<Result<_, _>>()?;

    let root_label =
        if strands >= 2 { Some(DynnikovState::identity(strands)?) } else { None };
    let mut nodes = vec![SearchNode {
        positions: instance.starts.clone(),
        label: root_label,
        parent: usize::MAX,
    }];
    let mut visited: HashMap<(Vec<Cell>, Option<DynnikovState>), ()> = HashMap::new();
    visited.insert((nodes[0].positions.clone(), nodes[0].label.clone()), ());

    let mut classes: BTreeMap<Option<DynnikovState>, usize> = BTreeMap::new();
    let mut class_meta: Vec<(usize, u32)> = Vec::new(); // (node, makespan)

    let mut frontier = vec![0usize];
    for t in 0..=max_makespan {
        // Record goal hits at this layer; the first witness per class wins.
        for &nid in &frontier {
            if nodes[nid].positions == instance.goals
                && !classes.contains_key(&nodes[nid].label)
            {
                classes.insert(nodes[nid].label.clone(), class_meta.len());
                class_meta.push((nid, t));
            }
        }
        if t == max_makespan {
            break;
        }
        let mut next_frontier = Vec::new();
        for &nid in &frontier {
            let positions = nodes[nid].positions.clone();
            // Per-agent candidate moves, pruned by goal reachability in the
            // remaining time.
            let remaining = max_makespan - t - 1;
            let mut options: Vec<Vec<Cell>> = Vec::with_capacity(n);
            for (a, &p) in positions.iter().enumerate() {
                let mut opts = Vec::with_capacity(5);
                for cand in std::iter::once(p).chain(map.free_neighbors(p)) {
                    if map.distance_at(&dists[a], cand) <= remaining {
                        opts.push(cand);
                    }
                }
                options.push(opts);
            }
            if options.iter().any(Vec::is_empty) {
                continue;
            }
            let mut choice = vec![0usize; n];
            'joint: loop {
                let targets: Vec<Cell> = (0..n).map(|a| options[a][choice[a]]).collect();
                if joint_move_ok(&positions, &targets) {
                    let mut motions = rep_motions.clone();
                    for (&from, &to) in positions.iter().zip(&targets) {
                        motions.push(StrandMotion {
                            key0: map.order_key(from).0,
                            key1: map.order_key(to).0,
                            row0: from.row as i64,
                            row1: to.row as i64,
                        });
                    }
                    let gens = step_generators(&motions)?;
                    let label = match &nodes[nid].label {
                        Some(s) => {
                            let mut next = s.clone();
                            for g in &gens {
                                next.apply_mut(*g)?;
                            }
                            Some(next)
                        }
                        None => None,
                    };
                    let key = (targets.clone(), label.clone());
                    if let Entry::Vacant(slot) = visited.entry(key) {
                        slot.insert(());
                        if nodes.len() >= node_budget {
                            return Err(PlanError::Map(crate::map::MapError::BadInstance(
                                format!("joint enumeration exceeded node budget {node_budget}"),
                            )));
                        }
                        let new_id = nodes.len();
                        nodes.push(SearchNode { positions: targets, label, parent: nid });
                        next_frontier.push(new_id);
                    }
                }
                // Advance the mixed-radix counter.
                let mut a = 0;
                loop {
                    if a == n {
                        break 'joint;
                    }
                    choice[a] += 1;
                    if choice[a] < options[a].len() {
                        break;
                    }
                    choice[a] = 0;
                    a += 1;
                }
            }
        }
        frontier = next_frontier;
        if frontier.is_empty() {
            break;
        }
    }

    let mut out = Vec::new();
    for (label, &meta_idx) in &classes {
        let (nid, makespan) = class_meta[meta_idx];
        let paths = reconstruct_paths(&nodes, nid, n);
        let word = word_of_paths(map, &reps, &paths)?;
        let cost = sum_of_costs(&paths, &instance.goals);
        out.push(ClassWitness { state: label.clone(), word, paths, cost, makespan });
    }
    out.sort_by_key(|c| (c.cost, c.word.to_string()));
    Ok(out)
}

fn joint_move_ok(from: &[Cell], to: &[Cell]) -> bool {
    for i in 0..to.len() {
        for j in i + 1..to.len() {
            if to[i] == to[j] {
                return false;
            }
            if to[i] == from[j] && to[j] == from[i] && from[i] != to[i] {
                return false;
            }
        }
    }
    true
}

fn reconstruct_paths(nodes: &[SearchNode], mut nid: usize, n: usize) -> Vec<Vec<Cell>> {
    let mut rev: Vec<&Vec<Cell>> = Vec::new();
    loop {
        rev.push(&nodes[nid].positions);
        if nodes[nid].parent == usize::MAX {
            break;
        }
        nid = nodes[nid].parent;
    }
    rev.reverse();
    (0..n).map(|a| rev.iter().map(|snap| snap[a]).collect()).collect()
}

fn word_of_paths(map: &GridMap, reps: &[Cell], paths: &[Vec<Cell>]) -> Result<BraidWord, PlanError> {
    let strands = reps.len() + paths.len();
    let horizon = paths.iter().map(Vec::len).max().unwrap_or(1);
    let mut word = BraidWord::identity(strands.max(1));
    for t in 0..horizon.saturating_sub(1) {
        let mut motions: Vec<StrandMotion> =
            reps.iter().map(|r| StrandMotion::stationary(map.order_key(*r).0, r.row as i64)).collect();
        for p in paths {
            let (from, to) = (
                crate::trace::position(p, t),
                crate::trace::position(p, t + 1),
            );
            motions.push(StrandMotion {
                key0: map.order_key(from).0,
                key1: map.order_key(to).0,
                row0: from.row as i64,
                row1: to.row as i64,
            });
        }
        for g in step_generators(&motions)? {
            word.push(g)?;
        }
    }
    Ok(word)
}

/// Sum over agents of the time from which each rests at its goal.
pub fn sum_of_costs(paths: &[Vec<Cell>], goals: &[Cell]) -> u64 {
    paths
        .iter()
        .zip(goals)
        .map(|(p, g)| {
            let mut reach = p.len() - 1;
            while reach > 0 && p[reach - 1] == *g {
                reach -= 1;
            }
            reach as u64
        })
        .sum()
}
