//! Experiment harness behind the CLI: runtime scaling over agents and
//! solution counts, random-braid coordinate-magnitude studies, and the
//! optimization comparison, all emitting schema-versioned CSV.

use std::io::Write as IoWrite;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use crate::braid::{random_word, DynnikovState, Generator};
use crate::map::{gen_instance, GridMap, Instance, MapError};
use crate::opt::{self, OptimConfig};
use crate::planner::{hrpp, ln_big, Engine, Plan, PlanError, PlannerConfig, PlannerOutput};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Worker-pool width: `BRAIDPLAN_THREADS` or the machine's parallelism.
pub fn thread_count() -> usize {
    std::env::var("BRAIDPLAN_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs `f` over the items on a fixed-width worker pool, preserving order.
pub fn run_parallel<I, T, F>(items: Vec<I>, threads: usize, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync,
{
    if threads <= 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let n = items.len();
    let inputs: Vec<std::sync::Mutex<Option<I>>> =
        items.into_iter().map(|i| std::sync::Mutex::new(Some(i))).collect();
    let outputs: Vec<std::sync::Mutex<Option<T>>> =
        (0..n).map(|_| std::sync::Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads.min(n) {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let item = inputs[i].lock().unwrap().take().unwrap();
                *outputs[i].lock().unwrap() = Some(f(item));
            });
        }
    });
    outputs.into_iter().map(|m| m.into_inner().unwrap().unwrap()).collect()
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// Appends rows to a schema-versioned CSV, creating it (with the schema
/// comment and header) when absent. Re-running appends identical content
/// modulo the time columns.
pub fn append_csv(
    path: &Path,
    schema: &str,
    header: &str,
    rows: &[String],
) -> std::io::Result<()> {
    let exists = path.exists();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if !exists {
        writeln!(file, "# {schema}")?;
        writeln!(file, "{header}")?;
    }
    for row in rows {
        writeln!(file, "{row}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Experiment A: runtime vs number of agents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AgentRoundRow {
    pub map: String,
    pub seed: u64,
    pub k: usize,
    pub engine: &'static str,
    /// Agents planned so far (1-based round).
    pub n: usize,
    /// Cumulative wall-clock seconds from the start of the run.
    pub seconds: f64,
    pub comparisons: u64,
    pub nodes: u64,
    pub max_coord_ln: Option<f64>,
}

impl AgentRoundRow {
    pub const SCHEMA: &'static str = "braidplan bench-agents v1";
    pub const HEADER: &'static str = "map,seed,k,engine,n,seconds,comparisons,nodes,max_coord_ln";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{},{},{}",
            self.map,
            self.seed,
            self.k,
            self.engine,
            self.n,
            self.seconds,
            self.comparisons,
            self.nodes,
            self.max_coord_ln.map_or(String::new(), |v| format!("{v:.4}")),
        )
    }
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Dynnikov => "dynnikov",
        Engine::Dehornoy => "dehornoy",
    }
}

/// One planner run reported as cumulative per-round rows.
pub fn bench_agents_run(
    map: &GridMap,
    map_name: &str,
    instance: &Instance,
    seed: u64,
    k: usize,
    engine: Engine,
) -> Result<(Vec<AgentRoundRow>, PlannerOutput), PlanError> {
    let cfg = PlannerConfig { k, engine, ..Default::default() };
    let out = hrpp(map, instance, &cfg)?;
    let mut rows = Vec::with_capacity(out.rounds.len());
    let (mut secs, mut cmps, mut nodes) = (0.0, 0, 0);
    for r in &out.rounds {
        secs += r.seconds;
        cmps += r.comparisons;
        nodes += r.nodes_created;
        rows.push(AgentRoundRow {
            map: map_name.to_string(),
            seed,
            k,
            engine: engine_name(engine),
            n: r.agent + 1,
            seconds: secs,
            comparisons: cmps,
            nodes,
            max_coord_ln: r.max_coord_ln,
        });
    }
    Ok((rows, out))
}

// ---------------------------------------------------------------------------
// Experiment B: runtime vs K
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct KRow {
    pub map: String,
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub engine: &'static str,
    pub seconds: f64,
    pub comparisons: u64,
    pub nodes: u64,
}

impl KRow {
    pub const SCHEMA: &'static str = "braidplan bench-k v1";
    pub const HEADER: &'static str = "map,seed,n,k,engine,seconds,comparisons,nodes";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{},{}",
            self.map, self.seed, self.n, self.k, self.engine, self.seconds, self.comparisons, self.nodes
        )
    }
}

pub fn bench_k_run(
    map: &GridMap,
    map_name: &str,
    instance: &Instance,
    seed: u64,
    k: usize,
    engine: Engine,
) -> Result<KRow, PlanError> {
    let cfg = PlannerConfig { k, engine, ..Default::default() };
    let t0 = Instant::now();
    let out = hrpp(map, instance, &cfg)?;
    Ok(KRow {
        map: map_name.to_string(),
        seed,
        n: instance.agents(),
        k,
        engine: engine_name(engine),
        seconds: t0.elapsed().as_secs_f64(),
        comparisons: out.rounds.iter().map(|r| r.comparisons).sum(),
        nodes: out.rounds.iter().map(|r| r.nodes_created).sum(),
    })
}

// ---------------------------------------------------------------------------
// Random-braid magnitude study
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MagnitudeRow {
    pub n: usize,
    pub length: usize,
    pub length_over_n: f64,
    pub mean_ln_max: f64,
    pub std_ln_max: f64,
    pub words: usize,
}

impl MagnitudeRow {
    pub const SCHEMA: &'static str = "braidplan random-braids v1";
    pub const HEADER: &'static str = "n,length,length_over_n,mean_ln_max,std_ln_max,words";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:.4},{:.6},{:.6},{}",
            self.n, self.length, self.length_over_n, self.mean_ln_max, self.std_ln_max, self.words
        )
    }
}

/// Applies `count` random words of length `factor * n` per strand count,
/// recording the running log of the maximum coordinate magnitude at
/// `checkpoints` evenly spaced prefixes.
pub fn random_braid_magnitudes(
    ns: &[usize],
    factor: usize,
    count: usize,
    checkpoints: usize,
    seed: u64,
) -> Vec<MagnitudeRow> {
    let mut rows = Vec::new();
    for &n in ns {
        let total_len = factor * n;
        let marks: Vec<usize> =
            (1..=checkpoints).map(|c| total_len * c / checkpoints).collect();
        let mut lns: Vec<Vec<f64>> = vec![Vec::with_capacity(count); marks.len()];
        for w in 0..count {
            let word = random_word(n, total_len, seed ^ ((n as u64) << 32) ^ w as u64);
            let mut state = DynnikovState::identity(n).expect("n >= 2");
            let mut next_mark = 0;
            for (idx, g) in word.letters().iter().enumerate() {
                state.apply_mut(*g).expect("in range");
                if next_mark < marks.len() && idx + 1 == marks[next_mark] {
                    lns[next_mark].push(ln_big(&state.max_abs()));
                    next_mark += 1;
                }
            }
        }
        for (mark, vals) in marks.iter().zip(&lns) {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var =
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
            rows.push(MagnitudeRow {
                n,
                length: *mark,
                length_over_n: *mark as f64 / n as f64,
                mean_ln_max: mean,
                std_ln_max: var.sqrt(),
                words: vals.len(),
            });
        }
    }
    rows
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Per-`n` slopes of mean log magnitude against `l/n`.
pub fn magnitude_slopes(rows: &[MagnitudeRow]) -> Vec<(usize, f64)> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let xs: Vec<f64> =
                rows.iter().filter(|r| r.n == n).map(|r| r.length_over_n).collect();
            let ys: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.mean_ln_max).collect();
            (n, linear_fit(&xs, &ys).0)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Counter-weighted estimate of braid-coordinate work
// ---------------------------------------------------------------------------

/// Micro-benchmarks one coordinate update and one comparison on the run's
/// final states, then weighs the run's counters with those unit costs.
/// Final-round states are the largest the search ever touched, so the
/// estimate errs high.
pub fn braid_work_estimate(out: &PlannerOutput) -> Option<f64> {
    let states: Vec<&DynnikovState> =
        out.plans.iter().filter_map(|p: &Plan| p.braid_state.as_ref()).collect();
    let state = states.first()?;
    let strands = state.strands();
    let reps = 2000usize;
    let g_pos = Generator::positive(1.max(strands / 2));
    let t0 = Instant::now();
    let mut scratch = (*state).clone();
    for i in 0..reps {
        let g = if i % 2 == 0 { g_pos } else { g_pos.inverse() };
        scratch.apply_mut(g).unwrap();
    }
    let t_update = t0.elapsed().as_secs_f64() / reps as f64;
    let other = state.apply(g_pos).unwrap();
    let t0 = Instant::now();
    let mut acc = 0usize;
    for i in 0..reps {
        let r = if i % 2 == 0 { (*state).cmp(&other) } else { (*state).cmp(state) };
        acc += (r == std::cmp::Ordering::Less) as usize;
    }
    let t_cmp = t0.elapsed().as_secs_f64() / reps as f64;
    std::hint::black_box(acc);
    let comparisons: u64 = out.rounds.iter().map(|r| r.comparisons).sum();
    let updates: u64 = out.rounds.iter().map(|r| r.label_updates).sum();
    Some(comparisons as f64 * t_cmp + updates as f64 * t_update)
}

// ---------------------------------------------------------------------------
// Optimization comparison (ours vs shuffled-priority baselines)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct OptCompareRow {
    pub instance_seed: u64,
    pub best_ours: f64,
    pub best_ppvp: f64,
    pub ours_wins_or_ties: bool,
    pub gradient_rel_err: f64,
    pub ours_classes: usize,
    pub ppvp_classes: usize,
}

impl OptCompareRow {
    pub const SCHEMA: &'static str = "braidplan optimize-compare v1";
    pub const HEADER: &'static str =
        "instance_seed,best_ours,best_ppvp,ours_wins_or_ties,gradient_rel_err,ours_classes,ppvp_classes";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.6},{:.6},{},{:.3e},{},{}",
            self.instance_seed,
            self.best_ours,
            self.best_ppvp,
            self.ours_wins_or_ties,
            self.gradient_rel_err,
            self.ours_classes,
            self.ppvp_classes
        )
    }
}

/// Plans with revised prioritized planning under a shuffled priority
/// order, mapping paths back to the original agent indexing.
pub fn ppvp_plan(
    map: &GridMap,
    instance: &Instance,
    seed: u64,
) -> Result<Plan, PlanError> {
    let n = instance.agents();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let permuted = Instance {
        starts: order.iter().map(|&i| instance.starts[i]).collect(),
        goals: order.iter().map(|&i| instance.goals[i]).collect(),
    };
    let cfg = PlannerConfig { k: 1, ..Default::default() };
    let out = hrpp(map, &permuted, &cfg)?;
    let plan = out.plans.into_iter().next().expect("k=1 yields one plan");
    let mut paths = vec![Vec::new(); n];
    for (pos, &agent) in order.iter().enumerate() {
        paths[agent] = plan.paths[pos].clone();
    }
    // Braid label of the solution under the original indexing.
    let sb = crate::trace::solution_braid(map, &paths)?;
    Ok(Plan { paths, cost: plan.cost, braid_word: sb.word, braid_state: sb.state })
}

/// Central-difference check of the analytic gradient at the resampled
/// initialization of a plan; returns the norm-relative error.
pub fn gradient_check(paths: &[Vec<crate::map::Cell>], map: &GridMap, cfg: &OptimConfig) -> f64 {
    let w = opt::resample_plan(paths, cfg.samples);
    let cc = cfg.cc_initial;
    if !opt::cost_with_cc(&w, map, cfg, cc).is_finite() {
        return f64::NAN;
    }
    let ga = opt::grad_with_cc(&w, map, cfg, cc);
    let h = 1e-6;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut wp = w.clone();
    for i in 0..w.agents {
        for k in 1..w.samples {
            for c in 0..2 {
                let idx = i * (w.samples + 1) + k;
                let orig = wp.points[idx][c];
                wp.points[idx][c] = orig + h;
                let fp = opt::cost_with_cc(&wp, map, cfg, cc);
                wp.points[idx][c] = orig - h;
                let fm = opt::cost_with_cc(&wp, map, cfg, cc);
                wp.points[idx][c] = orig;
                let fd = (fp - fm) / (2.0 * h);
                num += (ga[idx][c] - fd) * (ga[idx][c] - fd);
                den += fd * fd;
            }
        }
    }
    (num / den.max(1e-30)).sqrt()
}

pub struct OptCompareSetup<'a> {
    pub map: &'a GridMap,
    pub n: usize,
    pub k: usize,
    pub ppvp_count: usize,
    pub opt_cfg: OptimConfig,
    pub threads: usize,
}

/// Full comparison for one instance seed: `K` homotopy-distinct plans vs
/// `ppvp_count` shuffled-priority plans, each smoothed; best final costs
/// compared (ties count as a win for both sides).
pub fn optimize_compare_instance(
    setup: &OptCompareSetup<'_>,
    instance_seed: u64,
) -> Result<OptCompareRow, PlanError> {
    let map = setup.map;
    let instance = gen_instance(map, setup.n, instance_seed)?;
    let cfg = PlannerConfig { k: setup.k, ..Default::default() };
    let ours = hrpp(map, &instance, &cfg)?;
    let mut ppvp_plans = Vec::with_capacity(setup.ppvp_count);
    for j in 0..setup.ppvp_count {
        ppvp_plans.push(ppvp_plan(map, &instance, instance_seed * 1000 + j as u64)?);
    }
    let ppvp_classes = {
        let mut states: Vec<_> = ppvp_plans.iter().map(|p| p.braid_state.clone()).collect();
        states.sort();
        states.dedup();
        states.len()
    };
    let gradient_rel_err = gradient_check(&ours.plans[0].paths, map, &setup.opt_cfg);

    let all_paths: Vec<Vec<Vec<crate::map::Cell>>> = ours
        .plans
        .iter()
        .map(|p| p.paths.clone())
        .chain(ppvp_plans.iter().map(|p| p.paths.clone()))
        .collect();
    let ours_count = ours.plans.len();
    let opt_cfg = setup.opt_cfg;
    let costs = run_parallel(all_paths, setup.threads, move |paths| {
        opt::optimize(&paths, map, &opt_cfg, 17).map(|r| r.final_cost).unwrap_or(f64::INFINITY)
    });
    let best_ours =
        costs[..ours_count].iter().copied().fold(f64::INFINITY, f64::min);
    let best_ppvp =
        costs[ours_count..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(OptCompareRow {
        instance_seed,
        best_ours,
        best_ppvp,
        ours_wins_or_ties: best_ours <= best_ppvp * (1.0 + 1e-9),
        gradient_rel_err,
        ours_classes: ours.plans.len(),
        ppvp_classes,
    })
}

/// Synthesizes the named benchmark-style empty map.
pub fn empty_map_named(width: u32, height: u32) -> GridMap {
    GridMap::empty(width, height)
}

/// Loads a Moving-AI map from disk.
pub fn load_map(path: &Path) -> Result<GridMap, MapError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MapError::BadHeader(format!("{}: {e}", path.display())))?;
    GridMap::parse(&text)
}
