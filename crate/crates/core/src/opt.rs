//! Continuous smoothing of grid plans.
//!
//! A plan is resampled into `L + 1` waypoints per agent and optimized
//! against a discretized squared-acceleration cost with reciprocal-
//! clearance penalties for agent pairs, obstacle components, and the outer
//! boundary. The loop is a damped least-squares descent (Marquardt
//! damping on the Gauss-Newton normal equations, banded by time slice)
//! with the penalty coefficient growing geometrically each iteration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::braid::{DynnikovState, Generator};
use crate::map::{Cell, GridMap, ObstacleComponent};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OptError {
    #[error("waypoint shape mismatch: {0}")]
    Shape(String),
    #[error("cost diverged to a non-finite value")]
    Diverged,
}

#[derive(Debug, Clone, Copy)]
pub struct OptimConfig {
    /// Number of segments `L`; each agent carries `L + 1` waypoints.
    pub samples: usize,
    /// Collision radius; agents need `2r` mutual clearance, `r` from
    /// obstacles and the boundary.
    pub radius: f64,
    pub cc_initial: f64,
    pub cc_growth: f64,
    pub steps: usize,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            samples: 50,
            radius: std::f64::consts::SQRT_2 / 4.0,
            cc_initial: 1e6,
            cc_growth: 1.001,
            steps: 2000,
            lambda_init: 1e-3,
            lambda_up: 2.0,
            lambda_down: 0.5,
        }
    }
}

impl OptimConfig {
    /// The full-scale preset: 100 segments, 10000 iterations.
    pub fn full_scale() -> Self {
        OptimConfig { samples: 100, steps: 10_000, ..OptimConfig::default() }
    }
}

/// `agents x (samples + 1)` planar points, agent-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Waypoints {
    pub agents: usize,
    pub samples: usize,
    pub points: Vec<[f64; 2]>,
}

impl Waypoints {
    pub fn at(&self, agent: usize, k: usize) -> [f64; 2] {
        self.points[agent * (self.samples + 1) + k]
    }

    fn at_mut(&mut self, agent: usize, k: usize) -> &mut [f64; 2] {
        &mut self.points[agent * (self.samples + 1) + k]
    }

    fn check(&self) -> Result<(), OptError> {
        if self.points.len() != self.agents * (self.samples + 1) {
            return Err(OptError::Shape(format!(
                "{} points for {} agents x {} samples",
                self.points.len(),
                self.agents,
                self.samples + 1
            )));
        }
        Ok(())
    }
}

/// Arc-length-uniform resampling of timed grid paths onto `L + 1`
/// waypoints per agent; waits contribute no length, endpoints are exact.
pub fn resample_plan(paths: &[Vec<Cell>], samples: usize) -> Waypoints {
    let mut points = Vec::with_capacity(paths.len() * (samples + 1));
    for path in paths {
        let pts: Vec<[f64; 2]> = path.iter().map(Cell::center).collect();
        let mut cum = vec![0.0f64];
        for w in pts.windows(2) {
            let d = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
            cum.push(cum.last().unwrap() + d);
        }
        let total = *cum.last().unwrap();
        for k in 0..=samples {
            if total == 0.0 {
                points.push(pts[0]);
                continue;
            }
            let target = total * k as f64 / samples as f64;
            let seg = cum.partition_point(|&c| c < target).clamp(1, pts.len() - 1);
            let (c0, c1) = (cum[seg - 1], cum[seg]);
            let alpha = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
            let (a, b) = (pts[seg - 1], pts[seg]);
            points.push([a[0] + alpha * (b[0] - a[0]), a[1] + alpha * (b[1] - a[1])]);
        }
    }
    Waypoints { agents: paths.len(), samples, points }
}

/// Euclidean distance from a point to the union of a component's blocked
/// unit squares (cells as unit boxes centered on their coordinates).
pub fn distance_to_obstacle(p: [f64; 2], comp: &ObstacleComponent) -> f64 {
    let mut best = f64::INFINITY;
    for c in &comp.cells {
        let dx = ((p[0] - c.col as f64).abs() - 0.5).max(0.0);
        let dy = ((p[1] - c.row as f64).abs() - 0.5).max(0.0);
        best = best.min((dx * dx + dy * dy).sqrt());
    }
    best
}

fn obstacle_gradient(p: [f64; 2], comp: &ObstacleComponent) -> ([f64; 2], f64) {
    let mut best = f64::INFINITY;
    let mut dir = [0.0, 0.0];
    for c in &comp.cells {
        let qx = p[0].clamp(c.col as f64 - 0.5, c.col as f64 + 0.5);
        let qy = p[1].clamp(c.row as f64 - 0.5, c.row as f64 + 0.5);
        let (dx, dy) = (p[0] - qx, p[1] - qy);
        let d = (dx * dx + dy * dy).sqrt();
        if d < best {
            best = d;
            dir = if d > 0.0 { [dx / d, dy / d] } else { [0.0, 0.0] };
        }
    }
    (dir, best)
}

/// Signed distance to the outer boundary rectangle: positive inside,
/// non-positive at or beyond the walls.
pub fn distance_to_boundary(p: [f64; 2], map: &GridMap) -> f64 {
    let (w, h) = (map.width() as f64, map.height() as f64);
    (p[0] + 0.5).min(w - 0.5 - p[0]).min(p[1] + 0.5).min(h - 0.5 - p[1])
}

fn boundary_gradient(p: [f64; 2], map: &GridMap) -> [f64; 2] {
    let (w, h) = (map.width() as f64, map.height() as f64);
    let candidates = [
        (p[0] + 0.5, [1.0, 0.0]),
        (w - 0.5 - p[0], [-1.0, 0.0]),
        (p[1] + 0.5, [0.0, 1.0]),
        (h - 0.5 - p[1], [0.0, -1.0]),
    ];
    candidates
        .iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .map(|&(_, g)| g)
        .unwrap()
}

fn ghost(w: &Waypoints, agent: usize, k: isize) -> [f64; 2] {
    let kk = k.clamp(0, w.samples as isize) as usize;
    w.at(agent, kk)
}

fn cost_terms(
    w: &Waypoints,
    map: &GridMap,
    cfg: &OptimConfig,
    cc: f64,
    mut grad: Option<&mut Vec<[f64; 2]>>,
) -> f64 {
    let l = w.samples;
    let lf = l as f64;
    let smooth_c = lf.powi(3) / 2.0;
    let pair_c = cc / lf;
    let mut total = 0.0;

    // Squared second differences with clamped ghost points.
    for i in 0..w.agents {
        for k in 0..=l {
            let (pm, p0, pp) =
                (ghost(w, i, k as isize - 1), w.at(i, k), ghost(w, i, k as isize + 1));
            let s = [pp[0] + pm[0] - 2.0 * p0[0], pp[1] + pm[1] - 2.0 * p0[1]];
            total += smooth_c * (s[0] * s[0] + s[1] * s[1]);
            if let Some(g) = grad.as_deref_mut() {
                let base = i * (l + 1);
                let mut add = |kk: isize, c: f64| {
                    let kk = kk.clamp(0, l as isize) as usize;
                    if kk != 0 && kk != l {
                        g[base + kk][0] += 2.0 * smooth_c * c * s[0];
                        g[base + kk][1] += 2.0 * smooth_c * c * s[1];
                    }
                };
                add(k as isize + 1, 1.0);
                add(k as isize - 1, 1.0);
                add(k as isize, -2.0);
            }
        }
    }

    // Agent-agent clearance penalties (ordered pairs count twice).
    for i in 0..w.agents {
        for j in i + 1..w.agents {
            for k in 0..=l {
                let (a, b) = (w.at(i, k), w.at(j, k));
                let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
                let d = (dx * dx + dy * dy).sqrt();
                if d == 0.0 {
                    return f64::INFINITY;
                }
                let phi = (1.0 / d - 1.0 / (2.0 * cfg.radius)).max(0.0);
                if phi > 0.0 {
                    total += 2.0 * pair_c * phi * phi;
                    if let Some(g) = grad.as_deref_mut() {
                        if k != 0 && k != l {
                            let scale = 2.0 * pair_c * 2.0 * phi * (-1.0 / (d * d * d));
                            g[i * (l + 1) + k][0] += scale * dx;
                            g[i * (l + 1) + k][1] += scale * dy;
                            g[j * (l + 1) + k][0] -= scale * dx;
                            g[j * (l + 1) + k][1] -= scale * dy;
                        }
                    }
                }
            }
        }
    }

    // Obstacle components and the boundary.
    for i in 0..w.agents {
        for k in 0..=l {
            let p = w.at(i, k);
            for comp in map.components() {
                let d = distance_to_obstacle(p, comp);
                if d <= 0.0 {
                    return f64::INFINITY;
                }
                let psi = (1.0 / d - 1.0 / cfg.radius).max(0.0);
                if psi > 0.0 {
                    total += pair_c * psi * psi;
                    if let Some(g) = grad.as_deref_mut() {
                        if k != 0 && k != l {
                            let (dir, dd) = obstacle_gradient(p, comp);
                            let scale = pair_c * 2.0 * psi * (-1.0 / (dd * dd));
                            g[i * (l + 1) + k][0] += scale * dir[0];
                            g[i * (l + 1) + k][1] += scale * dir[1];
                        }
                    }
                }
            }
            let d0 = distance_to_boundary(p, map);
            if d0 <= 0.0 {
                return f64::INFINITY;
            }
            let psi = (1.0 / d0 - 1.0 / cfg.radius).max(0.0);
            if psi > 0.0 {
                total += pair_c * psi * psi;
                if let Some(g) = grad.as_deref_mut() {
                    if k != 0 && k != l {
                        let dir = boundary_gradient(p, map);
                        let scale = pair_c * 2.0 * psi * (-1.0 / (d0 * d0));
                        g[i * (l + 1) + k][0] += scale * dir[0];
                        g[i * (l + 1) + k][1] += scale * dir[1];
                    }
                }
            }
        }
    }
    total
}

/// The discretized objective at the configured initial penalty weight.
pub fn cost(w: &Waypoints, map: &GridMap, cfg: &OptimConfig) -> f64 {
    cost_with_cc(w, map, cfg, cfg.cc_initial)
}

pub fn cost_with_cc(w: &Waypoints, map: &GridMap, cfg: &OptimConfig, cc: f64) -> f64 {
    w.check().expect("waypoint shape");
    cost_terms(w, map, cfg, cc, None)
}

/// Exact gradient of [`cost`] with respect to every waypoint; pinned
/// endpoints get zero.
pub fn grad(w: &Waypoints, map: &GridMap, cfg: &OptimConfig) -> Vec<[f64; 2]> {
    grad_with_cc(w, map, cfg, cfg.cc_initial)
}

pub fn grad_with_cc(w: &Waypoints, map: &GridMap, cfg: &OptimConfig, cc: f64) -> Vec<[f64; 2]> {
    w.check().expect("waypoint shape");
    let mut g = vec![[0.0, 0.0]; w.points.len()];
    cost_terms(w, map, cfg, cc, Some(&mut g));
    g
}

// ---------------------------------------------------------------------------
// Banded Gauss-Newton system
// ---------------------------------------------------------------------------

/// Symmetric banded matrix, lower-band storage.
struct Banded {
    n: usize,
    hw: usize,
    data: Vec<f64>, // data[r * (hw + 1) + d] = A[r][r - d]
}

impl Banded {
    fn zeros(n: usize, hw: usize) -> Self {
        Banded { n, hw, data: vec![0.0; n * (hw + 1)] }
    }

    fn add(&mut self, r: usize, c: usize, v: f64) {
        let (hi, lo) = if r >= c { (r, c) } else { (c, r) };
        let d = hi - lo;
        debug_assert!(d <= self.hw);
        self.data[hi * (self.hw + 1) + d] += v;
    }

    fn get(&self, r: usize, c: usize) -> f64 {
        let (hi, lo) = if r >= c { (r, c) } else { (c, r) };
        let d = hi - lo;
        if d > self.hw {
            0.0
        } else {
            self.data[hi * (self.hw + 1) + d]
        }
    }

    /// Banded Cholesky; `None` when the matrix is not positive definite.
    fn cholesky(&self) -> Option<Banded> {
        let mut l = Banded::zeros(self.n, self.hw);
        for j in 0..self.n {
            let lo = j.saturating_sub(self.hw);
            let mut diag = self.get(j, j);
            for k in lo..j {
                let v = l.get(j, k);
                diag -= v * v;
            }
            if diag <= 1e-300 || !diag.is_finite() {
                return None;
            }
            let dsq = diag.sqrt();
            l.add(j, j, dsq);
            let hi = (j + self.hw).min(self.n - 1);
            for i in j + 1..=hi {
                let mut v = self.get(i, j);
                let lo2 = i.saturating_sub(self.hw).max(lo);
                for k in lo2..j {
                    v -= l.get(i, k) * l.get(j, k);
                }
                l.add(i, j, v / dsq);
            }
        }
        Some(l)
    }

    /// Solves `L L^T x = b` given the Cholesky factor.
    fn solve_with(l: &Banded, b: &[f64]) -> Vec<f64> {
        let n = l.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(l.hw);
            let mut v = b[i];
            for k in lo..i {
                v -= l.get(i, k) * y[k];
            }
            y[i] = v / l.get(i, i);
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let hi = (i + l.hw).min(n - 1);
            let mut v = y[i];
            for k in i + 1..=hi {
                v -= l.get(k, i) * x[k];
            }
            x[i] = v / l.get(i, i);
        }
        x
    }
}

/// Variable index of interior waypoint `(agent, k)` coordinate `c`,
/// time-major so the normal matrix is banded.
fn var_index(n_agents: usize, agent: usize, k: usize, c: usize) -> usize {
    ((k - 1) * n_agents + agent) * 2 + c
}

struct Normals {
    a: Banded,
    g: Vec<f64>,
}

/// Accumulates one residual block into the normal equations.
fn accumulate(normals: &mut Normals, residual: &[f64], cols: &[usize], jac: &[Vec<f64>]) {
    for (ri, r) in residual.iter().enumerate() {
        for (ci, &c) in cols.iter().enumerate() {
            let jrc = jac[ri][ci];
            if jrc == 0.0 {
                continue;
            }
            normals.g[c] += jrc * r;
            for (ci2, &c2) in cols.iter().enumerate().take(ci + 1) {
                let j2 = jac[ri][ci2];
                if j2 != 0.0 {
                    normals.a.add(c, c2, jrc * j2);
                }
            }
        }
    }
}

fn build_normals(w: &Waypoints, map: &GridMap, cfg: &OptimConfig, cc: f64) -> Normals {
    let n = w.agents;
    let l = w.samples;
    let nvars = n * l.saturating_sub(1) * 2;
    let hw = (6 * n).saturating_sub(1).min(nvars.saturating_sub(1));
    let mut normals = Normals { a: Banded::zeros(nvars.max(1), hw), g: vec![0.0; nvars.max(1)] };
    if nvars == 0 {
        return normals;
    }
    let lf = l as f64;
    let sw = (lf.powi(3) / 2.0).sqrt();
    let pw = (2.0 * cc / lf).sqrt();
    let ow = (cc / lf).sqrt();

    for i in 0..n {
        for k in 0..=l {
            let (pm, p0, pp) =
                (ghost(w, i, k as isize - 1), w.at(i, k), ghost(w, i, k as isize + 1));
            let s = [
                sw * (pp[0] + pm[0] - 2.0 * p0[0]),
                sw * (pp[1] + pm[1] - 2.0 * p0[1]),
            ];
            let mut coeff: Vec<(usize, f64)> = Vec::with_capacity(3);
            let mut add_coeff = |kk: isize, c: f64| {
                let kk = kk.clamp(0, l as isize) as usize;
                if kk != 0 && kk != l {
                    if let Some(e) = coeff.iter_mut().find(|e| e.0 == kk) {
                        e.1 += c;
                    } else {
                        coeff.push((kk, c));
                    }
                }
            };
            add_coeff(k as isize + 1, 1.0);
            add_coeff(k as isize - 1, 1.0);
            add_coeff(k as isize, -2.0);
            if coeff.is_empty() {
                continue;
            }
            for c in 0..2 {
                let cols: Vec<usize> =
                    coeff.iter().map(|&(kk, _)| var_index(n, i, kk, c)).collect();
                let jac = vec![coeff.iter().map(|&(_, v)| sw * v).collect::<Vec<f64>>()];
                accumulate(&mut normals, &[s[c]], &cols, &jac);
            }
        }
    }

    for i in 0..n {
        for j in i + 1..n {
            for k in 1..l {
                let (a, b) = (w.at(i, k), w.at(j, k));
                let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
                let d = (dx * dx + dy * dy).sqrt();
                if d == 0.0 {
                    continue;
                }
                let phi = (1.0 / d - 1.0 / (2.0 * cfg.radius)).max(0.0);
                if phi <= 0.0 {
                    continue;
                }
                let r = pw * phi;
                let s = pw * (-1.0 / (d * d * d));
                let cols = vec![
                    var_index(n, i, k, 0),
                    var_index(n, i, k, 1),
                    var_index(n, j, k, 0),
                    var_index(n, j, k, 1),
                ];
                let jac = vec![vec![s * dx, s * dy, -s * dx, -s * dy]];
                accumulate(&mut normals, &[r], &cols, &jac);
            }
        }
    }

    for i in 0..n {
        for k in 1..l {
            let p = w.at(i, k);
            for comp in map.components() {
                let (dir, d) = obstacle_gradient(p, comp);
                if d <= 0.0 {
                    continue;
                }
                let psi = (1.0 / d - 1.0 / cfg.radius).max(0.0);
                if psi <= 0.0 {
                    continue;
                }
                let r = ow * psi;
                let s = ow * (-1.0 / (d * d));
                let cols = vec![var_index(n, i, k, 0), var_index(n, i, k, 1)];
                let jac = vec![vec![s * dir[0], s * dir[1]]];
                accumulate(&mut normals, &[r], &cols, &jac);
            }
            let d0 = distance_to_boundary(p, map);
            if d0 > 0.0 {
                let psi = (1.0 / d0 - 1.0 / cfg.radius).max(0.0);
                if psi > 0.0 {
                    let dir = boundary_gradient(p, map);
                    let r = ow * psi;
                    let s = ow * (-1.0 / (d0 * d0));
                    let cols = vec![var_index(n, i, k, 0), var_index(n, i, k, 1)];
                    let jac = vec![vec![s * dir[0], s * dir[1]]];
                    accumulate(&mut normals, &[r], &cols, &jac);
                }
            }
        }
    }
    normals
}

#[derive(Debug)]
pub struct OptimResult {
    pub waypoints: Waypoints,
    /// Cost at the final penalty weight.
    pub final_cost: f64,
    /// Accepted cost per iteration, at that iteration's penalty weight.
    pub trace: Vec<f64>,
}

/// Runs the damped least-squares loop from a grid plan. The seed only
/// breaks exact waypoint coincidences in the resampled initialization.
pub fn optimize(
    paths: &[Vec<Cell>],
    map: &GridMap,
    cfg: &OptimConfig,
    seed: u64,
) -> Result<OptimResult, OptError> {
    let w = resample_plan(paths, cfg.samples);
    optimize_from(w, map, cfg, seed)
}

pub fn optimize_from(
    mut w: Waypoints,
    map: &GridMap,
    cfg: &OptimConfig,
    seed: u64,
) -> Result<OptimResult, OptError> {
    w.check()?;
    let l = w.samples;
    let mut cc = cfg.cc_initial;
    let mut cost_cur = cost_terms(&w, map, cfg, cc, None);
    if !cost_cur.is_finite() {
        // Resampling can make waypoints coincide exactly; nudge the
        // interior until the penalties are finite.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut magnitude = 1e-3;
        for _ in 0..100 {
            for i in 0..w.agents {
                for k in 1..l {
                    let p = w.at_mut(i, k);
                    p[0] += rng.random_range(-magnitude..magnitude);
                    p[1] += rng.random_range(-magnitude..magnitude);
                }
            }
            cost_cur = cost_terms(&w, map, cfg, cc, None);
            if cost_cur.is_finite() {
                break;
            }
            magnitude *= 2.0;
        }
        if !cost_cur.is_finite() {
            return Err(OptError::Diverged);
        }
    }

    let mut lambda = cfg.lambda_init;
    let mut trace = Vec::with_capacity(cfg.steps);
    let nvars = w.agents * l.saturating_sub(1) * 2;
    for _ in 0..cfg.steps {
        if nvars > 0 {
            let normals = build_normals(&w, map, cfg, cc);
            let max_diag =
                (0..nvars).map(|i| normals.a.get(i, i)).fold(0.0f64, f64::max).max(1e-12);
            for _ in 0..60 {
                let mut damped = Banded {
                    n: normals.a.n,
                    hw: normals.a.hw,
                    data: normals.a.data.clone(),
                };
                for i in 0..nvars {
                    let d = normals.a.get(i, i);
                    damped.add(i, i, lambda * d.max(1e-12 * max_diag) + 1e-12 * max_diag);
                }
                let delta = match damped.cholesky() {
                    Some(f) => Banded::solve_with(&f, &normals.g),
                    // Ill-conditioned system: scaled gradient step instead.
                    None => normals.g.iter().map(|g| g / (max_diag * (1.0 + lambda))).collect(),
                };
                let mut w_try = w.clone();
                for i in 0..w.agents {
                    for k in 1..l {
                        for c in 0..2 {
                            w_try.at_mut(i, k)[c] -= delta[var_index(w.agents, i, k, c)];
                        }
                    }
                }
                let c_try = cost_terms(&w_try, map, cfg, cc, None);
                if c_try.is_finite() && c_try <= cost_cur {
                    w = w_try;
                    cost_cur = c_try;
                    lambda = (lambda * cfg.lambda_down).max(1e-15);
                    break;
                }
                lambda = (lambda * cfg.lambda_up).min(1e15);
            }
        }
        trace.push(cost_cur);
        cc *= cfg.cc_growth;
        cost_cur = cost_terms(&w, map, cfg, cc, None);
        if !cost_cur.is_finite() {
            return Err(OptError::Diverged);
        }
    }
    Ok(OptimResult { waypoints: w, final_cost: cost_cur, trace })
}

// ---------------------------------------------------------------------------
// Continuous crossing sweep (soft homotopy check)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HomotopyCheck {
    Preserved,
    Changed,
    /// Crossings too degenerate to classify (tangencies or coincidences).
    Indeterminate,
}

/// Braid word of continuous trajectories by the same inclined-key sweep,
/// in floating point. `None` when a crossing is numerically degenerate.
pub fn continuous_crossing_word(w: &Waypoints, map: &GridMap) -> Option<Vec<Generator>> {
    let m_scale = map.key_scale() as f64;
    let reps: Vec<[f64; 2]> =
        map.components().iter().map(|c| c.representative.center()).collect();
    let strands = reps.len() + w.agents;
    let key_of = |p: [f64; 2]| p[0] * m_scale + p[1];
    let pos = |s: usize, k: usize| -> [f64; 2] {
        if s < reps.len() {
            reps[s]
        } else {
            w.at(s - reps.len(), k)
        }
    };
    const EPS: f64 = 1e-9;
    let mut word = Vec::new();
    let mut order: Vec<usize> = (0..strands).collect();
    order.sort_by(|&a, &b| key_of(pos(a, 0)).partial_cmp(&key_of(pos(b, 0))).unwrap());
    let mut rank_of = vec![0usize; strands];
    for (r, &s) in order.iter().enumerate() {
        rank_of[s] = r;
    }
    for k in 0..w.samples {
        let mut events: Vec<(f64, usize, usize, i8)> = Vec::new();
        for a in 0..strands {
            for b in a + 1..strands {
                let (ka0, ka1) = (key_of(pos(a, k)), key_of(pos(a, k + 1)));
                let (kb0, kb1) = (key_of(pos(b, k)), key_of(pos(b, k + 1)));
                let (g0, g1) = (kb0 - ka0, kb1 - ka1);
                if g0.abs() < EPS || g1.abs() < EPS {
                    return None;
                }
                if g0.signum() == g1.signum() {
                    continue;
                }
                let t = g0 / (g0 - g1);
                let (lo, hi) = if g0 > 0.0 { (a, b) } else { (b, a) };
                let ylo = pos(lo, k)[1] + (pos(lo, k + 1)[1] - pos(lo, k)[1]) * t;
                let yhi = pos(hi, k)[1] + (pos(hi, k + 1)[1] - pos(hi, k)[1]) * t;
                if (ylo - yhi).abs() < EPS {
                    return None;
                }
                events.push((t, lo, hi, if ylo < yhi { 1 } else { -1 }));
            }
        }
        events.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut i = 0;
        while i < events.len() {
            let mut j = i + 1;
            while j < events.len() && (events[j].0 - events[i].0).abs() < EPS {
                j += 1;
            }
            let mut pending: Vec<(f64, usize, usize, i8)> = events[i..j].to_vec();
            while !pending.is_empty() {
                let mut pick = None;
                let mut pick_rank = usize::MAX;
                for (idx, e) in pending.iter().enumerate() {
                    let (ra, rb) = (rank_of[e.1], rank_of[e.2]);
                    if ra + 1 == rb && ra < pick_rank {
                        pick = Some(idx);
                        pick_rank = ra;
                    }
                }
                let idx = pick?;
                let e = pending.swap_remove(idx);
                word.push(Generator { index: pick_rank + 1, sign: e.3 });
                rank_of.swap(e.1, e.2);
            }
            i = j;
        }
    }
    Some(word)
}

/// Compares the crossing-sweep braid of optimized trajectories against a
/// reference state. Soft: reports, never asserts.
pub fn homotopy_check(
    reference: Option<&DynnikovState>,
    w: &Waypoints,
    map: &GridMap,
) -> HomotopyCheck {
    let strands = map.components().len() + w.agents;
    let Some(word) = continuous_crossing_word(w, map) else {
        return HomotopyCheck::Indeterminate;
    };
    if strands < 2 {
        return HomotopyCheck::Preserved;
    }
    let mut state = DynnikovState::identity(strands).expect("strands >= 2");
    for g in word {
        if state.apply_mut(g).is_err() {
            return HomotopyCheck::Indeterminate;
        }
    }
    match reference {
        Some(r) if *r == state => HomotopyCheck::Preserved,
        Some(_) => HomotopyCheck::Changed,
        None => HomotopyCheck::Indeterminate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::Instance;

    fn straight_paths(spec: &[((u32, u32), (u32, u32))]) -> Vec<Vec<Cell>> {
        // Horizontal-then-vertical grid paths.
        spec.iter()
            .map(|&((sc, sr), (gc, gr))| {
                let mut path = vec![Cell::new(sc, sr)];
                let mut c = sc as i64;
                let mut r = sr as i64;
                while c != gc as i64 {
                    c += (gc as i64 - c).signum();
                    path.push(Cell::new(c as u32, r as u32));
                }
                while r != gr as i64 {
                    r += (gr as i64 - r).signum();
                    path.push(Cell::new(c as u32, r as u32));
                }
                path
            })
            .collect()
    }

    #[test]
    fn stationary_agent_has_zero_cost() {
        let map = GridMap::empty(8, 8);
        let cfg = OptimConfig { samples: 10, ..OptimConfig::default() };
        let w = resample_plan(&[vec![Cell::new(3, 3); 4]], cfg.samples);
        assert_eq!(cost(&w, &map, &cfg), 0.0);
        assert!(grad(&w, &map, &cfg).iter().all(|g| g[0] == 0.0 && g[1] == 0.0));
    }

    #[test]
    fn far_apart_stationary_pair_costs_zero() {
        let map = GridMap::empty(10, 10);
        let cfg = OptimConfig { samples: 8, ..OptimConfig::default() };
        let w = resample_plan(&[vec![Cell::new(1, 1); 3], vec![Cell::new(8, 8); 3]], cfg.samples);
        assert_eq!(cost(&w, &map, &cfg), 0.0);
    }

    #[test]
    fn hand_evaluated_smoothness() {
        // One agent, L = 2, p = ((0,0),(1,0),(2,0)): cost = 4 * (1 + 0 + 1).
        let map = GridMap::empty(8, 8);
        let cfg = OptimConfig { samples: 2, ..OptimConfig::default() };
        let w = Waypoints {
            agents: 1,
            samples: 2,
            points: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
        };
        assert!((cost(&w, &map, &cfg) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_waypoints_are_infinite() {
        let map = GridMap::empty(8, 8);
        let cfg = OptimConfig { samples: 2, ..OptimConfig::default() };
        let w = Waypoints {
            agents: 2,
            samples: 2,
            points: vec![
                [1.0, 1.0],
                [2.0, 2.0],
                [3.0, 3.0],
                [5.0, 5.0],
                [2.0, 2.0],
                [6.0, 6.0],
            ],
        };
        assert_eq!(cost(&w, &map, &cfg), f64::INFINITY);
    }

    #[test]
    fn obstacle_distance_examples() {
        let map = GridMap::parse(
            "type octile\nheight 5\nwidth 5\nmap\n.....\n.....\n..@..\n.....\n.....\n",
        )
        .unwrap();
        let comp = &map.components()[0];
        // Center of a cell two columns away: edge-to-center distance 1.5.
        assert!((distance_to_obstacle([4.0, 2.0], comp) - 1.5).abs() < 1e-12);
        assert_eq!(distance_to_obstacle([2.5, 2.0], comp), 0.0);
        let empty = GridMap::empty(5, 5);
        assert!(empty.components().is_empty());
        assert!((distance_to_boundary([2.0, 2.0], &empty) - 2.5).abs() < 1e-12);
        assert!((distance_to_boundary([0.0, 2.0], &empty) - 0.5).abs() < 1e-12);
    }

    fn finite_difference(
        w: &Waypoints,
        map: &GridMap,
        cfg: &OptimConfig,
        cc: f64,
    ) -> Vec<[f64; 2]> {
        let mut g = vec![[0.0, 0.0]; w.points.len()];
        let h = 1e-6;
        for i in 0..w.agents {
            for k in 1..w.samples {
                for c in 0..2 {
                    let mut wp = w.clone();
                    wp.at_mut(i, k)[c] += h;
                    let mut wm = w.clone();
                    wm.at_mut(i, k)[c] -= h;
                    g[i * (w.samples + 1) + k][c] =
                        (cost_with_cc(&wp, map, cfg, cc) - cost_with_cc(&wm, map, cfg, cc))
                            / (2.0 * h);
                }
            }
        }
        g
    }

    fn rel_err(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
        let num: f64 =
            a.iter().zip(b).map(|(x, y)| (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y[0] * y[0] + y[1] * y[1]).sum();
        (num / den.max(1e-30)).sqrt()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let map = GridMap::parse(
            "type octile\nheight 6\nwidth 6\nmap\n......\n......\n..@@..\n......\n......\n......\n",
        )
        .unwrap();
        let cfg = OptimConfig { samples: 6, radius: 0.45, ..OptimConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        for case in 0..60 {
            let agents = 1 + case % 3;
            let mut points = Vec::new();
            for _ in 0..agents {
                for _ in 0..=cfg.samples {
                    // Anywhere strictly outside the obstacle boxes, so both
                    // active and inactive penalty branches get exercised.
                    let p = loop {
                        let cand: [f64; 2] =
                            [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)];
                        let clear = map
                            .components()
                            .iter()
                            .all(|c| distance_to_obstacle(cand, c) > 0.05);
                        if clear && distance_to_boundary(cand, &map) > 0.05 {
                            break cand;
                        }
                    };
                    points.push(p);
                }
            }
            let w = Waypoints { agents, samples: cfg.samples, points };
            let cc = if case % 2 == 0 { 1e3 } else { 0.0 };
            if !cost_with_cc(&w, &map, &cfg, cc).is_finite() {
                continue;
            }
            let ga = grad_with_cc(&w, &map, &cfg, cc);
            let gf = finite_difference(&w, &map, &cfg, cc);
            assert!(
                rel_err(&ga, &gf) <= 1e-4,
                "case {case}: relative error {}",
                rel_err(&ga, &gf)
            );
            checked += 1;
        }
        assert!(checked >= 50, "only {checked} finite configurations");
    }

    #[test]
    fn smoothness_gradient_is_translation_invariant() {
        let map = GridMap::empty(20, 20);
        let cfg = OptimConfig { samples: 8, ..OptimConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut points = Vec::new();
        for _ in 0..=cfg.samples {
            points.push([rng.random_range(5.0..9.0), rng.random_range(5.0..9.0)]);
        }
        let w = Waypoints { agents: 1, samples: cfg.samples, points };
        let g = grad_with_cc(&w, &map, &cfg, 0.0);
        let mut shifted = w.clone();
        for p in &mut shifted.points {
            p[0] += 0.25;
            p[1] -= 0.125;
        }
        let g2 = grad_with_cc(&shifted, &map, &cfg, 0.0);
        for (x, y) in g.iter().zip(&g2) {
            assert!((x[0] - y[0]).abs() < 1e-9 && (x[1] - y[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn accepted_steps_never_increase_cost() {
        let map = GridMap::empty(10, 10);
        let cfg = OptimConfig { samples: 12, steps: 120, ..OptimConfig::default() };
        let paths = straight_paths(&[((0, 2), (9, 2)), ((0, 7), (9, 7))]);
        let out = optimize(&paths, &map, &cfg, 1).unwrap();
        // Penalties stay inactive here, so the per-iteration accepted cost
        // never rises even as the penalty weight grows.
        for w in out.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "trace increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn crossing_agents_separate_and_keep_class() {
        let map = GridMap::empty(9, 9);
        let cfg = OptimConfig { samples: 24, steps: 300, ..OptimConfig::default() };
        let inst = Instance {
            starts: vec![Cell::new(0, 4), Cell::new(8, 4)],
            goals: vec![Cell::new(8, 4), Cell::new(0, 4)],
        };
        let plan = crate::planner::hrpp(
            &map,
            &inst,
            &crate::planner::PlannerConfig { k: 2, ..Default::default() },
        )
        .unwrap();
        assert_eq!(plan.plans.len(), 2);
        for p in &plan.plans {
            let out = optimize(&p.paths, &map, &cfg, 9).unwrap();
            assert!(out.final_cost.is_finite());
            let mut min_d = f64::INFINITY;
            for k in 0..=cfg.samples {
                let (a, b) = (out.waypoints.at(0, k), out.waypoints.at(1, k));
                min_d = min_d.min(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
            assert!(min_d > 1.6 * cfg.radius, "agents remained too close: {min_d}");
            let check = homotopy_check(p.braid_state.as_ref(), &out.waypoints, &map);
            assert_eq!(check, HomotopyCheck::Preserved);
        }
    }

    #[test]
    fn resampling_is_arc_length_uniform() {
        let paths = straight_paths(&[((0, 0), (4, 0))]);
        let w = resample_plan(&paths, 8);
        for k in 0..=8 {
            let p = w.at(0, k);
            assert!((p[0] - 4.0 * k as f64 / 8.0).abs() < 1e-12);
            assert_eq!(p[1], 0.0);
        }
        // Waits add no length.
        let w2 = resample_plan(&[vec![Cell::new(2, 2); 5]], 4);
        for k in 0..=4 {
            assert_eq!(w2.at(0, k), [2.0, 2.0]);
        }
    }
}
