//! Root search for `zbar(T; zbar0) = conj(z_f)`: grid seeding, Newton
//! refinement with the co-integrated tangent matrix, and continuation in `tau`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, HamiltonianKind};
use crate::spin::{SpinContext, C64};
use crate::trajectory::{integrate, Boundary, Trajectory, TrajectoryOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Grid center; `None` uses `conj(z_i)`.
    pub center: Option<C64>,
    /// Grid half-width; `None` uses `3 |z_i| + 1`.
    pub half_width: Option<f64>,
    pub spacing: f64,
    pub capture_radius: f64,
    /// Also seed from grid nodes where `|F|` is a local minimum.
    pub local_minima: bool,
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Iteration cap for the corrector during continuation.
    pub max_newton_trace: usize,
    pub dedup_radius: f64,
    /// Scaled times at which the grid is seeded; empty picks four points
    /// spread over the window.
    pub seed_taus: Vec<f64>,
    /// Grid nodes with `|1 + z_i zbar0|` below this are skipped.
    pub pole_margin: f64,
    /// `|M_zbarzbar|` below this marks a sample caustic-near.
    pub caustic_threshold: f64,
    /// `|M_zbarzbar|` below this aborts a Newton iteration.
    pub caustic_reject: f64,
    pub max_halvings: usize,
    /// Largest accepted corrector displacement, relative to `1 + |zbar0|`.
    pub max_jump: f64,
    /// Seed from the `J_z^2` frequency condition as well as the grid.
    pub frequency_seeds: bool,
    /// Largest `|n|` of `Re(omega tau) ~ 2 pi n` used for frequency seeds;
    /// `None` uses `2j`.
    pub frequency_max_n: Option<usize>,
    /// Drop roots whose `J_z^2` frequency is the `-omega` member of a pair
    /// (equator doubling counts the `+omega` member twice).
    pub canonical_frequencies: bool,
    /// ODE tolerance for evaluating grid residuals (never tighter than the
    /// problem tolerance).
    pub seed_tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            center: None,
            half_width: None,
            spacing: 0.05,
            capture_radius: 0.1,
            local_minima: true,
            newton_tol: 1e-10,
            max_newton: 30,
            max_newton_trace: 8,
            dedup_radius: 1e-6,
            seed_taus: Vec::new(),
            pole_margin: 0.05,
            caustic_threshold: 1e-6,
            caustic_reject: 1e-8,
            max_halvings: 6,
            max_jump: 0.1,
            frequency_seeds: false,
            frequency_max_n: None,
            canonical_frequencies: false,
            seed_tol: 1e-8,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if !(self.spacing > 0.0) {
            return bad("grid spacing must be positive");
        }
        if !(self.capture_radius >= self.newton_tol) {
            return bad("capture radius must be at least the newton tolerance");
        }
        if !(self.newton_tol > 0.0) || self.max_newton == 0 {
            return bad("newton tolerance and iteration cap must be positive");
        }
        if let Some(w) = self.half_width {
            if !(w > 0.0) {
                return bad("grid half-width must be positive");
            }
        }
        if self.seed_taus.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return bad("seed taus must be finite and non-negative");
        }
        Ok(())
    }
}

/// One root-finding problem family: fixed Hamiltonian and endpoints, free `tau`.
#[derive(Debug, Clone, Copy)]
pub struct RootProblem<'a> {
    pub ham: &'a Hamiltonian,
    pub z_i: C64,
    pub z_f: C64,
    pub opts: TrajectoryOptions,
}

impl<'a> RootProblem<'a> {
    pub fn new(ham: &'a Hamiltonian, z_i: C64, z_f: C64, opts: TrajectoryOptions) -> Result<Self> {
        if !(ham.nu() > 0.0) {
            return Err(Error::InvalidArgument(
                "root search needs nu > 0 so that tau and T share a sign".to_string(),
            ));
        }
        Ok(Self {
            ham,
            z_i,
            z_f,
            opts,
        })
    }

    pub fn ctx(&self) -> &SpinContext {
        self.ham.ctx()
    }

    pub fn zbar_f(&self) -> C64 {
        self.z_f.conj()
    }

    pub fn boundary(&self) -> Boundary {
        Boundary::new(self.z_i, self.z_f)
    }

    /// Physical time for a scaled time.
    pub fn time(&self, tau: f64) -> f64 {
        tau / (self.ctx().hbar() * self.ham.nu())
    }

    pub fn solve(&self, zbar0: C64, tau: f64) -> Result<Trajectory> {
        integrate(
            self.ham,
            self.z_i,
            zbar0,
            self.time(tau),
            &self.opts,
            self.boundary(),
        )
    }

    pub fn residual(&self, traj: &Trajectory) -> C64 {
        traj.zbar_t - self.zbar_f()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SampleFlags {
    pub caustic_near: bool,
    pub energy_drift: bool,
}

impl SampleFlags {
    pub fn label(&self) -> &'static str {
        match (self.caustic_near, self.energy_drift) {
            (false, false) => "ok",
            (true, false) => "caustic-near",
            (false, true) => "energy-drift",
            (true, true) => "caustic-near|energy-drift",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSample {
    /// Index into the tau grid the branch was traced on.
    pub index: usize,
    pub tau: f64,
    pub zbar0: C64,
    pub traj: Trajectory,
    pub flags: SampleFlags,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: usize,
    pub samples: Vec<BranchSample>,
}

impl Branch {
    pub fn sample_at(&self, index: usize) -> Option<&BranchSample> {
        self.samples
            .binary_search_by_key(&index, |s| s.index)
            .ok()
            .map(|k| &self.samples[k])
    }

    pub fn tau_range(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.tau, self.samples.last()?.tau))
    }
}

/// Newton iteration on `F(zbar0) = zbar(T) - conj(z_f)` with `dF/dzbar0 =
/// M_zbarzbar` and backtracking on `|F|`.
pub fn refine_root(
    problem: &RootProblem,
    tau: f64,
    guess: C64,
    cfg: &SearchConfig,
) -> Result<(C64, Trajectory)> {
    if !(guess.re.is_finite() && guess.im.is_finite()) {
        return Err(Error::InvalidArgument(
            "non-finite newton guess".to_string(),
        ));
    }
    let mut z = guess;
    let mut traj = problem.solve(z, tau)?;
    let mut f = problem.residual(&traj);
    for it in 0..cfg.max_newton {
        let m = traj.m_zbarzbar();
        if m.norm() < cfg.caustic_reject {
            return Err(Error::Caustic { m: m.norm() });
        }
        if f.norm() <= cfg.newton_tol {
            return Ok((z, traj));
        }
        let mut delta = -f / m;
        let cap = 0.5 * (1.0 + z.norm());
        if delta.norm() > cap {
            delta *= cap / delta.norm();
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..10 {
            let trial = z + lambda * delta;
            if let Ok(t) = problem.solve(trial, tau) {
                let ft = problem.residual(&t);
                if ft.norm() < f.norm() {
                    z = trial;
                    traj = t;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            // the integrator's own error floors |F|; accept a stalled iterate
            // that is already close
            if f.norm() <= 10.0 * cfg.newton_tol {
                return Ok((z, traj));
            }
            return Err(Error::NoConvergence {
                iterations: it + 1,
                residual: f.norm(),
            });
        }
    }
    if f.norm() <= cfg.newton_tol && traj.m_zbarzbar().norm() >= cfg.caustic_reject {
        return Ok((z, traj));
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_newton,
        residual: f.norm(),
    })
}

/// Grid nodes around the configured center that are not too close to the pole.
fn grid_nodes(problem: &RootProblem, cfg: &SearchConfig) -> (Vec<C64>, usize) {
    let center = cfg.center.unwrap_or_else(|| problem.z_i.conj());
    let half = cfg.half_width.unwrap_or(3.0 * problem.z_i.norm() + 1.0);
    let n = (half / cfg.spacing).floor() as i64;
    let side = (2 * n + 1) as usize;
    let mut nodes = Vec::with_capacity(side * side);
    for b in -n..=n {
        for a in -n..=n {
            nodes.push(center + C64::new(a as f64, b as f64) * cfg.spacing);
        }
    }
    (nodes, side)
}

/// Candidate initial conditions at `tau`: grid nodes whose residual is within
/// the capture radius or, optionally, a local minimum over the 8 neighbours.
pub fn seed_roots(problem: &RootProblem, tau: f64, cfg: &SearchConfig) -> Vec<C64> {
    let (nodes, side) = grid_nodes(problem, cfg);
    let mut coarse = *problem;
    coarse.opts.tol = cfg.seed_tol.clamp(problem.opts.tol, 1e-6);
    let problem = &coarse;
    let residuals: Vec<f64> = nodes
        .par_iter()
        .map(|&zb| {
            if (1.0 + problem.z_i * zb).norm() < cfg.pole_margin {
                return f64::INFINITY;
            }
            match problem.solve(zb, tau) {
                Ok(t) if !t.energy_drift => problem.residual(&t).norm(),
                _ => f64::INFINITY,
            }
        })
        .collect();
    let mut out = Vec::new();
    for row in 0..side {
        for col in 0..side {
            let k = row * side + col;
            let r = residuals[k];
            if !r.is_finite() {
                continue;
            }
            let mut keep = r < cfg.capture_radius;
            if !keep && cfg.local_minima {
                keep = true;
                'nb: for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let (rr, cc) = (row as i64 + dr, col as i64 + dc);
                        if rr < 0 || cc < 0 || rr >= side as i64 || cc >= side as i64 {
                            keep = false;
                            break 'nb;
                        }
                        if residuals[rr as usize * side + cc as usize] <= r {
                            keep = false;
                            break 'nb;
                        }
                    }
                }
            }
            if keep {
                out.push(nodes[k]);
            }
        }
    }
    out
}

/// Radius within which two roots at the same `tau` are the same root.
fn match_radius(cfg: &SearchConfig, traj: &Trajectory) -> f64 {
    let m = traj.m_zbarzbar().norm().max(1e-300);
    cfg.dedup_radius.max(10.0 * cfg.newton_tol / m)
}

fn dedup_roots(roots: Vec<(C64, Trajectory)>, cfg: &SearchConfig) -> Vec<(C64, Trajectory)> {
    let mut out: Vec<(C64, Trajectory)> = Vec::new();
    for (z, t) in roots {
        let r = match_radius(cfg, &t);
        if !out.iter().any(|(w, _)| (w - z).norm() < r) {
            out.push((z, t));
        }
    }
    out
}

/// Seeds and refines all roots at one `tau`.
pub fn find_roots(problem: &RootProblem, tau: f64, cfg: &SearchConfig) -> Vec<(C64, Trajectory)> {
    let mut seeds = seed_roots(problem, tau, cfg);
    if cfg.frequency_seeds {
        seeds.extend(frequency_seeds(problem, tau, cfg));
    }
    let refined: Vec<(C64, Trajectory)> = seeds
        .par_iter()
        .filter_map(|&g| refine_root(problem, tau, g, cfg).ok())
        .filter(|(z, _)| !cfg.canonical_frequencies || is_canonical_root(problem, *z))
        .collect();
    dedup_roots(refined, cfg)
}

fn flags_for(traj: &Trajectory, cfg: &SearchConfig) -> SampleFlags {
    SampleFlags {
        caustic_near: traj.m_zbarzbar().norm() < cfg.caustic_threshold,
        energy_drift: traj.energy_drift,
    }
}

/// Predictor-corrector step from the last sample to `target`, halving the
/// step on failure. Returns `None` when the branch cannot be continued.
fn advance(
    problem: &RootProblem,
    cfg: &SearchConfig,
    prev: Option<(f64, C64)>,
    cur: (f64, C64),
    target: f64,
) -> Option<(C64, Trajectory)> {
    let corrector = SearchConfig {
        max_newton: cfg.max_newton_trace.min(cfg.max_newton).max(1),
        ..cfg.clone()
    };
    let cfg = &corrector;
    let (mut p, mut c) = (prev, cur);
    let mut step = target - c.0;
    let min_step = step.abs() / f64::powi(2.0, cfg.max_halvings as i32);
    loop {
        let remaining = target - c.0;
        let tn = if remaining.abs() <= step.abs() * (1.0 + 1e-12) {
            target
        } else {
            c.0 + step
        };
        let pred = match p {
            Some((tp, zp)) if (c.0 - tp).abs() > 0.0 => {
                c.1 + (c.1 - zp) * ((tn - c.0) / (c.0 - tp))
            }
            _ => c.1,
        };
        let ok = refine_root(problem, tn, pred, cfg)
            .ok()
            .filter(|(z, _)| (z - pred).norm() <= cfg.max_jump * (1.0 + pred.norm()))
            .filter(|(z, _)| (z - c.1).norm() <= 4.0 * cfg.max_jump * (1.0 + c.1.norm()));
        match ok {
            Some((z, t)) => {
                if tn == target {
                    return Some((z, t));
                }
                p = Some(c);
                c = (tn, z);
                step *= 2.0;
                if step.abs() > (target - c.0).abs() {
                    step = target - c.0;
                }
            }
            None => {
                step *= 0.5;
                if step.abs() < min_step * (1.0 - 1e-9) {
                    return None;
                }
            }
        }
    }
}

/// Continues a root found at `taus[start]` across the whole grid in both
/// directions.
pub fn trace_branch(
    problem: &RootProblem,
    taus: &[f64],
    start: usize,
    root: (C64, Trajectory),
    cfg: &SearchConfig,
) -> Branch {
    let first = BranchSample {
        index: start,
        tau: taus[start],
        zbar0: root.0,
        flags: flags_for(&root.1, cfg),
        traj: root.1,
    };
    let walk = |dir: i64| {
        let mut out: Vec<BranchSample> = Vec::new();
        let mut prev: Option<(f64, C64)> = None;
        let mut cur = (first.tau, first.zbar0);
        let mut k = start as i64 + dir;
        while k >= 0 && (k as usize) < taus.len() {
            let target = taus[k as usize];
            match advance(problem, cfg, prev, cur, target) {
                Some((z, t)) => {
                    prev = Some(cur);
                    cur = (target, z);
                    out.push(BranchSample {
                        index: k as usize,
                        tau: target,
                        zbar0: z,
                        flags: flags_for(&t, cfg),
                        traj: t,
                    });
                }
                None => break,
            }
            k += dir;
        }
        out
    };
    let (back, fwd) = rayon::join(|| walk(-1), || walk(1));
    let mut samples: Vec<BranchSample> = back.into_iter().rev().collect();
    samples.push(first);
    samples.extend(fwd);
    Branch { id: 0, samples }
}

fn branches_overlap(a: &Branch, b: &Branch, cfg: &SearchConfig) -> bool {
    b.samples.iter().any(|s| {
        a.sample_at(s.index).is_some_and(|o| {
            (o.zbar0 - s.zbar0).norm() < match_radius(cfg, &s.traj).max(match_radius(cfg, &o.traj))
        })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub branches: Vec<Branch>,
    /// `(tau, roots found, new branches started)` per seeding time.
    pub seeding: Vec<(f64, usize, usize)>,
}

/// Grid indices used for seeding.
pub fn seed_indices(taus: &[f64], cfg: &SearchConfig) -> Vec<usize> {
    if taus.is_empty() {
        return Vec::new();
    }
    let nearest = |t: f64| {
        taus.iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0)
    };
    let mut idx: Vec<usize> = if cfg.seed_taus.is_empty() {
        let (lo, hi) = (taus[0], taus[taus.len() - 1]);
        [1.0, 0.75, 0.5, 0.25]
            .iter()
            .map(|f| nearest(lo + f * (hi - lo)))
            .collect()
    } else {
        cfg.seed_taus.iter().map(|&t| nearest(t)).collect()
    };
    let mut seen = Vec::new();
    idx.retain(|k| {
        let fresh = !seen.contains(k);
        seen.push(*k);
        fresh
    });
    idx
}

/// Finds and traces every branch reachable from the seeding times over the
/// `taus` grid (which must be increasing).
pub fn search_branches(
    problem: &RootProblem,
    taus: &[f64],
    cfg: &SearchConfig,
) -> Result<SearchReport> {
    cfg.validate()?;
    if taus.windows(2).any(|w| !(w[1] > w[0])) || taus.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidArgument(
            "tau grid must be finite, non-negative and strictly increasing".to_string(),
        ));
    }
    let mut branches: Vec<Branch> = Vec::new();
    let mut seeding = Vec::new();
    for idx in seed_indices(taus, cfg) {
        let tau = taus[idx];
        let roots = find_roots(problem, tau, cfg);
        let found = roots.len();
        let fresh: Vec<(C64, Trajectory)> = roots
            .into_iter()
            .filter(|(z, t)| {
                !branches.iter().any(|b| {
                    b.sample_at(idx).is_some_and(|s| {
                        (s.zbar0 - z).norm() < match_radius(cfg, t).max(match_radius(cfg, &s.traj))
                    })
                })
            })
            .collect();
        let traced: Vec<Branch> = fresh
            .into_par_iter()
            .map(|root| trace_branch(problem, taus, idx, root, cfg))
            .collect();
        let mut added = 0;
        for b in traced {
            if !branches.iter().any(|o| branches_overlap(o, &b, cfg)) {
                branches.push(b);
                added += 1;
            }
        }
        seeding.push((tau, found, added));
    }
    for (k, b) in branches.iter_mut().enumerate() {
        b.id = k;
    }
    Ok(SearchReport { branches, seeding })
}

/// Residual of the `J_z^2` frequency condition in `theta = omega tau`:
/// `theta - tau c (r e^{-i theta} - 1)/(r e^{-i theta} + 1)` with `c = 2 mu / j`.
fn theta_residual(theta: C64, r: C64, tau: f64, c: f64) -> (C64, C64) {
    let i = C64::new(0.0, 1.0);
    let q = r * (-i * theta).exp();
    let g = theta - tau * c * (q - 1.0) / (q + 1.0);
    let dg = 1.0 - tau * c * 2.0 * (-i * q) / ((q + 1.0) * (q + 1.0));
    (g, dg)
}

/// All roots `omega` of `omega = (2 mu / j)(r e^{-i omega tau} - 1)/(r e^{-i omega tau} + 1)`
/// with `|Re(omega tau)| <= (2 n_max + 1) pi`, found by Newton from a grid
/// in the `theta = omega tau` plane.
pub fn jz2_frequencies(r: C64, tau: f64, ctx: &SpinContext, n_max: usize) -> Vec<C64> {
    let c = 2.0 * ctx.mu() / ctx.j();
    if tau == 0.0 {
        return if (r - 1.0).norm() < 1e-14 {
            vec![C64::new(0.0, 0.0)]
        } else {
            Vec::new()
        };
    }
    let span = (2 * n_max + 1) as f64 * PI;
    let mut starts = Vec::new();
    let steps = (2.0 * span / (PI / 4.0)).ceil() as i64;
    for a in 0..=steps {
        for b in -8i64..=8 {
            starts.push(C64::new(-span + a as f64 * PI / 4.0, b as f64 * 0.4));
        }
    }
    let roots: Vec<C64> = starts
        .par_iter()
        .filter_map(|&s| {
            let mut th = s;
            for _ in 0..60 {
                let (g, dg) = theta_residual(th, r, tau, c);
                if !(g.re.is_finite() && g.im.is_finite()) || dg.norm() == 0.0 {
                    return None;
                }
                let d = g / dg;
                th -= if d.norm() > 1.0 { d / d.norm() } else { d };
                if d.norm() < 1e-15 * (1.0 + th.norm()) {
                    break;
                }
            }
            let (g, _) = theta_residual(th, r, tau, c);
            (g.norm() <= 1e-10 * tau && th.re.abs() <= span).then_some(th / tau)
        })
        .collect();
    let mut out: Vec<C64> = Vec::new();
    for w in roots {
        if !out.iter().any(|o| (o - w).norm() < 1e-8 * (1.0 + w.norm())) {
            out.push(w);
        }
    }
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    out
}

/// Equator frequencies with `Re omega >= 0` and their multiplicities
/// (1 for the static solution, 2 for each `+-omega` pair).
pub fn equator_frequencies(
    z_i: C64,
    tau: f64,
    ctx: &SpinContext,
    count: usize,
) -> Result<Vec<(C64, u32)>> {
    if (z_i.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "|z_i| = {} is not on the equator",
            z_i.norm()
        )));
    }
    let all = jz2_frequencies(C64::new(1.0, 0.0), tau, ctx, count);
    let scale = 2.0 * ctx.mu() / ctx.j();
    Ok(all
        .into_iter()
        .filter_map(|w| {
            if w.norm() < 1e-9 * scale {
                Some((C64::new(0.0, 0.0), 1))
            } else if w.re > 1e-12 * scale || (w.re.abs() <= 1e-12 * scale && w.im > 0.0) {
                Some((w, 2))
            } else {
                None
            }
        })
        .collect())
}

/// Whether a `J_z^2` root has `Re omega > 0`, or `Re omega = 0` with
/// `Im omega >= 0` (the static root included).
pub fn is_canonical_root(problem: &RootProblem, zbar0: C64) -> bool {
    if problem.ham.spec().kind != HamiltonianKind::JzSquared {
        return true;
    }
    let w = crate::trajectory::jz2_frequency(problem.z_i * zbar0, problem.ctx());
    let scale = 2.0 * problem.ctx().mu() / problem.ctx().j();
    w.re > 1e-9 * scale || (w.re.abs() <= 1e-9 * scale && w.im >= -1e-9 * scale)
}

/// `J_z^2` seeds `zbar0 = conj(z_f) e^{-i omega tau}` from the frequency condition.
fn frequency_seeds(problem: &RootProblem, tau: f64, cfg: &SearchConfig) -> Vec<C64> {
    if problem.ham.spec().kind != HamiltonianKind::JzSquared {
        return Vec::new();
    }
    let r = problem.z_i * problem.zbar_f();
    let n_max = cfg
        .frequency_max_n
        .unwrap_or(problem.ctx().two_j() as usize);
    jz2_frequencies(r, tau, problem.ctx(), n_max)
        .into_iter()
        .map(|w| problem.zbar_f() * (C64::new(0.0, -tau) * w).exp())
        .filter(|z| z.re.is_finite() && z.im.is_finite())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::HamiltonianSpec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn consistency(w: C64, r: C64, tau: f64, ctx: &SpinContext) -> f64 {
        let q = r * (c(0.0, -tau) * w).exp();
        (w - 2.0 * ctx.mu() / ctx.j() * (q - 1.0) / (q + 1.0)).norm()
    }

    #[test]
    fn zero_time_root_is_the_final_point() {
        let ctx = SpinContext::from_j(5.0).unwrap();
        let ham = Hamiltonian::new(HamiltonianSpec::anisotropic(1.0, 2.0), ctx).unwrap();
        let z_i = c(0.7, 0.2);
        let z_f = c(0.4, -0.5);
        let p = RootProblem::new(&ham, z_i, z_f, TrajectoryOptions::default()).unwrap();
        let (z, _) = refine_root(
            &p,
            0.0,
            z_i.conj() + c(0.05, 0.03),
            &SearchConfig::default(),
        )
        .unwrap();
        assert!((z - z_f.conj()).norm() < 1e-12);
    }

    #[test]
    fn linear_root_is_unique_and_closed_form() {
        let ctx = SpinContext::from_j(3.0).unwrap();
        let nu = 1.4;
        let ham = Hamiltonian::new(HamiltonianSpec::linear_jz(nu), ctx).unwrap();
        let z_i = c(0.3, 0.8);
        let z_f = c(-0.6, 0.1);
        let p = RootProblem::new(&ham, z_i, z_f, TrajectoryOptions::default()).unwrap();
        let tau = 0.9;
        let want = z_f.conj() * C64::from_polar(1.0, -nu * p.time(tau));
        let roots = find_roots(&p, tau, &SearchConfig::default());
        assert_eq!(roots.len(), 1);
        assert!((roots[0].0 - want).norm() < 1e-9);
    }

    #[test]
    fn jz2_roots_satisfy_the_frequency_condition() {
        let ctx = SpinContext::from_j(10.0).unwrap();
        let ham = Hamiltonian::new(HamiltonianSpec::jz_squared(1.0), ctx).unwrap();
        let z_i = c(0.8, 0.3);
        let p = RootProblem::new(&ham, z_i, z_i, TrajectoryOptions::default()).unwrap();
        let tau = 0.4;
        let roots = find_roots(&p, tau, &SearchConfig::default());
        assert!(!roots.is_empty());
        let r = z_i * z_i.conj();
        for (zb, _) in roots {
            // zbar0 = conj(z_i) e^{-i omega tau} determines omega up to 2 pi / tau
            let x = z_i * zb;
            let w = 2.0 * ctx.mu() / ctx.j() * (x - 1.0) / (x + 1.0);
            assert!((zb - z_i.conj() * (c(0.0, -tau) * w).exp()).norm() < 1e-8);
            assert!(consistency(w, r, tau, &ctx) < 1e-7 * (1.0 + w.norm()));
        }
    }

    #[test]
    fn equator_frequency_examples() {
        let ctx = SpinContext::from_j(10.0).unwrap();
        for tau in [0.0, 0.3, 2.0, 2.0 * PI] {
            let ws = equator_frequencies(c(1.0, 0.0), tau, &ctx, 12).unwrap();
            assert!(ws.iter().any(|(w, m)| w.norm() == 0.0 && *m == 1));
            for (w, _) in &ws {
                assert!(consistency(*w, c(1.0, 0.0), tau, &ctx) <= 1e-10 * (1.0 + w.norm()));
                assert!(w.re >= 0.0);
            }
        }
        assert!(equator_frequencies(c(0.5, 0.0), 1.0, &ctx, 3).is_err());
    }

    #[test]
    fn static_branch_on_the_equator() {
        let ctx = SpinContext::from_j(10.0).unwrap();
        let ham = Hamiltonian::new(HamiltonianSpec::jz_squared(1.0), ctx).unwrap();
        let z_i = c(1.0, 0.0);
        let p = RootProblem::new(&ham, z_i, z_i, TrajectoryOptions::default()).unwrap();
        let taus = crate::exact::tau_grid(0.0, 2.0, 21);
        let cfg = SearchConfig::default();
        let (z, t) = refine_root(&p, taus[20], c(1.02, 0.01), &cfg).unwrap();
        let b = trace_branch(&p, &taus, 20, (z, t), &cfg);
        assert_eq!(b.samples.len(), 21);
        for s in &b.samples {
            assert!((s.zbar0 - 1.0).norm() < 1e-8);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = SearchConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.spacing = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = SearchConfig {
            capture_radius: 1e-12,
            ..SearchConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
