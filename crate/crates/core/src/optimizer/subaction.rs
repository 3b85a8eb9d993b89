//! Lax–Oleinik iteration `(Lg)(x) = max_i [f(τ_i x) + g(τ_i x)]` on a
//! uniform grid, and level sets of the resulting defect.

use rayon::prelude::*;

use crate::circle::{uniform_grid, ExpandingMap, Potential};
use crate::error::{Error, Result};
use crate::trig::reduce;

const CESARO_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoOptions {
    pub n_grid: usize,
    pub max_iter: usize,
    pub lo_tol: f64,
}

impl Default for LoOptions {
    fn default() -> Self {
        Self {
            n_grid: 1 << 12,
            max_iter: 20_000,
            lo_tol: 1e-11,
        }
    }
}

/// Converged Lax–Oleinik data.
///
/// The sub-action is the continuous function `g(x) = max_i [f(τ_i x) +
/// ĝ(τ_i x)] − β`, where `ĝ` interpolates the grid iterate linearly; it is
/// evaluated exactly anywhere, so `g∘T` needs no interpolation.
#[derive(Debug, Clone)]
pub struct SubActionGrid {
    map: ExpandingMap,
    f: Potential,
    pub grid: Vec<f64>,
    /// `g` at the grid points.
    pub g_values: Vec<f64>,
    nodes: Vec<f64>,
    pub beta: f64,
    pub iteration_count: usize,
    pub converged: bool,
    /// `max_x f(x) − g(T x) + g(x) − β` over the grid.
    pub defect: f64,
    /// `g(T x) − g(x) + β − f(x)` at each grid point; nonnegative up to `defect`.
    pub gap: Vec<f64>,
}

fn interp(nodes: &[f64], y: f64) -> f64 {
    let n = nodes.len();
    let t = reduce(y) * n as f64;
    let j = (t.floor() as usize).min(n - 1);
    let w = t - j as f64;
    nodes[j] * (1.0 - w) + nodes[(j + 1) % n] * w
}

impl SubActionGrid {
    pub fn map(&self) -> &ExpandingMap {
        &self.map
    }

    pub fn potential(&self) -> &Potential {
        &self.f
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.map.degree() {
            let y = self.map.inverse_branch(i, reduce(x))?;
            best = best.max(self.f.eval(y) + interp(&self.nodes, y));
        }
        Ok(best - self.beta)
    }

    /// Smallest defect on the grid, `−max gap`.
    pub fn min_defect(&self) -> f64 {
        -self.gap.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs the normalized Lax–Oleinik iteration.
///
/// Each step moves halfway to `Lg − sup Lg`; `β` is the mean of the last 50 subtracted
/// constants. Stops when successive iterates differ by less than `lo_tol`.
pub fn lax_oleinik(map: &ExpandingMap, f: &Potential, opts: &LoOptions) -> Result<SubActionGrid> {
    if opts.n_grid < 1 << 8 {
        return Err(Error::InvalidArgument(format!("n_grid must be at least 256, got {}", opts.n_grid)));
    }
    let n = opts.n_grid;
    let d = map.degree() as usize;
    let grid = uniform_grid(n);
    // branch targets: (fractional index, left node, f value) per (grid point, branch)
    let targets: Vec<(usize, f64, f64)> = grid
        .par_iter()
        .flat_map_iter(|&x| (0..d).map(move |i| (x, i)))
        .map(|(x, i)| {
            let y = map.inverse_branch(i as u32, x)?;
            let t = reduce(y) * n as f64;
            let j = (t.floor() as usize).min(n - 1);
            Ok((j, t - j as f64, f.eval(y)))
        })
        .collect::<Result<_>>()?;

    let step = |g: &[f64], out: &mut [f64]| {
        for (k, o) in out.iter_mut().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for &(j, w, fy) in &targets[k * d..(k + 1) * d] {
                let v = fy + g[j] * (1.0 - w) + g[(j + 1) % n] * w;
                best = best.max(v);
            }
            *o = best;
        }
    };

    let mut g = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut constants: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        step(&g, &mut next);
        let c = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // lazy step g ← (g + Lg − c)/2: same fixed points, no period-p cycling
        next.iter_mut().zip(&g).for_each(|(v, &old)| *v = 0.5 * (old + *v - c));
        constants.push(c);
        let diff = g.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut g, &mut next);
        if diff < opts.lo_tol {
            converged = true;
            break;
        }
    }
    let window = &constants[constants.len().saturating_sub(CESARO_WINDOW)..];
    let beta = if converged {
        *constants.last().expect("at least one iteration")
    } else {
        window.iter().sum::<f64>() / window.len() as f64
    };

    let mut sub = SubActionGrid {
        map: map.clone(),
        f: f.clone(),
        grid: grid.clone(),
        g_values: Vec::new(),
        nodes: g,
        beta,
        iteration_count: iterations,
        converged,
        defect: 0.0,
        gap: Vec::new(),
    };
    let rows: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&x| {
            let gx = sub.eval(x)?;
            let gtx = sub.eval(map.apply(x))?;
            Ok((gx, gtx - gx + beta - f.eval(x)))
        })
        .collect::<Result<_>>()?;
    sub.g_values = rows.iter().map(|r| r.0).collect();
    sub.gap = rows.iter().map(|r| r.1).collect();
    sub.defect = 0.0 - sub.gap.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(sub)
}

/// Closed subintervals of `[0, 1]` approximating `{x : gap(x) ≤ ε}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub epsilon: f64,
    pub intervals: Vec<(f64, f64)>,
}

impl LevelSet {
    pub fn whole() -> Self {
        Self {
            epsilon: f64::INFINITY,
            intervals: vec![(0.0, 1.0)],
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let x = reduce(x);
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b)
    }

    /// Whether the closed arc `[a, b]`, `0 ≤ a ≤ b ≤ 1`, meets the set.
    pub fn meets(&self, a: f64, b: f64) -> bool {
        let k = self.intervals.partition_point(|&(_, e)| e < a);
        if k < self.intervals.len() && self.intervals[k].0 <= b {
            return true;
        }
        // 1 ≡ 0 on the circle
        b >= 1.0 && self.intervals.first().is_some_and(|&(s, _)| s <= 0.0)
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|&(a, b)| b - a).sum()
    }
}

/// Maximal runs of grid points with `gap ≤ ε`, each padded by half a cell.
pub fn level_set(sub: &SubActionGrid, epsilon: f64) -> Result<LevelSet> {
    if !(epsilon > sub.defect) {
        return Err(Error::EpsilonBelowDefect {
            epsilon,
            defect: sub.defect,
        });
    }
    let n = sub.grid.len();
    let h = 1.0 / n as f64;
    let ok: Vec<bool> = sub.gap.iter().map(|&g| g <= epsilon).collect();
    if ok.iter().all(|&b| b) {
        return Ok(LevelSet {
            epsilon,
            intervals: vec![(0.0, 1.0)],
        });
    }
    let start = ok.iter().position(|&b| !b).expect("some point fails");
    let mut raw = Vec::new();
    let mut run: Option<usize> = None;
    for t in start + 1..=start + n {
        if ok[t % n] {
            run.get_or_insert(t);
        } else if let Some(a) = run.take() {
            raw.push(((a as f64 - 0.5) * h, ((t - 1) as f64 + 0.5) * h));
        }
    }
    let mut pieces = Vec::new();
    for (a, b) in raw {
        let shift = a.floor();
        let (a, b) = (a - shift, b - shift);
        if b > 1.0 {
            pieces.push((a, 1.0));
            pieces.push((0.0, b - 1.0));
        } else {
            pieces.push((a, b));
        }
    }
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for (a, b) in pieces {
        match intervals.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => intervals.push((a, b)),
        }
    }
    Ok(LevelSet { epsilon, intervals })
}
