//! Floquet stability of `u'' + (delta + eps cos t) u = 0`.
//!
//! The monodromy matrix is integrated with a fourth-order symplectic
//! composition of Stormer-Verlet steps over the half period `[0, pi]` and
//! completed by the even-potential reflection identity.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

pub const TRANSITION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monodromy {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
    pub delta: f64,
    pub eps: f64,
    pub steps: usize,
}

impl Monodromy {
    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    /// Rotation number `acos(tr/2)/(2 pi)` inside stable bands.
    pub fn theta(&self) -> Option<f64> {
        let h = 0.5 * self.trace();
        (h.abs() <= 1.0).then(|| h.acos() / (2.0 * PI))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StabilityTag {
    Stable,
    Unstable,
    Transitional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityClass {
    pub tag: StabilityTag,
    pub trace: f64,
    pub tol: f64,
}

impl StabilityClass {
    pub fn from_trace(trace: f64, tol: f64) -> Self {
        let a = trace.abs();
        let tag = if a < 2.0 - tol {
            StabilityTag::Stable
        } else if a > 2.0 + tol {
            StabilityTag::Unstable
        } else {
            StabilityTag::Transitional
        };
        StabilityClass { tag, trace, tol }
    }
}

pub fn default_steps(delta: f64, eps: f64) -> usize {
    // extra resolution where delta + eps cos t goes negative and solutions grow
    let growth = (eps.abs() - delta).max(0.0);
    let s = 64 * (delta.abs() + eps.abs()).sqrt().ceil() as usize + 128 * growth.ceil() as usize;
    let s = s.max(1024);
    s + (s & 1)
}

// Forest-Ruth coefficients
fn fr_coeffs() -> ([f64; 4], [f64; 3]) {
    let cbrt2 = 2f64.powf(1.0 / 3.0);
    let w1 = 1.0 / (2.0 - cbrt2);
    let w0 = -cbrt2 / (2.0 - cbrt2);
    ([0.5 * w1, 0.5 * (w0 + w1), 0.5 * (w0 + w1), 0.5 * w1], [w1, w0, w1])
}

type KickTable = Arc<Vec<[f64; 3]>>;

/// cos t at the three kick times of every half-period step.
fn kick_table(half: usize) -> KickTable {
    static CACHE: OnceLock<Mutex<HashMap<usize, KickTable>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&half) {
        return t.clone();
    }
    let (c, _) = fr_coeffs();
    let h = PI / half as f64;
    let off = [c[0], c[0] + c[1], c[0] + c[1] + c[2]];
    let table: Vec<[f64; 3]> = (0..half)
        .map(|n| {
            let t0 = n as f64 * h;
            [(t0 + off[0] * h).cos(), (t0 + off[1] * h).cos(), (t0 + off[2] * h).cos()]
        })
        .collect();
    let table = Arc::new(table);
    cache.lock().unwrap().insert(half, table.clone());
    table
}

/// Fundamental matrix over one period `2 pi` with `steps` steps (rounded up
/// to even). Each substep is a shear, so the determinant is 1 to roundoff.
pub fn monodromy(delta: f64, eps: f64, steps: usize) -> Monodromy {
    let half = steps.div_ceil(2).max(1);
    let table = kick_table(half);
    let (c, d) = fr_coeffs();
    let h = PI / half as f64;
    let (ch, dh) = ([c[0] * h, c[1] * h, c[2] * h, c[3] * h], [d[0] * h, d[1] * h, d[2] * h]);
    // columns: (u1, v1) from (1, 0), (u2, v2) from (0, 1)
    let (mut u1, mut v1, mut u2, mut v2) = (1.0f64, 0.0f64, 0.0f64, 1.0f64);
    for cosk in table.iter() {
        for s in 0..3 {
            u1 += ch[s] * v1;
            u2 += ch[s] * v2;
            let q = dh[s] * (delta + eps * cosk[s]);
            v1 -= q * u1;
            v2 -= q * u2;
        }
        u1 += ch[3] * v1;
        u2 += ch[3] * v2;
    }
    let (a, b, cc, dd) = (u1, u2, v1, v2);
    let diag = a * dd + b * cc;
    Monodromy { m11: diag, m12: 2.0 * b * dd, m21: 2.0 * a * cc, m22: diag, delta, eps, steps: 2 * half }
}

/// Trace at `default_steps` and twice that, Richardson-combined for the
/// fourth-order step error.
pub fn trace(delta: f64, eps: f64) -> f64 {
    let s = default_steps(delta, eps);
    let coarse = monodromy(delta, eps, s).trace();
    let fine = monodromy(delta, eps, 2 * s).trace();
    (16.0 * fine - coarse) / 15.0
}

/// Single-resolution trace; enough to place band edges for area quadrature.
fn quick_trace(delta: f64, eps: f64) -> f64 {
    monodromy(delta, eps, default_steps(delta, eps)).trace()
}

pub fn classify(delta: f64, eps: f64) -> StabilityClass {
    classify_with(delta, eps, TRANSITION_TOL)
}

pub fn classify_with(delta: f64, eps: f64, tol: f64) -> StabilityClass {
    StabilityClass::from_trace(trace(delta, eps), tol)
}

/// Classification over `n` periods, via `tr(M^n) = 2 T_n(tr(M)/2)`.
pub fn classify_periods(delta: f64, eps: f64, n: u32, tol: f64) -> StabilityClass {
    let x = 0.5 * trace(delta, eps);
    let (mut t0, mut t1) = (1.0, x);
    for _ in 1..n {
        let t2 = 2.0 * x * t1 - t0;
        t0 = t1;
        t1 = t2;
    }
    StabilityClass::from_trace(2.0 * t1, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityGrid {
    pub delta_range: (f64, f64),
    pub eps_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    /// Row-major, rows indexed by eps, columns by delta.
    pub cells: Vec<StabilityClass>,
}

impl StabilityGrid {
    pub fn delta_at(&self, i: usize) -> f64 {
        cell_center(self.delta_range, self.nx, i)
    }

    pub fn eps_at(&self, j: usize) -> f64 {
        cell_center(self.eps_range, self.ny, j)
    }

    pub fn cell(&self, i: usize, j: usize) -> &StabilityClass {
        &self.cells[j * self.nx + i]
    }
}

fn cell_center(r: (f64, f64), n: usize, i: usize) -> f64 {
    r.0 + (i as f64 + 0.5) * (r.1 - r.0) / n as f64
}

pub fn stability_grid(delta_range: (f64, f64), eps_range: (f64, f64), nx: usize, ny: usize) -> StabilityGrid {
    let cells = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % nx, idx / nx);
            classify(cell_center(delta_range, nx, i), cell_center(eps_range, ny, j))
        })
        .collect();
    StabilityGrid { delta_range, eps_range, nx, ny, cells }
}

fn illinois<F: Fn(f64) -> f64>(g: &F, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64, tol: f64) -> f64 {
    let mut side = 0;
    for _ in 0..100 {
        if (b - a).abs() <= tol {
            break;
        }
        let x = (a * fb - b * fa) / (fb - fa);
        let x = if x.is_finite() && x > a.min(b) && x < a.max(b) { x } else { 0.5 * (a + b) };
        let fx = g(x);
        if fx == 0.0 {
            return x;
        }
        if (fx > 0.0) == (fb > 0.0) {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

fn golden_extremum<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, maximize: bool, tol: f64) -> (f64, f64) {
    let s = if maximize { -1.0 } else { 1.0 };
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = s * f(x1);
    let mut f2 = s * f(x2);
    while b - a > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = s * f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = s * f(x2);
        }
    }
    let (x, fx) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    (x, s * fx)
}

/// Maximal unstable sub-intervals of `[a, b]` for a path parametrized by `x`
/// with monodromy trace `tr(x)`. Sampling step is `spacing(x)`; gaps hidden
/// between samples are found from trace extrema beyond +-2.
pub fn unstable_intervals_on<T, S>(tr: &T, a: f64, b: f64, spacing: &S, tol: f64) -> Vec<(f64, f64)>
where
    T: Fn(f64) -> f64,
    S: Fn(f64) -> f64,
{
    let g = |x: f64| {
        let t = tr(x);
        t * t - 4.0
    };
    let mut xs = vec![a];
    while let Some(&x) = xs.last() {
        if x >= b {
            break;
        }
        xs.push((x + spacing(x)).min(b));
    }
    let ts: Vec<f64> = xs.iter().map(|&x| tr(x)).collect();
    let gs: Vec<f64> = ts.iter().map(|t| t * t - 4.0).collect();
    let mut edges = Vec::new();
    for i in 0..xs.len() - 1 {
        if (gs[i] > 0.0) != (gs[i + 1] > 0.0) {
            edges.push(illinois(&g, xs[i], gs[i], xs[i + 1], gs[i + 1], tol));
        }
    }
    for i in 1..xs.len().saturating_sub(1) {
        if gs[i - 1] > 0.0 || gs[i] > 0.0 || gs[i + 1] > 0.0 {
            continue;
        }
        let is_max = ts[i] >= ts[i - 1] && ts[i] >= ts[i + 1] && ts[i] > 0.0;
        let is_min = ts[i] <= ts[i - 1] && ts[i] <= ts[i + 1] && ts[i] < 0.0;
        if !(is_max || is_min) {
            continue;
        }
        let (xe, te) = golden_extremum(tr, xs[i - 1], xs[i + 1], is_max, tol.max(1e-13));
        let ge = te * te - 4.0;
        if ge > 0.0 {
            edges.push(illinois(&g, xs[i - 1], gs[i - 1], xe, ge, tol));
            edges.push(illinois(&g, xe, ge, xs[i + 1], gs[i + 1], tol));
        }
    }
    edges.sort_by(|x, y| x.total_cmp(y));
    let mut out = Vec::new();
    let mut unstable = gs[0] > 0.0;
    let mut start = a;
    for e in edges {
        if unstable {
            if e > start {
                out.push((start, e));
            }
        } else {
            start = e;
        }
        unstable = !unstable;
    }
    if unstable && b > start {
        out.push((start, b));
    }
    out
}

fn band_spacing(x: f64) -> f64 {
    0.02 * x.abs().sqrt().max(1.0)
}

/// The first `count` maximal unstable intervals of `t -> classify(t, t)`.
pub fn diagonal_unstable_intervals(count: usize) -> Vec<(f64, f64)> {
    let tr = |t: f64| trace(t, t);
    let mut hi = 16.0;
    loop {
        let mut iv = unstable_intervals_on(&tr, 1e-6, hi, &band_spacing, 1e-10);
        // only intervals closed strictly inside the scan are final
        if iv.last().is_some_and(|l| l.1 >= hi) {
            iv.pop();
        }
        if iv.len() >= count || hi > 1e4 {
            iv.truncate(count);
            return iv;
        }
        hi *= 2.0;
    }
}

/// Stable length of `delta` in `[lo, hi]` at fixed `eps`.
pub fn stable_length(eps: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let tr = |d: f64| quick_trace(d, eps);
    let unstable: f64 = unstable_intervals_on(&tr, lo, hi, &|d: f64| 0.05 * d.abs().sqrt().max(0.5), 1e-11)
        .iter()
        .map(|(a, b)| b - a)
        .sum();
    hi - lo - unstable
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangleProbability {
    pub i: usize,
    pub w: f64,
    pub p: f64,
    pub rows: usize,
}

/// Stable fraction of the triangle `0 < delta < w`, `|eps| < delta`: midpoint
/// rule over `rows` values of eps (using eps -> -eps symmetry), each row's stable
/// delta-length resolved to band-edge precision.
pub fn triangle_probability_for(w: f64, rows: usize) -> f64 {
    let h = w / rows as f64;
    let lengths: Vec<f64> = (0..rows)
        .into_par_iter()
        .map(|r| {
            let eps = (r as f64 + 0.5) * h;
            stable_length(eps, eps, w)
        })
        .collect();
    let area: f64 = lengths.iter().sum::<f64>() * h;
    area / (0.5 * w * w)
}

pub fn triangle_probability(i: usize, samples_per_axis: usize) -> TriangleProbability {
    let iv = diagonal_unstable_intervals(i);
    let w = iv[i - 1].1;
    TriangleProbability { i, w, p: triangle_probability_for(w, samples_per_axis), rows: samples_per_axis }
}

pub fn triangle_probabilities(imax: usize, samples_per_axis: usize) -> Vec<TriangleProbability> {
    let iv = diagonal_unstable_intervals(imax);
    iv.iter()
        .enumerate()
        .map(|(k, &(_, w))| TriangleProbability {
            i: k + 1,
            w,
            p: triangle_probability_for(w, samples_per_axis),
            rows: samples_per_axis,
        })
        .collect()
}

/// `P_i` for the listed indices only.
pub fn triangle_probabilities_subset(indices: &[usize], samples_per_axis: usize) -> Vec<TriangleProbability> {
    let imax = indices.iter().copied().max().unwrap_or(0);
    if imax == 0 {
        return Vec::new();
    }
    let iv = diagonal_unstable_intervals(imax);
    indices
        .iter()
        .map(|&i| {
            let w = iv[i - 1].1;
            TriangleProbability { i, w, p: triangle_probability_for(w, samples_per_axis), rows: samples_per_axis }
        })
        .collect()
}
