//! Line-case coefficient matrices, transition curves and periodic solutions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{self, StabilityTag};
use crate::trirec::{self, seq, TridiagonalSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trig {
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    A,
    B,
    C,
    D,
    /// Equivalence class of the period-2N*pi Fourier coefficients.
    PeriodN { n: u32, k: u32, trig: Trig, form: u8 },
}

impl MatrixKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(MatrixKind::A),
            "B" | "b" => Ok(MatrixKind::B),
            "C" | "c" => Ok(MatrixKind::C),
            "D" | "d" => Ok(MatrixKind::D),
            _ => Err(Error::InvalidInput(format!("unknown matrix kind {s}"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            MatrixKind::A => "A".into(),
            MatrixKind::B => "B".into(),
            MatrixKind::C => "C".into(),
            MatrixKind::D => "D".into(),
            MatrixKind::PeriodN { n, k, trig, form } => {
                let t = if *trig == Trig::Cos { "cos" } else { "sin" };
                format!("P{n}k{k}{t}f{form}")
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let MatrixKind::PeriodN { n, k, form, .. } = *self {
            if n < 3 {
                return Err(Error::InvalidPeriodClass(format!("N={n} < 3")));
            }
            match form {
                1 => {}
                2 => {
                    if k < 1 || 2 * k >= n {
                        return Err(Error::InvalidPeriodClass(format!("form 2 needs 1 <= k < N/2, got k={k}, N={n}")));
                    }
                }
                3 => {
                    if n % 2 != 0 {
                        return Err(Error::InvalidPeriodClass(format!("form 3 needs even N, got {n}")));
                    }
                }
                _ => return Err(Error::InvalidPeriodClass(format!("form {form}"))),
            }
        }
        Ok(())
    }

    /// The one-sided kind this class reduces to, if any.
    fn reduced(&self) -> MatrixKind {
        match *self {
            MatrixKind::PeriodN { trig, form: 1, .. } => {
                if trig == Trig::Cos {
                    MatrixKind::A
                } else {
                    MatrixKind::B
                }
            }
            MatrixKind::PeriodN { trig, form: 3, .. } => {
                if trig == Trig::Cos {
                    MatrixKind::C
                } else {
                    MatrixKind::D
                }
            }
            other => other,
        }
    }

    pub fn trig(&self) -> Trig {
        match self.reduced() {
            MatrixKind::A | MatrixKind::C => Trig::Cos,
            MatrixKind::B | MatrixKind::D => Trig::Sin,
            MatrixKind::PeriodN { trig, .. } => trig,
        }
    }

    /// Frequency of the basis function at label index `j`.
    pub fn frequency(&self, j: i64) -> f64 {
        match self.reduced() {
            MatrixKind::A | MatrixKind::B => j as f64,
            MatrixKind::C | MatrixKind::D => j as f64 - 0.5,
            MatrixKind::PeriodN { n, k, .. } => k as f64 / n as f64 + j as f64,
        }
    }

    /// Smallest period of the solutions, 2N*pi/gcd(N,k) for form 2.
    pub fn period(&self) -> f64 {
        match self.reduced() {
            MatrixKind::A | MatrixKind::B => 2.0 * PI,
            MatrixKind::C | MatrixKind::D => 4.0 * PI,
            MatrixKind::PeriodN { n, k, .. } => 2.0 * PI * (n / gcd(n, k)) as f64,
        }
    }
}

pub fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn build_spec(kind: MatrixKind, eps: f64) -> Result<TridiagonalSpec> {
    kind.validate()?;
    let half = seq(|_| 0.5);
    let spec = match kind.reduced() {
        MatrixKind::A => TridiagonalSpec {
            lambda: seq(|j| (j * j) as f64),
            alpha: half,
            beta: seq(|j| if j == 0 { 1.0 } else { 0.5 }),
            gamma: 0.0,
            eps,
            start_index: 0,
            two_sided: false,
            max_index: None,
        },
        MatrixKind::B => TridiagonalSpec {
            lambda: seq(|j| (j * j) as f64),
            alpha: half.clone(),
            beta: half,
            gamma: 0.0,
            eps,
            start_index: 1,
            two_sided: false,
            max_index: None,
        },
        MatrixKind::C | MatrixKind::D => {
            let gamma = if kind.reduced() == MatrixKind::C { -0.5 } else { 0.5 };
            TridiagonalSpec {
                lambda: seq(|j| {
                    let h = j as f64 - 0.5;
                    h * h
                }),
                alpha: half.clone(),
                beta: half,
                gamma,
                eps,
                start_index: 1,
                two_sided: false,
                max_index: None,
            }
        }
        MatrixKind::PeriodN { n, k, .. } => {
            let r = k as f64 / n as f64;
            TridiagonalSpec {
                lambda: seq(move |l| {
                    let w = r + l as f64;
                    w * w
                }),
                alpha: half.clone(),
                beta: half,
                gamma: 0.0,
                eps,
                start_index: 0,
                two_sided: true,
                max_index: None,
            }
        }
    };
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    CosK,
    SinK,
    CosHalf,
    SinHalf,
}

/// A transition curve: the `eigen_index`-th smallest eigenvalue of `matrix`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveLabel {
    pub matrix: MatrixKind,
    pub eigen_index: usize,
}

impl CurveLabel {
    /// Curve through `delta = k^2` (resp. `(k+1/2)^2`) at `eps = 0` labeled by
    /// the trig function solving the unperturbed equation.
    pub fn from_family(family: Family, k: usize) -> Result<Self> {
        let (matrix, eigen_index) = match family {
            Family::CosK => (MatrixKind::A, k + 1),
            Family::SinK => {
                if k == 0 {
                    return Err(Error::InvalidInput("sin 0t is not a solution".into()));
                }
                (MatrixKind::B, k)
            }
            Family::CosHalf => (MatrixKind::C, k + 1),
            Family::SinHalf => (MatrixKind::D, k + 1),
        };
        Ok(CurveLabel { matrix, eigen_index })
    }

    pub fn new(matrix: MatrixKind, eigen_index: usize) -> Result<Self> {
        matrix.validate()?;
        if eigen_index == 0 {
            return Err(Error::IndexOutOfRange { k: 0, m: 1 });
        }
        Ok(CurveLabel { matrix, eigen_index })
    }

    /// Unperturbed eigenvalue.
    pub fn delta_at_zero(&self) -> f64 {
        let spec = build_spec(self.matrix, 0.0).expect("validated kind");
        let m = self.eigen_index + 4;
        let first = spec.first_index(m);
        let mut d: Vec<f64> = (0..m).map(|p| spec.diag(first + p as i64)).collect();
        d.sort_by(|a, b| a.total_cmp(b));
        d[self.eigen_index - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub eps: f64,
    pub delta: f64,
    pub m_used: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransitionCurve {
    pub label: CurveLabel,
    pub points: Vec<CurvePoint>,
}

pub fn curve_point(label: &CurveLabel, eps: f64, seed: Option<f64>) -> Result<CurvePoint> {
    let spec = build_spec(label.matrix, eps)?;
    let r = trirec::adaptive_eigenvalue(&spec, label.eigen_index, seed, 0.0)?;
    Ok(CurvePoint { eps, delta: r.delta, m_used: r.m })
}

pub fn transition_curve(label: CurveLabel, eps_grid: &[f64]) -> Result<TransitionCurve> {
    let mut points = Vec::with_capacity(eps_grid.len());
    let mut seed = None;
    for &eps in eps_grid {
        let p = curve_point(&label, eps, seed)?;
        seed = Some(p.delta);
        points.push(p);
    }
    Ok(TransitionCurve { label, points })
}

/// First `count` eigenvalues of `kind` at `eps`, each at adaptive order.
pub fn eigenvalues(kind: MatrixKind, eps: f64, count: usize) -> Result<Vec<f64>> {
    let spec = build_spec(kind, eps)?;
    (1..=count)
        .map(|k| trirec::adaptive_eigenvalue(&spec, k, None, 0.0).map(|r| r.delta))
        .collect()
}

/// Sorted union of the 2*pi-periodic transition values (matrices A and B).
pub fn transition_values_2pi(eps: f64, count: usize) -> Result<Vec<f64>> {
    let mut v = eigenvalues(MatrixKind::A, eps, count)?;
    v.extend(eigenvalues(MatrixKind::B, eps, count)?);
    v.sort_by(|a, b| a.total_cmp(b));
    v.truncate(count);
    Ok(v)
}

/// Sorted union of the 4*pi-periodic transition values (matrices C and D).
pub fn transition_values_4pi(eps: f64, count: usize) -> Result<Vec<f64>> {
    let mut v = eigenvalues(MatrixKind::C, eps, count)?;
    v.extend(eigenvalues(MatrixKind::D, eps, count)?);
    v.sort_by(|a, b| a.total_cmp(b));
    v.truncate(count);
    Ok(v)
}

/// Sorted union of all four families.
pub fn transition_values(eps: f64, per_kind: usize) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    for kind in [MatrixKind::A, MatrixKind::B, MatrixKind::C, MatrixKind::D] {
        v.extend(eigenvalues(kind, eps, per_kind)?);
    }
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

#[derive(Debug, Clone, Serialize)]
pub struct LineSolution {
    pub label: CurveLabel,
    pub delta: f64,
    pub eps: f64,
    pub m_used: usize,
    /// Label index of `coeffs[0]`.
    pub first_index: i64,
    pub coeffs: Vec<f64>,
    pub period: f64,
    pub samples: Vec<(f64, f64)>,
    pub residual: f64,
}

impl LineSolution {
    pub fn eval(&self, t: f64) -> f64 {
        eval_series(self.label.matrix, self.first_index, &self.coeffs, t)
    }

    pub fn eval_d2(&self, t: f64) -> f64 {
        let kind = self.label.matrix;
        let mut s = 0.0;
        for (p, &c) in self.coeffs.iter().enumerate() {
            let w = kind.frequency(self.first_index + p as i64);
            s -= c * w * w * basis(kind.trig(), w * t);
        }
        s
    }
}

fn basis(trig: Trig, x: f64) -> f64 {
    match trig {
        Trig::Cos => x.cos(),
        Trig::Sin => x.sin(),
    }
}

pub fn eval_series(kind: MatrixKind, first: i64, coeffs: &[f64], t: f64) -> f64 {
    let trig = kind.trig();
    coeffs
        .iter()
        .enumerate()
        .map(|(p, &c)| c * basis(trig, kind.frequency(first + p as i64) * t))
        .sum()
}

pub const DEFAULT_GRID: usize = 4096;

/// Periodic solution on the curve `label` at `eps`, sampled over one period
/// and normalized so that `max u = 1`.
pub fn solution(label: CurveLabel, eps: f64, n_terms: usize, grid_size: usize) -> Result<LineSolution> {
    if n_terms < 8 {
        return Err(Error::InvalidInput("n_terms must be at least 8".into()));
    }
    if grid_size < 8 {
        return Err(Error::InvalidInput("grid_size must be at least 8".into()));
    }
    let spec = build_spec(label.matrix, eps)?;
    let pt = curve_point(&label, eps, None)?;
    let n = n_terms.max(pt.m_used);
    let (first_index, mut coeffs) = if eps == 0.0 {
        unperturbed_coeffs(&spec, label.eigen_index, n)
    } else if spec.two_sided {
        let half = n / 2;
        (-(half as i64), trirec::two_sided_minimal(&spec, pt.delta, half)?)
    } else {
        (spec.first_index(n), trirec::backward_recursion(&spec, pt.delta, n)?)
    };
    let period = label.matrix.period();
    let mut samples: Vec<(f64, f64)> = (0..grid_size)
        .map(|i| {
            let t = period * i as f64 / grid_size as f64;
            (t, eval_series(label.matrix, first_index, &coeffs, t))
        })
        .collect();
    // u(0) > 0 for even solutions, u'(0) > 0 for odd ones; neither vanishes
    // on a nonzero solution, so the orientation is continuous along a curve
    let kind = label.matrix;
    let lead: f64 = match kind.trig() {
        Trig::Cos => coeffs.iter().sum(),
        Trig::Sin => coeffs.iter().enumerate().map(|(p, &c)| c * kind.frequency(first_index + p as i64)).sum(),
    };
    let sign = if lead < 0.0 { -1.0 } else { 1.0 };
    let top = samples.iter().map(|s| sign * s.1).fold(f64::NEG_INFINITY, f64::max);
    let pivot = if top > 0.0 { sign * top } else { 0.0 };
    if pivot != 0.0 {
        for c in coeffs.iter_mut() {
            *c /= pivot;
        }
        for s in samples.iter_mut() {
            s.1 /= pivot;
        }
    }
    let mut sol = LineSolution {
        label,
        delta: pt.delta,
        eps,
        m_used: pt.m_used,
        first_index,
        coeffs,
        period,
        samples,
        residual: 0.0,
    };
    sol.residual = sol
        .samples
        .iter()
        .map(|&(t, u)| (sol.eval_d2(t) + (sol.delta + eps * t.cos()) * u).abs())
        .fold(0.0, f64::max);
    Ok(sol)
}

fn unperturbed_coeffs(spec: &TridiagonalSpec, k: usize, n: usize) -> (i64, Vec<f64>) {
    let first = spec.first_index(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| spec.diag(first + a as i64).total_cmp(&spec.diag(first + b as i64)));
    let mut c = vec![0.0; n];
    c[order[k - 1]] = 1.0;
    (first, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub t: f64,
    pub u: f64,
    pub kind: ExtremumKind,
}

/// Grid-local extrema over the (cyclic) sample grid, refined by a
/// three-point parabola; sorted by `t`.
pub fn find_extrema(sol: &LineSolution) -> Vec<Extremum> {
    let s = &sol.samples;
    let n = s.len();
    if n < 3 {
        return Vec::new();
    }
    let h = sol.period / n as f64;
    let mut out = Vec::new();
    for i in 0..n {
        let (um, u0, up) = (s[(i + n - 1) % n].1, s[i].1, s[(i + 1) % n].1);
        let kind = if u0 > um && u0 >= up {
            ExtremumKind::Max
        } else if u0 < um && u0 <= up {
            ExtremumKind::Min
        } else {
            continue;
        };
        let den = um - 2.0 * u0 + up;
        let shift = if den != 0.0 { 0.5 * (um - up) / den } else { 0.0 };
        let shift = shift.clamp(-0.5, 0.5);
        let t = (s[i].0 + shift * h).rem_euclid(sol.period);
        let u = u0 - 0.25 * (um - up) * shift;
        out.push(Extremum { t, u, kind });
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out
}

/// t-coordinate of the global maximum.
pub fn max_location(sol: &LineSolution) -> f64 {
    find_extrema(sol)
        .into_iter()
        .filter(|e| e.kind == ExtremumKind::Max)
        .max_by(|a, b| a.u.total_cmp(&b.u))
        .map(|e| e.t)
        .unwrap_or(0.0)
}

/// Root of `delta(eps) - eps` on the curve, by bisection.
pub fn critical_alpha(label: CurveLabel) -> Result<f64> {
    let f = |eps: f64| -> Result<f64> { Ok(curve_point(&label, eps, None)?.delta - eps) };
    let f0 = f(0.0)?;
    if f0 <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 16.0;
    while f(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 65536.0 {
            return Err(Error::NoSignChange { eps_hi: hi });
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Width of the `band_index`-th stable band at `eps` (1-based; the first band
/// lies above the lowest transition value).
///
/// The sorted periodic values alternate band, gap, band, ... from the bottom,
/// so band `k` is `[s[2k-2], s[2k-1]]`. Where the end traces are accurate the
/// Floquet midpoint classification must agree.
pub fn band_width(band_index: usize, eps: f64) -> Result<f64> {
    if band_index == 0 {
        return Err(Error::IndexOutOfRange { k: 0, m: 1 });
    }
    let mut values = Vec::new();
    for kind in [MatrixKind::A, MatrixKind::B, MatrixKind::C, MatrixKind::D] {
        let plus = matches!(kind, MatrixKind::A | MatrixKind::B);
        values.extend(eigenvalues(kind, eps, band_index + 2)?.into_iter().map(|d| (d, plus)));
    }
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ((lo, lo_plus), (hi, hi_plus)) = (values[2 * band_index - 2], values[2 * band_index - 1]);
    let known = |d: f64, plus: bool| (floquet::trace(d, eps) - if plus { 2.0 } else { -2.0 }).abs() < 1e-3;
    if hi - lo > 1e-9 * (1.0 + hi.abs()) && known(lo, lo_plus) && known(hi, hi_plus) {
        let mid = 0.5 * (lo + hi);
        // narrow bands sit close to |tr| = 2, so retry with tighter tolerances
        let tag = [floquet::TRANSITION_TOL, 1e-9, 1e-12]
            .iter()
            .map(|&tol| floquet::classify_with(mid, eps, tol).tag)
            .find(|t| *t != StabilityTag::Transitional);
        if tag != Some(StabilityTag::Stable) {
            return Err(Error::AmbiguousBand { delta: mid });
        }
    }
    Ok(hi - lo)
}
