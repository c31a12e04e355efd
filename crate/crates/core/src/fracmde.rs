//! Fractal analogues of the Mathieu coefficient matrices on the Sierpinski gasket.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sgspec::{self, DecimationPath, EigenfunctionCache, SGFunction, Series};
use crate::trirec::{self, seq, TridiagonalSpec};

/// Number of ordered eigenvalues kept per (series, m0), after the prepended 0.
pub const EIGEN_DEPTH: usize = 1400;
pub const DEFAULT_RENDER_LEVEL: usize = 6;
pub const MAX_RENDER_LEVEL: usize = 8;
const COEFF_CUTOFF: f64 = 1e-10;

/// `[0, lambda_1, lambda_2, ...]` for one series and generation of birth.
pub fn eigen_sequence(series: Series, m0: i32) -> Result<Arc<Vec<f64>>> {
    type Cache = Mutex<HashMap<(Series, i32), Arc<Vec<f64>>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&(series, m0)) {
        return Ok(v.clone());
    }
    let mut v = vec![0.0];
    v.extend(sgspec::ordered_eigenvalues(m0, series, EIGEN_DEPTH - 1)?);
    let v = Arc::new(v);
    cache.lock().unwrap().insert((series, m0), v.clone());
    Ok(v)
}

/// `(alpha_j, beta_j)`; `beta_0` is not defined and returned as NaN.
pub fn alpha_beta(lambda: &[f64], j: usize) -> Result<(f64, f64)> {
    if j + 2 >= lambda.len() {
        return Err(Error::SequenceExhausted(lambda.len() as i64 - 1));
    }
    let s = |i: usize| lambda[i].sqrt();
    let den_a = s(j + 2) - s(j);
    if den_a == 0.0 || s(j + 2) == s(j + 1) || s(j + 1) == s(j) {
        return Err(Error::DegenerateSpacing(j));
    }
    let a = (s(j + 2) - s(j + 1)) / den_a;
    let b = if j == 0 {
        f64::NAN
    } else {
        let den_b = s(j + 1) - s(j - 1);
        if den_b == 0.0 || s(j) == s(j - 1) {
            return Err(Error::DegenerateSpacing(j));
        }
        (s(j) - s(j - 1)) / den_b
    };
    Ok((a, b))
}

#[derive(Debug, Clone, Serialize)]
pub struct FractalVersion {
    pub v: u8,
    pub series: Series,
    pub m0: i32,
    #[serde(skip)]
    pub lambda: Arc<Vec<f64>>,
}

impl FractalVersion {
    pub fn new(v: u8, series: Series, m0: i32) -> Result<Self> {
        if !(1..=4).contains(&v) {
            return Err(Error::InvalidInput(format!("version must be 1..4, got {v}")));
        }
        Ok(FractalVersion { v, series, m0, lambda: eigen_sequence(series, m0)? })
    }

    /// Versions 1 and 3 start at label 0 (constant eigenfunction).
    pub fn start_index(&self) -> i64 {
        if self.v % 2 == 1 {
            0
        } else {
            1
        }
    }

    /// Eigenvalue at ε = 0 of curve `k` (1-based).
    pub fn delta_at_zero(&self, k: usize) -> f64 {
        self.lambda[k - 1 + self.start_index() as usize]
    }
}

pub fn build_fractal_spec(fv: &FractalVersion, eps: f64) -> Result<TridiagonalSpec> {
    let lam = fv.lambda.clone();
    let n = lam.len();
    // couplings reach lambda_{j+2}
    let max_index = n as i64 - 3;
    let (alpha, beta): (Vec<f64>, Vec<f64>) = if fv.v <= 2 {
        (vec![0.5; n], vec![0.5; n])
    } else {
        let mut a = vec![f64::NAN; n];
        let mut b = vec![f64::NAN; n];
        for j in 0..(n - 2) {
            let (x, y) = alpha_beta(&lam, j)?;
            a[j] = x;
            b[j] = y;
        }
        (a, b)
    };
    let mut beta = beta;
    if fv.v == 1 || fv.v == 3 {
        beta[0] = 1.0;
    }
    let (alpha, beta) = (Arc::new(alpha), Arc::new(beta));
    let lam2 = lam.clone();
    Ok(TridiagonalSpec {
        lambda: seq(move |j| lam2[j as usize]),
        alpha: seq(move |j| alpha[j as usize]),
        beta: seq(move |j| beta[j as usize]),
        gamma: 0.0,
        eps,
        start_index: fv.start_index(),
        two_sided: false,
        max_index: Some(max_index),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FractalCurvePoint {
    pub eps: f64,
    pub delta: f64,
    pub m_used: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FractalCurve {
    pub version: u8,
    pub series: Series,
    pub m0: i32,
    pub k: usize,
    pub points: Vec<FractalCurvePoint>,
}

pub fn fractal_point(fv: &FractalVersion, k: usize, eps: f64, seed: Option<f64>) -> Result<FractalCurvePoint> {
    if k == 0 {
        return Err(Error::IndexOutOfRange { k, m: 0 });
    }
    let spec = build_fractal_spec(fv, eps)?;
    let r = trirec::adaptive_eigenvalue(&spec, k, seed, 0.0)?;
    Ok(FractalCurvePoint { eps, delta: r.delta, m_used: r.m })
}

/// k-th transition curve over `eps_grid`, seeding each point with the previous.
pub fn fractal_transition_curve(fv: &FractalVersion, k: usize, eps_grid: &[f64]) -> Result<FractalCurve> {
    let mut points = Vec::with_capacity(eps_grid.len());
    let mut seed = None;
    for &eps in eps_grid {
        let p = fractal_point(fv, k, eps, seed)?;
        seed = Some(p.delta);
        points.push(p);
    }
    Ok(FractalCurve { version: fv.v, series: fv.series, m0: fv.m0, k, points })
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoteReport {
    pub eps: Vec<f64>,
    pub ratios: Vec<f64>,
    pub last: f64,
    /// Least-squares slope of the ratio against `1/sqrt(|eps|)`.
    pub slope: f64,
}

pub fn asymptote_ratio(fv: &FractalVersion, k: usize, eps_list: &[f64]) -> Result<AsymptoteReport> {
    if eps_list.contains(&0.0) {
        return Err(Error::EpsilonZero);
    }
    let mut ratios = Vec::with_capacity(eps_list.len());
    for &e in eps_list {
        ratios.push(fractal_point(fv, k, e, None)?.delta / e);
    }
    let xs: Vec<f64> = eps_list.iter().map(|e| 1.0 / e.abs().sqrt()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ratios.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ratios).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    Ok(AsymptoteReport { eps: eps_list.to_vec(), last: *ratios.last().unwrap_or(&f64::NAN), ratios, slope })
}

#[derive(Debug, Clone)]
pub struct FractalSolution {
    pub version: FractalVersion,
    pub k: usize,
    pub delta: f64,
    pub eps: f64,
    pub m_used: usize,
    /// Minimal-solution coefficients; entry `p` has label `start_index + p`.
    pub coeffs: Vec<f64>,
    /// Number of leading coefficients used in the synthesized field.
    pub n_terms: usize,
    pub field: SGFunction,
}

impl FractalSolution {
    pub fn label(&self, p: usize) -> i64 {
        self.version.start_index() + p as i64
    }

    /// max over rows `0..len-1` of |(T - delta) c| divided by max |c|.
    pub fn matrix_residual(&self) -> Result<f64> {
        let spec = build_fractal_spec(&self.version, self.eps)?;
        let c = &self.coeffs;
        let n = c.len();
        let first = spec.start_index;
        let cmax = c.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut r = 0.0f64;
        for p in 0..n.saturating_sub(1) {
            let j = first + p as i64;
            let mut s = (spec.diag(j) - self.delta) * c[p] + spec.upper(j) * c[p + 1];
            if p > 0 {
                s += spec.lower(j - 1) * c[p - 1];
            }
            r = r.max(s.abs());
        }
        Ok(r / cmax)
    }

    /// Worst relative deviation of `c_j/c_{j-1}` from `beta_{j-1} eps/(lambda_j - delta)`
    /// over the decaying tail, away from the recursion start.
    pub fn tail_ratio_deviation(&self) -> Result<f64> {
        if self.eps == 0.0 {
            return Ok(0.0);
        }
        let spec = build_fractal_spec(&self.version, self.eps)?;
        let c = &self.coeffs;
        let n = c.len();
        let mut worst = 0.0f64;
        let mut used = 0;
        for p in 1..n.saturating_sub(20) {
            let (a, b) = (c[p - 1], c[p]);
            if a.abs() > 1e-20 || b.abs() < 1e-250 {
                continue;
            }
            let j = self.label(p);
            let predicted = (spec.beta)(j - 1) * self.eps / ((spec.lambda)(j) - self.delta);
            worst = worst.max((b / a / predicted - 1.0).abs());
            used += 1;
        }
        if used == 0 {
            return Err(Error::InvalidInput("no decaying tail in coefficient vector".into()));
        }
        Ok(worst)
    }
}

/// Eigenfunction basis element for label `j`: constant for label 0, otherwise
/// the path with index `j - 1` of the version's series.
pub fn basis_function(fv: &FractalVersion, j: i64, m: usize, cache: &EigenfunctionCache) -> Result<Arc<SGFunction>> {
    if j == 0 {
        let lv = sgspec::level(m)?;
        let n = lv.len();
        return Ok(Arc::new(SGFunction { level: lv, values: vec![1.0; n] }));
    }
    let p = DecimationPath::from_index(2, fv.series, (j - 1) as u64);
    cache.get(&p, m)
}

/// `u = sum c_j phi_j` rendered on `V_m` for the k-th curve at `eps`.
pub fn fractal_solution(fv: &FractalVersion, k: usize, eps: f64, m: usize, cache: &EigenfunctionCache) -> Result<FractalSolution> {
    if m > MAX_RENDER_LEVEL {
        return Err(Error::LevelTooLarge(m));
    }
    let pt = fractal_point(fv, k, eps, None)?;
    let coeffs = if eps == 0.0 {
        let mut c = vec![0.0; k];
        c[k - 1] = 1.0;
        c
    } else {
        let spec = build_fractal_spec(fv, eps)?;
        let n = (2 * pt.m_used).min(spec.max_index.unwrap_or(i64::MAX) as usize - 1);
        trirec::backward_recursion(&spec, pt.delta, n)?
    };
    let cmax = coeffs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let n_terms = coeffs.iter().rposition(|c| c.abs() >= COEFF_CUTOFF * cmax).map_or(0, |p| p + 1);
    let lv = sgspec::level(m)?;
    let mut values = vec![0.0; lv.len()];
    for (p, &c) in coeffs.iter().take(n_terms).enumerate() {
        if c == 0.0 {
            continue;
        }
        let phi = basis_function(fv, fv.start_index() + p as i64, m, cache)?;
        for (v, x) in values.iter_mut().zip(&phi.values) {
            *v += c * x;
        }
    }
    let mut best = 0.0f64;
    for &v in &values {
        if v.abs() > best.abs() {
            best = v;
        }
    }
    if best != 0.0 {
        for v in values.iter_mut() {
            *v /= best;
        }
    }
    Ok(FractalSolution {
        version: fv.clone(),
        k,
        delta: pt.delta,
        eps,
        m_used: pt.m_used,
        coeffs,
        n_terms,
        field: SGFunction { level: lv, values },
    })
}

/// Vertices strictly above all graph neighbours, largest value first.
pub fn find_peaks_on_sg(f: &SGFunction) -> Vec<(usize, f64)> {
    let lv = &f.level;
    let mut peaks: Vec<(usize, f64)> = (0..lv.len())
        .filter(|&v| lv.neighbors[v].iter().all(|&y| f.values[v] > f.values[y]))
        .map(|v| (v, f.values[v]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    peaks
}
