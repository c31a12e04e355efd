//! Damped Gauss-Newton least squares for a small registry of curve models.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRAD_TOL: f64 = 1e-10;
const STEP_TOL: f64 = 1e-12;
const MAX_ITER: usize = 500;
const MU_CEIL: f64 = 1e16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSpec {
    /// a/(b + e^(cx))
    Expdecay3,
    /// (ax + b)/(x^2 + cx + d)
    Rat12,
    /// (ax^2 + bx + c)/(x^2 + dx + e)
    Rat22,
    /// (ax^3 + bx^2 + cx + d)/(x^3 + ex^2 + fx + g)
    Rat33,
    /// (ax + b)/(x + c)
    Mobius,
}

pub const ALL_MODELS: [ModelSpec; 5] = [ModelSpec::Expdecay3, ModelSpec::Rat12, ModelSpec::Rat22, ModelSpec::Rat33, ModelSpec::Mobius];

impl ModelSpec {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "expdecay3" => ModelSpec::Expdecay3,
            "rat12" => ModelSpec::Rat12,
            "rat22" => ModelSpec::Rat22,
            "rat33" => ModelSpec::Rat33,
            "mobius" => ModelSpec::Mobius,
            _ => return Err(Error::InvalidInput(format!("unknown model '{s}'"))),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            ModelSpec::Expdecay3 => "expdecay3",
            ModelSpec::Rat12 => "rat12",
            ModelSpec::Rat22 => "rat22",
            ModelSpec::Rat33 => "rat33",
            ModelSpec::Mobius => "mobius",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            ModelSpec::Expdecay3 | ModelSpec::Mobius => 3,
            ModelSpec::Rat12 => 4,
            ModelSpec::Rat22 => 5,
            ModelSpec::Rat33 => 7,
        }
    }

    /// Numerator and (monic) denominator degrees of the rational models.
    fn degrees(&self) -> Option<(usize, usize)> {
        match self {
            ModelSpec::Expdecay3 => None,
            ModelSpec::Rat12 => Some((1, 2)),
            ModelSpec::Rat22 => Some((2, 2)),
            ModelSpec::Rat33 => Some((3, 3)),
            ModelSpec::Mobius => Some((1, 1)),
        }
    }

    pub fn eval(&self, p: &[f64], x: f64) -> f64 {
        match self.degrees() {
            None => p[0] / (p[1] + (p[2] * x).exp()),
            Some((nd, dd)) => {
                let (num, den) = rational_parts(p, nd, dd, x);
                num / den
            }
        }
    }

    /// Gradient of the model value with respect to the parameters.
    pub fn grad(&self, p: &[f64], x: f64) -> Vec<f64> {
        match self.degrees() {
            None => {
                let e = (p[2] * x).exp();
                let d = p[1] + e;
                vec![1.0 / d, -p[0] / (d * d), -p[0] * x * e / (d * d)]
            }
            Some((nd, dd)) => {
                let (num, den) = rational_parts(p, nd, dd, x);
                let mut g = Vec::with_capacity(nd + 1 + dd);
                for i in 0..=nd {
                    g.push(x.powi((nd - i) as i32) / den);
                }
                for i in 0..dd {
                    g.push(-num * x.powi((dd - 1 - i) as i32) / (den * den));
                }
                g
            }
        }
    }
}

/// Coefficients in descending powers: numerator first, then the non-leading
/// denominator coefficients.
fn rational_parts(p: &[f64], nd: usize, dd: usize, x: f64) -> (f64, f64) {
    let num = p[..=nd].iter().fold(0.0, |acc, c| acc * x + c);
    let den = p[nd + 1..nd + 1 + dd].iter().fold(1.0, |acc, c| acc * x + c);
    (num, den)
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub model: ModelSpec,
    pub params: Vec<f64>,
    pub rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub rank_deficient: bool,
}

#[derive(Debug, Clone)]
pub enum Init {
    Given(Vec<f64>),
    Auto,
}

fn residuals(model: ModelSpec, p: &[f64], data: &[(f64, f64)]) -> DVector<f64> {
    DVector::from_iterator(data.len(), data.iter().map(|&(x, y)| model.eval(p, x) - y))
}

fn jacobian(model: ModelSpec, p: &[f64], data: &[(f64, f64)]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(data.len(), p.len());
    for (r, &(x, _)) in data.iter().enumerate() {
        for (c, g) in model.grad(p, x).into_iter().enumerate() {
            j[(r, c)] = g;
        }
    }
    j
}

fn cost(r: &DVector<f64>) -> f64 {
    let c = 0.5 * r.norm_squared();
    if c.is_finite() {
        c
    } else {
        f64::INFINITY
    }
}

fn is_rank_deficient(j: &DMatrix<f64>) -> bool {
    let sv = j.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let smin = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    smax == 0.0 || smin <= 1e-10 * smax || sv.len() < j.ncols()
}

/// Levenberg-Marquardt from a single starting point.
pub fn fit_from(model: ModelSpec, data: &[(f64, f64)], init: &[f64]) -> Result<FitResult> {
    let np = model.param_count();
    if init.len() != np {
        return Err(Error::InvalidInput(format!("{} expects {np} parameters, got {}", model.id(), init.len())));
    }
    if data.len() < np + 1 {
        return Err(Error::InsufficientData { need: np + 1, got: data.len() });
    }
    let mut p = init.to_vec();
    let mut r = residuals(model, &p, data);
    let mut c = cost(&r);
    if !c.is_finite() {
        return Err(Error::InvalidInput("model not finite at the initial parameters".into()));
    }
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut j = jacobian(model, &p, data);
    let mut g = j.transpose() * &r;
    let mut converged = g.norm() < GRAD_TOL;
    while !converged && iterations < MAX_ITER {
        iterations += 1;
        let jtj = j.transpose() * &j;
        let mut accepted = false;
        let mut small_step = false;
        let mut factored = false;
        while mu <= MU_CEIL {
            let mut a = jtj.clone();
            for i in 0..np {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                mu *= 4.0;
                continue;
            };
            factored = true;
            let step = chol.solve(&(-&g));
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rt = residuals(model, &trial, data);
            let ct = cost(&rt);
            if ct <= c {
                p = trial;
                r = rt;
                c = ct;
                mu = (mu / 2.0).max(1e-15);
                accepted = true;
            } else {
                mu *= 4.0;
            }
            let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            if step.norm() <= STEP_TOL * (pn + STEP_TOL) {
                small_step = true;
            }
            if accepted || small_step {
                break;
            }
        }
        if !factored {
            return Err(Error::SingularNormalEquations);
        }
        j = jacobian(model, &p, data);
        g = j.transpose() * &r;
        converged = g.norm() < GRAD_TOL;
        if small_step || !accepted {
            break;
        }
    }
    Ok(FitResult {
        model,
        rms_residual: (2.0 * c / data.len() as f64).sqrt(),
        params: p,
        iterations,
        converged,
        gradient_norm: g.norm(),
        rank_deficient: is_rank_deficient(&j),
    })
}

/// Least-squares solution of the problem linearized by multiplying through by
/// the denominator. For `expdecay3`, `c` is fixed and `(a, b)` solved.
fn linearized_start(model: ModelSpec, data: &[(f64, f64)], c_fixed: f64) -> Option<Vec<f64>> {
    let n = data.len();
    let (cols, rhs): (Vec<Vec<f64>>, Vec<f64>) = match model.degrees() {
        None => {
            // a - y b = y e^(cx)
            let cols = data.iter().map(|&(_, y)| vec![1.0, -y]).collect();
            let rhs = data.iter().map(|&(x, y)| y * (c_fixed * x).exp()).collect();
            (cols, rhs)
        }
        Some((nd, dd)) => {
            let cols = data
                .iter()
                .map(|&(x, y)| {
                    let mut row: Vec<f64> = (0..=nd).map(|i| x.powi((nd - i) as i32)).collect();
                    row.extend((0..dd).map(|i| -y * x.powi((dd - 1 - i) as i32)));
                    row
                })
                .collect();
            let rhs = data.iter().map(|&(x, y)| y * x.powi(dd as i32)).collect();
            (cols, rhs)
        }
    };
    let k = cols[0].len();
    let a = DMatrix::from_fn(n, k, |r, c| cols[r][c]);
    let b = DVector::from_vec(rhs);
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    let mut p: Vec<f64> = sol.iter().copied().collect();
    if model.degrees().is_none() {
        p.push(c_fixed);
    }
    p.iter().all(|x| x.is_finite()).then_some(p)
}

fn auto_starts(model: ModelSpec, data: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let np = model.param_count();
    let mut starts = Vec::new();
    match model.degrees() {
        None => {
            for e in -3..=1 {
                for s in [1.0, -1.0] {
                    for m in [1.0, 3.0] {
                        if let Some(p) = linearized_start(model, data, s * m * 10f64.powi(e)) {
                            starts.push(p);
                        }
                    }
                }
            }
        }
        Some(_) => {
            if let Some(p) = linearized_start(model, data, 0.0) {
                starts.push(p);
            }
        }
    }
    for e in -2..=2 {
        for s in [1.0, -1.0] {
            starts.push(vec![s * 10f64.powi(e); np]);
        }
    }
    starts
}

/// Multi-start fit; candidates are reduced by (rms, lexicographic params).
pub fn fit(model: ModelSpec, data: &[(f64, f64)], init: &Init) -> Result<FitResult> {
    let np = model.param_count();
    if data.len() < np + 1 {
        return Err(Error::InsufficientData { need: np + 1, got: data.len() });
    }
    match init {
        Init::Given(p) => fit_from(model, data, p),
        Init::Auto => {
            let starts = auto_starts(model, data);
            let results: Vec<Result<FitResult>> = starts.par_iter().map(|s| fit_from(model, data, s)).collect();
            let mut best: Option<FitResult> = None;
            let mut first_err = None;
            for r in results {
                match r {
                    Ok(f) if f.rms_residual.is_finite() => {
                        let better = match &best {
                            None => true,
                            Some(b) => match f.rms_residual.total_cmp(&b.rms_residual) {
                                std::cmp::Ordering::Less => true,
                                std::cmp::Ordering::Equal => lex_less(&f.params, &b.params),
                                _ => false,
                            },
                        };
                        if better {
                            best = Some(f);
                        }
                    }
                    Ok(_) => {}
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
            best.ok_or_else(|| first_err.unwrap_or(Error::SingularNormalEquations))
        }
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            _ => {}
        }
    }
    false
}

/// Max deviation between analytic and central-difference Jacobians, each
/// entry scaled by `max(|analytic|, 1)`.
pub fn jacobian_check(model: ModelSpec, params: &[f64], xs: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for &x in xs {
        let g = model.grad(params, x);
        for i in 0..params.len() {
            let h = 1e-6 * params[i].abs().max(1.0);
            let mut up = params.to_vec();
            let mut dn = params.to_vec();
            up[i] += h;
            dn[i] -= h;
            let fd = (model.eval(&up, x) - model.eval(&dn, x)) / (2.0 * h);
            worst = worst.max((g[i] - fd).abs() / g[i].abs().max(1.0));
        }
    }
    worst
}

/// Gradient of the cost `0.5 * sum r^2` at `params`.
pub fn cost_gradient(model: ModelSpec, params: &[f64], data: &[(f64, f64)]) -> Vec<f64> {
    let r = residuals(model, params, data);
    let j = jacobian(model, params, data);
    (j.transpose() * r).iter().copied().collect()
}
