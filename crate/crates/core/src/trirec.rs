//! Infinite tridiagonal operators `T(eps)` and their truncations.
//!
//! Row `j` of the eigenproblem `(T - delta) c = 0` reads
//! `-eps*beta(j-1)*c[j-1] + (d_j - delta)*c[j] - eps*alpha(j)*c[j+1] = 0`
//! with `d_j = lambda(j)` plus `gamma*eps` on the first row.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Index-to-value sequence.
pub type Seq = Arc<dyn Fn(i64) -> f64 + Send + Sync>;

pub fn seq<F: Fn(i64) -> f64 + Send + Sync + 'static>(f: F) -> Seq {
    Arc::new(f)
}

pub const TOL_EIG: f64 = 1e-10;
const PIVOT_GUARD: f64 = 1e-300;
const M_START: usize = 40;
const M_CAP: usize = 640;
const ADAPTIVE_TOL: f64 = 1e-8;

#[derive(Clone)]
pub struct TridiagonalSpec {
    pub lambda: Seq,
    /// Superdiagonal coupling: entry (j, j+1) is `-eps*alpha(j)`.
    pub alpha: Seq,
    /// Subdiagonal coupling: entry (j+1, j) is `-eps*beta(j)`.
    pub beta: Seq,
    pub gamma: f64,
    pub eps: f64,
    pub start_index: i64,
    /// Doubly infinite chain; truncations are centered windows.
    pub two_sided: bool,
    /// Largest index at which the sequences may be evaluated.
    pub max_index: Option<i64>,
}

impl std::fmt::Debug for TridiagonalSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TridiagonalSpec")
            .field("gamma", &self.gamma)
            .field("eps", &self.eps)
            .field("start_index", &self.start_index)
            .field("two_sided", &self.two_sided)
            .finish()
    }
}

impl TridiagonalSpec {
    pub fn with_eps(&self, eps: f64) -> Self {
        TridiagonalSpec { eps, ..self.clone() }
    }

    /// Label index of the first row of the order-`m` truncation.
    pub fn first_index(&self, m: usize) -> i64 {
        if self.two_sided {
            -((m / 2) as i64)
        } else {
            self.start_index
        }
    }

    pub fn diag(&self, j: i64) -> f64 {
        let corner = if !self.two_sided && j == self.start_index {
            self.gamma * self.eps
        } else {
            0.0
        };
        (self.lambda)(j) + corner
    }

    pub fn upper(&self, j: i64) -> f64 {
        -self.eps * (self.alpha)(j)
    }

    pub fn lower(&self, j: i64) -> f64 {
        -self.eps * (self.beta)(j)
    }

    fn check_len(&self, last: i64) -> Result<()> {
        match self.max_index {
            Some(mx) if last > mx => Err(Error::SequenceExhausted(mx)),
            _ => Ok(()),
        }
    }

    pub fn truncate(&self, m: usize) -> Result<Truncation> {
        let first = self.first_index(m);
        self.check_len(first + m as i64)?;
        let diag = (0..m).map(|p| self.diag(first + p as i64)).collect();
        let upper = (0..m.saturating_sub(1)).map(|p| self.upper(first + p as i64)).collect();
        let lower = (0..m.saturating_sub(1)).map(|p| self.lower(first + p as i64)).collect();
        Ok(Truncation { first, diag, upper, lower })
    }
}

/// Leading principal (or centered, for two-sided specs) submatrix.
#[derive(Debug, Clone)]
pub struct Truncation {
    pub first: i64,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

impl Truncation {
    pub fn m(&self) -> usize {
        self.diag.len()
    }

    /// Symmetric tridiagonal with couplings `-|.|*sqrt(upper*lower)`.
    pub fn symmetrized(&self) -> Result<SymTridiag> {
        let mut off = Vec::with_capacity(self.upper.len());
        for (p, (&u, &l)) in self.upper.iter().zip(&self.lower).enumerate() {
            let prod = u * l;
            if prod < 0.0 || (prod == 0.0 && (u != 0.0 || l != 0.0)) {
                return Err(Error::NonPositiveProduct { index: self.first + p as i64 });
            }
            off.push(-prod.sqrt());
        }
        Ok(SymTridiag { diag: self.diag.clone(), off })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let m = self.m();
        let mut a = vec![vec![0.0; m]; m];
        for p in 0..m {
            a[p][p] = self.diag[p];
            if p + 1 < m {
                a[p][p + 1] = self.upper[p];
                a[p + 1][p] = self.lower[p];
            }
        }
        a
    }
}

#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

/// Diagonal similarity `kappa_j = sqrt(prod_{i<j} g_i/f_i)`, stored as logs.
#[derive(Debug, Clone)]
pub struct KappaScaling {
    pub first: i64,
    log_kappa: Vec<f64>,
}

impl KappaScaling {
    pub fn kappa(&self, j: i64) -> f64 {
        self.log_kappa[(j - self.first) as usize].exp()
    }

    pub fn log_kappa(&self, j: i64) -> f64 {
        self.log_kappa[(j - self.first) as usize]
    }

    pub fn len(&self) -> usize {
        self.log_kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_kappa.is_empty()
    }
}

/// Symmetric equivalent of `spec` plus the scaling that conjugates one into
/// the other. Couplings are checked on the first `probe` indices.
pub fn symmetrize(spec: &TridiagonalSpec, probe: usize) -> Result<(TridiagonalSpec, KappaScaling)> {
    let first = spec.first_index(probe);
    let mut log_kappa = Vec::with_capacity(probe);
    let mut acc = 0.0;
    for p in 0..probe {
        let j = first + p as i64;
        log_kappa.push(acc);
        let (a, b) = ((spec.alpha)(j), (spec.beta)(j));
        if a * b <= 0.0 {
            return Err(Error::NonPositiveProduct { index: j });
        }
        acc += 0.5 * (b / a).ln();
    }
    let (alpha, beta) = (spec.alpha.clone(), spec.beta.clone());
    let s = seq(move |j| (alpha(j) * beta(j)).sqrt());
    let sym = TridiagonalSpec { alpha: s.clone(), beta: s, ..spec.clone() };
    Ok((sym, KappaScaling { first, log_kappa }))
}

/// Number of eigenvalues strictly below `x`.
pub fn sturm_count(t: &SymTridiag, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (p, &d) in t.diag.iter().enumerate() {
        let b2 = if p == 0 { 0.0 } else { t.off[p - 1] * t.off[p - 1] };
        q = if p == 0 { d - x } else { (d - x) - b2 / q };
        if q.abs() < PIVOT_GUARD {
            q = if q < 0.0 { -PIVOT_GUARD } else { PIVOT_GUARD };
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

pub fn gershgorin(t: &SymTridiag) -> (f64, f64) {
    let m = t.diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in 0..m {
        let r = if p > 0 { t.off[p - 1].abs() } else { 0.0 }
            + if p + 1 < m { t.off[p].abs() } else { 0.0 };
        lo = lo.min(t.diag[p] - r);
        hi = hi.max(t.diag[p] + r);
    }
    let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    (lo - pad, hi + pad)
}

/// k-th smallest eigenvalue (1-based) by bisection inside `[lo, hi]`.
pub fn bisect_kth(t: &SymTridiag, k: usize, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return mid;
        }
        if sturm_count(t, mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

/// Bisection bracket grown geometrically around a seed from a neighbouring
/// curve point; falls back to Gershgorin bounds.
pub fn seeded_kth(t: &SymTridiag, k: usize, seed: f64, tol: f64) -> f64 {
    let (glo, ghi) = gershgorin(t);
    let mut w = 1e-6 * (1.0 + seed.abs());
    for _ in 0..80 {
        let lo = (seed - w).max(glo);
        let hi = (seed + w).min(ghi);
        if sturm_count(t, lo) < k && sturm_count(t, hi) >= k {
            return bisect_kth(t, k, lo, hi, tol);
        }
        if lo <= glo && hi >= ghi {
            break;
        }
        w *= 4.0;
    }
    bisect_kth(t, k, glo, ghi, tol)
}

/// Eigenvalues `k_lo..=k_hi` (1-based) of the symmetrized order-`m` truncation.
pub fn truncated_eigenvalues(
    spec: &TridiagonalSpec,
    m: usize,
    k_lo: usize,
    k_hi: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    if k_lo == 0 || k_hi > m || k_lo > k_hi {
        return Err(Error::IndexOutOfRange { k: if k_lo == 0 { 0 } else { k_hi }, m });
    }
    let t = spec.truncate(m)?.symmetrized()?;
    let (lo, hi) = gershgorin(&t);
    Ok((k_lo..=k_hi).map(|k| bisect_kth(&t, k, lo, hi, tol)).collect())
}

/// Minimal solution of the three-term recurrence by backward recursion from
/// `c[N+1] = 0, c[N] = 1`, normalized so the largest |c| equals 1 and is positive.
/// Entry `p` belongs to label `spec.first_index(n) + p`.
pub fn backward_recursion(spec: &TridiagonalSpec, delta: f64, n: usize) -> Result<Vec<f64>> {
    if spec.eps == 0.0 {
        return Err(Error::EpsilonZero);
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let first = spec.first_index(n);
    spec.check_len(first + n as i64)?;
    let mut c = vec![0.0; n];
    c[n - 1] = 1.0;
    let mut next = 0.0;
    for p in (1..n).rev() {
        let j = first + p as i64;
        // row j: lower(j-1) c[p-1] + (d_j - delta) c[p] + upper(j) c[p+1] = 0
        let v = -((spec.diag(j) - delta) * c[p] + spec.upper(j) * next) / spec.lower(j - 1);
        next = c[p];
        c[p - 1] = v;
        if v.abs() > 1e150 {
            for x in c[p - 1..].iter_mut() {
                *x *= 1e-150;
            }
            next *= 1e-150;
        }
    }
    normalize_max(&mut c);
    Ok(c)
}

pub fn normalize_max(c: &mut [f64]) {
    let mut best = 0.0f64;
    for &x in c.iter() {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best != 0.0 {
        for x in c.iter_mut() {
            *x /= best;
        }
    }
}

/// Eigenvector of a doubly infinite spec: minimal solutions from both ends of
/// the window `[-half, half]`, matched on labels -1 and 0.
pub fn two_sided_minimal(spec: &TridiagonalSpec, delta: f64, half: usize) -> Result<Vec<f64>> {
    if spec.eps == 0.0 {
        return Err(Error::EpsilonZero);
    }
    let h = half as i64;
    let len = 2 * half + 1;
    let at = |j: i64| (j + h) as usize;
    // right tail: labels h down to -1
    let mut right = vec![0.0; len];
    right[at(h)] = 1.0;
    let mut next = 0.0;
    for j in (0..=h).rev() {
        let v = -((spec.diag(j) - delta) * right[at(j)] + spec.upper(j) * next) / spec.lower(j - 1);
        next = right[at(j)];
        right[at(j - 1)] = v;
        if v.abs() > 1e150 {
            for x in right[at(j - 1)..].iter_mut() {
                *x *= 1e-150;
            }
            next *= 1e-150;
        }
    }
    // left tail: labels -h up to 0
    let mut left = vec![0.0; len];
    left[at(-h)] = 1.0;
    let mut prev = 0.0;
    for j in -h..=-1 {
        let v = -((spec.diag(j) - delta) * left[at(j)] + spec.lower(j - 1) * prev) / spec.upper(j);
        prev = left[at(j)];
        left[at(j + 1)] = v;
        if v.abs() > 1e150 {
            for x in left[..=at(j + 1)].iter_mut() {
                *x *= 1e-150;
            }
            prev *= 1e-150;
        }
    }
    let (pivot_l, pivot_r) = if left[at(0)].abs() >= left[at(-1)].abs() {
        (left[at(0)], right[at(0)])
    } else {
        (left[at(-1)], right[at(-1)])
    };
    let mut c = vec![0.0; len];
    for j in -h..=h {
        c[at(j)] = if j >= 0 { right[at(j)] / pivot_r } else { left[at(j)] / pivot_l };
    }
    normalize_max(&mut c);
    Ok(c)
}

/// Leading-order estimate of `l_n - delta` for the order-`n` truncation, from
/// minimal-solution coefficients `c` (length > n) of a one-sided spec.
/// Evaluated on the symmetric form: `eps*sqrt(alpha_n beta_n) c'_n c'_{n+1} / |c'|^2`
/// with `c' = c/kappa`.
pub fn truncation_error_estimate(spec: &TridiagonalSpec, c: &[f64], n: usize) -> Result<f64> {
    if n == 0 || c.len() < n + 1 {
        return Err(Error::IndexOutOfRange { k: n + 1, m: c.len() });
    }
    if spec.eps == 0.0 {
        return Ok(0.0);
    }
    let (_, kap) = symmetrize(spec, c.len())?;
    let first = spec.first_index(c.len());
    // rescale by the largest log-kappa reached by a nonzero entry to avoid overflow
    let shift = (0..c.len())
        .filter(|&p| c[p] != 0.0)
        .map(|p| c[p].abs().ln() - kap.log_kappa(first + p as i64))
        .fold(f64::NEG_INFINITY, f64::max);
    let cp: Vec<f64> = (0..c.len())
        .map(|p| {
            if c[p] == 0.0 {
                0.0
            } else {
                c[p].signum() * (c[p].abs().ln() - kap.log_kappa(first + p as i64) - shift).exp()
            }
        })
        .collect();
    let norm2: f64 = cp.iter().map(|x| x * x).sum();
    let j = first + n as i64 - 1;
    let s = ((spec.alpha)(j) * (spec.beta)(j)).sqrt();
    Ok(spec.eps * s * cp[n - 1] * cp[n] / norm2)
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveEig {
    pub delta: f64,
    pub m: usize,
    pub estimate: f64,
    pub converged: bool,
}

/// k-th eigenvalue with the truncation order doubled from 40 until the error
/// estimate drops below 1e-8 or the cap of 640 is reached.
pub fn adaptive_eigenvalue(spec: &TridiagonalSpec, k: usize, seed: Option<f64>, tol: f64) -> Result<AdaptiveEig> {
    let mut m = M_START;
    while k > m {
        m *= 2;
    }
    let mut prev: Option<f64> = None;
    loop {
        let t = spec.truncate(m)?.symmetrized()?;
        let delta = match seed.or(prev) {
            Some(s) => seeded_kth(&t, k, s, tol),
            None => {
                let (lo, hi) = gershgorin(&t);
                bisect_kth(&t, k, lo, hi, tol)
            }
        };
        let estimate = if spec.eps == 0.0 {
            0.0
        } else if spec.two_sided {
            prev.map_or(f64::INFINITY, |p| (delta - p).abs())
        } else {
            let c = backward_recursion(spec, delta, 2 * m)?;
            truncation_error_estimate(spec, &c, m)?.abs()
        };
        let converged = estimate < ADAPTIVE_TOL;
        if converged || m >= M_CAP {
            return Ok(AdaptiveEig { delta, m, estimate, converged });
        }
        prev = Some(delta);
        m *= 2;
    }
}

/// Forward recursion from `c[0] = 1, c[1] = x1`; follows the dominant branch.
pub fn forward_recursion(spec: &TridiagonalSpec, delta: f64, x1: f64, n: usize) -> Vec<f64> {
    let first = spec.first_index(n);
    let mut c = vec![0.0; n];
    if n == 0 {
        return c;
    }
    c[0] = 1.0;
    if n > 1 {
        c[1] = x1;
    }
    for p in 1..n.saturating_sub(1) {
        let j = first + p as i64;
        c[p + 1] = -((spec.diag(j) - delta) * c[p] + spec.lower(j - 1) * c[p - 1]) / spec.upper(j);
    }
    c
}
