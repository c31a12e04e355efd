//! Sierpinski gasket graphs, Neumann Laplacians and spectral decimation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_LEVEL: usize = 10;
const PSI_RTOL: f64 = 1e-13;
const PSI_MAX_ITER: usize = 60;

/// Level-m graph approximation. Vertices are ordered by their owning
/// address word (lexicographically smallest word among shared corners).
#[derive(Debug, Clone)]
pub struct SGLevel {
    pub m: usize,
    pub points: Vec<[f64; 2]>,
    /// Coordinates in the basis (q1, q2), scaled by 2^m.
    pub lattice: Vec<(i64, i64)>,
    pub words: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub neighbors: Vec<Vec<usize>>,
    pub boundary: [usize; 3],
    /// Corners `[F_w(q0), F_w(q1), F_w(q2)]` of every m-cell, in word order.
    pub cells: Vec<[usize; 3]>,
    index: HashMap<(i64, i64), usize>,
}

impl SGLevel {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, lattice: (i64, i64)) -> Option<usize> {
        self.index.get(&lattice).copied()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary.contains(&v)
    }

    /// Vertex weights of the natural measure: 1 inside, 1/2 at the boundary.
    pub fn weight(&self, v: usize) -> f64 {
        if self.is_boundary(v) {
            0.5
        } else {
            1.0
        }
    }

    /// `-Delta_m u` with reflection (doubled) rows at the three boundary vertices.
    pub fn neg_laplacian(&self, u: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|x| {
                let s: f64 = self.neighbors[x].iter().map(|&y| u[x] - u[y]).sum();
                s / self.weight(x)
            })
            .collect()
    }
}

fn unit(i: u8) -> (i64, i64) {
    match i {
        0 => (0, 0),
        1 => (1, 0),
        _ => (0, 1),
    }
}

pub fn build_level(m: usize) -> Result<SGLevel> {
    if m > MAX_LEVEL {
        return Err(Error::LevelTooLarge(m));
    }
    let scale = 1i64 << m;
    let ncells = 3usize.pow(m as u32);
    let nv = (3usize.pow(m as u32 + 1) + 3) / 2;
    let mut lv = SGLevel {
        m,
        points: Vec::with_capacity(nv),
        lattice: Vec::with_capacity(nv),
        words: Vec::with_capacity(nv),
        edges: Vec::with_capacity(3 * ncells),
        neighbors: vec![Vec::new(); nv],
        boundary: [0; 3],
        cells: Vec::with_capacity(ncells),
        index: HashMap::with_capacity(nv),
    };
    let h = 3f64.sqrt() / 2.0;
    let mut digits = vec![0u8; m];
    for c in 0..ncells {
        let mut r = c;
        for k in (0..m).rev() {
            digits[k] = (r % 3) as u8;
            r /= 3;
        }
        let mut base = (0i64, 0i64);
        for (k, &d) in digits.iter().enumerate() {
            let (a, b) = unit(d);
            let s = 1i64 << (m - 1 - k);
            base = (base.0 + a * s, base.1 + b * s);
        }
        let mut corner = [0usize; 3];
        for i in 0..3u8 {
            let (a, b) = unit(i);
            let key = (base.0 + a, base.1 + b);
            let id = *lv.index.entry(key).or_insert_with(|| {
                let id = lv.points.len();
                lv.points.push([(key.0 as f64 + 0.5 * key.1 as f64) / scale as f64, key.1 as f64 * h / scale as f64]);
                lv.lattice.push(key);
                let mut w: String = digits.iter().map(|d| char::from(b'0' + d)).collect();
                w.push(char::from(b'0' + i));
                lv.words.push(w);
                id
            });
            corner[i as usize] = id;
        }
        for (p, q) in [(0, 1), (1, 2), (0, 2)] {
            let (a, b) = (corner[p], corner[q]);
            lv.edges.push((a.min(b), a.max(b)));
            lv.neighbors[a].push(b);
            lv.neighbors[b].push(a);
        }
        lv.cells.push(corner);
    }
    lv.boundary = [lv.index[&(0, 0)], lv.index[&(scale, 0)], lv.index[&(0, scale)]];
    Ok(lv)
}

/// Shared, build-once levels.
pub fn level(m: usize) -> Result<Arc<SGLevel>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SGLevel>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(l) = cache.lock().unwrap().get(&m) {
        return Ok(l.clone());
    }
    let l = Arc::new(build_level(m)?);
    cache.lock().unwrap().entry(m).or_insert_with(|| l.clone());
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn symbol(&self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// Inverse branches of `x -> x(5 - x)`.
pub fn psi(sign: Sign, x: f64) -> Result<f64> {
    if x > 6.25 || x.is_nan() {
        return Err(Error::DomainError(x));
    }
    let r = (25.0 - 4.0 * x).sqrt();
    Ok(match sign {
        Sign::Plus => 0.5 * (5.0 + r),
        Sign::Minus => 2.0 * x / (5.0 + r),
    })
}

/// `Psi(x) = (3/2) lim 5^l psi_-^l(x)`.
pub fn big_psi(x: f64) -> Result<f64> {
    let mut y = x;
    let mut v = x;
    let mut scale = 1.0;
    for _ in 0..PSI_MAX_ITER {
        y = psi(Sign::Minus, y)?;
        scale *= 5.0;
        let nv = scale * y;
        let done = (nv - v).abs() <= PSI_RTOL * nv.abs();
        v = nv;
        if done {
            break;
        }
    }
    Ok(1.5 * v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Series {
    Five,
    Six,
}

impl Series {
    pub fn from_value(v: u32) -> Result<Self> {
        match v {
            5 => Ok(Series::Five),
            6 => Ok(Series::Six),
            _ => Err(Error::InvalidInput(format!("series must be 5 or 6, got {v}"))),
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Series::Five => 5.0,
            Series::Six => 6.0,
        }
    }
}

/// Decimation path `e` (with `e_1 = +`), generation of birth `m0` and series.
/// `psi_e = psi_{e_1} o ... o psi_{e_n}`: `e_n` acts first on the initial value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecimationPath {
    pub m0: i32,
    pub series: Series,
    pub e: Vec<Sign>,
}

impl DecimationPath {
    pub fn new(m0: i32, series: Series, e: Vec<Sign>) -> Result<Self> {
        if e.first() == Some(&Sign::Minus) {
            return Err(Error::InvalidInput("decimation path must start with +".into()));
        }
        Ok(DecimationPath { m0, series, e })
    }

    pub fn from_index(m0: i32, series: Series, d: u64) -> Self {
        DecimationPath { m0, series, e: path_of_index(d) }
    }

    pub fn symbols(&self) -> String {
        self.e.iter().map(|s| s.symbol()).collect()
    }

    /// Level eigenvalues `lambda_{m0}, lambda_{m0+1}, ...` through the explicit
    /// part of the path followed by `extra` steps of `psi_-`.
    pub fn level_sequence(&self, extra: usize) -> Vec<f64> {
        let mut s = vec![self.series.value()];
        if self.series == Series::Six {
            s.push(3.0);
        }
        for sign in self.e.iter().rev() {
            let x = *s.last().unwrap();
            s.push(psi(*sign, x).expect("level eigenvalues stay in [0, 6]"));
        }
        for _ in 0..extra {
            let x = *s.last().unwrap();
            s.push(psi(Sign::Minus, x).expect("level eigenvalues stay in [0, 6]"));
        }
        s
    }

    /// Number of explicit decimation steps after birth.
    pub fn explicit_steps(&self) -> usize {
        self.e.len() + usize::from(self.series == Series::Six)
    }
}

pub fn lambda_of_path(p: &DecimationPath) -> f64 {
    let s = p.level_sequence(0);
    let n = p.explicit_steps() as i32;
    5f64.powi(p.m0 + n) * big_psi(*s.last().unwrap()).expect("in domain")
}

pub fn d_of_path(e: &[Sign]) -> u64 {
    let mut d = 0u64;
    let mut digit = 0u64;
    for (i, s) in e.iter().enumerate() {
        digit = if i == 0 {
            1
        } else if *s == Sign::Plus {
            1 - digit
        } else {
            digit
        };
        d = 2 * d + digit;
    }
    d
}

pub fn path_of_index(d: u64) -> Vec<Sign> {
    if d == 0 {
        return Vec::new();
    }
    let n = 64 - d.leading_zeros() as usize;
    let mut e = Vec::with_capacity(n);
    let mut prev = 1;
    for i in 0..n {
        let digit = (d >> (n - 1 - i)) & 1;
        e.push(if i == 0 || digit != prev { Sign::Plus } else { Sign::Minus });
        prev = digit;
    }
    e
}

/// `lambda_1 < ... < lambda_count` of one series, via d-ordering.
pub fn ordered_eigenvalues(m0: i32, series: Series, count: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = (0..count as u64)
        .map(|d| lambda_of_path(&DecimationPath::from_index(m0, series, d)))
        .collect();
    if let Some(i) = v.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(format!("eigenvalue order violated at index {}", i + 1)));
    }
    Ok(v)
}

fn interval_image(sign: Sign, lo: f64, hi: f64) -> (f64, f64) {
    let a = psi(sign, lo).expect("in domain");
    let b = psi(sign, hi).expect("in domain");
    (a.min(b), a.max(b))
}

/// `rho(x) = #{e : lambda_e <= x}` by pruned enumeration of paths.
pub fn counting_function(m0: i32, series: Series, x: f64) -> usize {
    let init = if series == Series::Six { 3.0 } else { 5.0 };
    let shift = m0 + i32::from(series == Series::Six);
    let mut count = usize::from(5f64.powi(shift) * big_psi(init).expect("in domain") <= x);
    let floor = big_psi(2.5).expect("in domain");
    let mut n = 1;
    while 5f64.powi(shift + n as i32) * floor <= x {
        // prefix e_1 = + ; interval image of [0, 5] under the chosen prefix
        let mut stack: Vec<(usize, Vec<Sign>, f64)> = vec![(1, vec![Sign::Plus], interval_image(Sign::Plus, 0.0, 5.0).0)];
        let scale = 5f64.powi(shift + n as i32);
        while let Some((len, e, lo)) = stack.pop() {
            if scale * big_psi(lo).expect("in domain") > x {
                continue;
            }
            if len == n {
                let mut v = init;
                for s in e.iter().rev() {
                    v = psi(*s, v).expect("in domain");
                }
                if scale * big_psi(v).expect("in domain") <= x {
                    count += 1;
                }
                continue;
            }
            for s in [Sign::Minus, Sign::Plus] {
                // compose the next inner map: new image = prefix(psi_s([0,5]))
                let (a, b) = interval_image(s, 0.0, 5.0);
                let mut img = (a, b);
                for t in e.iter().rev() {
                    img = interval_image(*t, img.0, img.1);
                }
                let mut e2 = e.clone();
                e2.push(s);
                stack.push((len + 1, e2, img.0));
            }
        }
        n += 1;
    }
    count
}

/// Real values on the vertex set of one level.
#[derive(Debug, Clone)]
pub struct SGFunction {
    pub level: Arc<SGLevel>,
    pub values: Vec<f64>,
}

impl SGFunction {
    /// max |(-Delta u) - lambda u| over all vertices (boundary rows use the
    /// reflection stencil).
    pub fn eigen_residual(&self, lambda: f64) -> f64 {
        let lu = self.level.neg_laplacian(&self.values);
        lu.iter().zip(&self.values).map(|(a, u)| (a - lambda * u).abs()).fold(0.0, f64::max)
    }

    pub fn interior_residual(&self, lambda: f64) -> f64 {
        let lu = self.level.neg_laplacian(&self.values);
        (0..self.values.len())
            .filter(|&v| !self.level.is_boundary(v))
            .map(|v| (lu[v] - lambda * self.values[v]).abs())
            .fold(0.0, f64::max)
    }

    /// Weighted inner product with the natural vertex measure.
    pub fn inner(&self, other: &SGFunction) -> f64 {
        (0..self.values.len()).map(|v| self.level.weight(v) * self.values[v] * other.values[v]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a: f64, b| a.max(b.abs()))
    }

    /// Restriction to a coarser level.
    pub fn restrict(&self, m: usize) -> Result<SGFunction> {
        let coarse = level(m)?;
        let s = 1i64 << (self.level.m - m);
        let values = coarse
            .lattice
            .iter()
            .map(|&(a, b)| self.values[self.level.index_of((a * s, b * s)).expect("nested vertex sets")])
            .collect();
        Ok(SGFunction { level: coarse, values })
    }

    /// Discrete normal derivative `(5/3)^m (2u(q_i) - sum of the two neighbours)`.
    pub fn normal_derivatives(&self) -> [f64; 3] {
        let f = (5.0f64 / 3.0).powi(self.level.m as i32);
        self.level.boundary.map(|q| {
            let s: f64 = self.level.neighbors[q].iter().map(|&y| self.values[y]).sum();
            f * (2.0 * self.values[q] - s)
        })
    }
}

/// Unique `lambda_m`-eigenfunction on `V_m` extending `f` (a level-(m-1)
/// eigenfunction for `lambda_m (5 - lambda_m)`).
pub fn extend_eigenfunction(f: &SGFunction, lambda_m: f64) -> Result<SGFunction> {
    for bad in [2.0, 5.0, 6.0] {
        if (lambda_m - bad).abs() < 1e-12 {
            return Err(Error::ForbiddenEigenvalue(lambda_m));
        }
    }
    let coarse = &f.level;
    let fine = level(coarse.m + 1)?;
    let mut values = vec![f64::NAN; fine.len()];
    for (v, &(a, b)) in coarse.lattice.iter().enumerate() {
        values[fine.index_of((2 * a, 2 * b)).expect("nested")] = f.values[v];
    }
    let den = (2.0 - lambda_m) * (5.0 - lambda_m);
    for cell in &coarse.cells {
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (0, 2, 1)] {
            let (li, lj) = (coarse.lattice[cell[i]], coarse.lattice[cell[j]]);
            let y = fine.index_of((li.0 + lj.0, li.1 + lj.1)).expect("midpoint vertex");
            let (ui, uj, uk) = (f.values[cell[i]], f.values[cell[j]], f.values[cell[k]]);
            values[y] = ((4.0 - lambda_m) * (ui + uj) + 2.0 * uk) / den;
        }
    }
    Ok(SGFunction { level: fine, values })
}

/// Generation-2 initial eigenfunction for `lambda_init` in {5, 6} with equal
/// boundary values, chosen as the projection of the reference sign pattern
/// on the eigenspace.
pub fn initial_eigenfunction(series: Series) -> Result<SGFunction> {
    let lv = level(2)?;
    let n = lv.len();
    let lam = series.value();
    let mut s = DMatrix::<f64>::zeros(n, n);
    let w: Vec<f64> = (0..n).map(|v| lv.weight(v)).collect();
    for &(a, b) in &lv.edges {
        let c = 1.0 / (w[a] * w[b]).sqrt();
        s[(a, b)] -= c;
        s[(b, a)] -= c;
        s[(a, a)] += 1.0 / w[a];
        s[(b, b)] += 1.0 / w[b];
    }
    let eig = s.symmetric_eigen();
    let cols: Vec<usize> = (0..n).filter(|&i| (eig.eigenvalues[i] - lam).abs() < 1e-8).collect();
    if cols.is_empty() {
        return Err(Error::EigenvalueAbsent(lam));
    }
    // eigenbasis of M^-1 L: u = M^-1/2 v
    let mut u = DMatrix::<f64>::zeros(n, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        for v in 0..n {
            u[(v, c)] = eig.eigenvectors[(v, i)] / w[v].sqrt();
        }
    }
    let [q0, q1, q2] = lv.boundary;
    let mut con = DMatrix::<f64>::zeros(2, cols.len());
    for c in 0..cols.len() {
        con[(0, c)] = u[(q0, c)] - u[(q1, c)];
        con[(1, c)] = u[(q1, c)] - u[(q2, c)];
    }
    let null = null_space(&con, cols.len());
    if null.ncols() == 0 {
        return Err(Error::EigenvalueAbsent(lam));
    }
    let basis = &u * &null;
    let target = reference_pattern(&lv, series);
    let wm = DMatrix::from_diagonal(&DVector::from_vec(w.clone()));
    let g = basis.transpose() * &wm * &basis;
    let rhs = basis.transpose() * &wm * &target;
    let coef = g.lu().solve(&rhs).ok_or(Error::EigenvalueAbsent(lam))?;
    let vals = &basis * coef;
    let scale = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if scale < 1e-12 {
        return Err(Error::EigenvalueAbsent(lam));
    }
    Ok(SGFunction { level: lv, values: vals.iter().map(|x| x / scale).collect() })
}

fn null_space(a: &DMatrix<f64>, ncols: usize) -> DMatrix<f64> {
    // right singular vectors with zero singular value
    let mut full = DMatrix::<f64>::zeros(ncols.max(a.nrows()), ncols);
    full.rows_mut(0, a.nrows()).copy_from(a);
    let svd = full.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let tol = 1e-10 * svd.singular_values.iter().fold(1.0f64, |m, &s| m.max(s));
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] <= tol).collect();
    let mut out = DMatrix::<f64>::zeros(ncols, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        for r in 0..ncols {
            out[(r, c)] = vt[(i, r)];
        }
    }
    out
}

/// Reference sign patterns on `V_2` (lattice scale 4). Series 5: +-1
/// alternating around the outer cycle of the six quarter points of the
/// boundary edges. Series 6: +1 at the level-1 edge midpoints, -1 at the
/// midpoints of the central hole's edges.
pub fn reference_pattern(lv: &SGLevel, series: Series) -> DVector<f64> {
    let mut t = DVector::<f64>::zeros(lv.len());
    let put = |t: &mut DVector<f64>, p: (i64, i64), v: f64| t[lv.index_of(p).expect("level-2 vertex")] = v;
    match series {
        Series::Five => {
            let cycle = [(1, 0), (3, 0), (3, 1), (1, 3), (0, 3), (0, 1)];
            for (i, p) in cycle.iter().enumerate() {
                put(&mut t, *p, if i % 2 == 0 { 1.0 } else { -1.0 });
            }
        }
        Series::Six => {
            for p in [(2, 0), (2, 2), (0, 2)] {
                put(&mut t, p, 1.0);
            }
            for p in [(1, 1), (2, 1), (1, 2)] {
                put(&mut t, p, -1.0);
            }
        }
    }
    t
}

/// Eigenfunction of path `p` on `V_m` (m >= 2), extended from the generation-2
/// initial function through the path's level eigenvalues, then `psi_-`.
pub fn eigenfunction_values(p: &DecimationPath, init: &SGFunction, m: usize) -> Result<SGFunction> {
    if m < 2 {
        return Err(Error::InvalidInput("render level must be at least 2".into()));
    }
    let steps = m - 2;
    let seq = p.level_sequence(steps.saturating_sub(p.explicit_steps()));
    let mut f = init.clone();
    for &lam in seq.iter().skip(1).take(steps) {
        f = extend_eigenfunction(&f, lam)?;
    }
    Ok(f)
}

/// Build-once cache of path eigenfunctions keyed by (path, level).
#[derive(Default)]
pub struct EigenfunctionCache {
    map: Mutex<HashMap<(DecimationPath, usize), Arc<SGFunction>>>,
    inits: Mutex<HashMap<Series, Arc<SGFunction>>>,
}

impl EigenfunctionCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn initial(&self, series: Series) -> Result<Arc<SGFunction>> {
        if let Some(f) = self.inits.lock().unwrap().get(&series) {
            return Ok(f.clone());
        }
        let f = Arc::new(initial_eigenfunction(series)?);
        self.inits.lock().unwrap().insert(series, f.clone());
        Ok(f)
    }

    pub fn get(&self, p: &DecimationPath, m: usize) -> Result<Arc<SGFunction>> {
        let key = (p.clone(), m);
        if let Some(f) = self.map.lock().unwrap().get(&key) {
            return Ok(f.clone());
        }
        let init = self.initial(p.series)?;
        let f = Arc::new(eigenfunction_values(p, &init, m)?);
        self.map.lock().unwrap().insert(key, f.clone());
        Ok(f)
    }
}
