//! Principal component extraction with varimax rotation.
//!
//! Variables are the citing journals of an environment (rows of its
//! sub-matrix); observations are the cited columns. Components come from a
//! cyclic Jacobi eigendecomposition of the Pearson correlation matrix and
//! are rotated with Kaiser's pairwise varimax, optionally on
//! communality-normalized rows.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::environment::Environment;

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;
pub const DEFAULT_DISPLAY_CUTOFF: f64 = 0.1;

/// Residual bound for accepted eigenpairs, relative to `max(1, |A|_F)`.
pub const EIGEN_RESIDUAL_TOLERANCE: f64 = 1e-10;
const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum FactorError {
    #[error("need at least 2 variables, got {0}")]
    TooFewVariables(usize),
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("zero variance variable {0:?}")]
    ZeroVariance(String),
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),
    #[error("eigen iteration did not converge, residual norm {residual:e}")]
    NoConvergence { residual: f64 },
    #[error("requested {requested} components from {available} variables")]
    TooManyComponents { requested: usize, available: usize },
    #[error("no components retained")]
    NoComponents,
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("variable {0:?} has zero communality and cannot be Kaiser-normalized")]
    ZeroCommunality(String),
    #[error("loading row {0} has zero communality and cannot be Kaiser-normalized")]
    ZeroCommunalityRow(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentCount {
    Fixed(usize),
    /// Retain eigenvalues strictly greater than one.
    Kaiser,
}

impl FromStr for ComponentCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("kaiser") {
            return Ok(ComponentCount::Kaiser);
        }
        match s.parse::<usize>() {
            Ok(0) => Err("component count must be at least 1".into()),
            Ok(k) => Ok(ComponentCount::Fixed(k)),
            Err(_) => Err(format!("expected a positive integer or \"kaiser\", got {s:?}")),
        }
    }
}

impl fmt::Display for ComponentCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentCount::Fixed(k) => write!(f, "{k}"),
            ComponentCount::Kaiser => f.write_str("kaiser"),
        }
    }
}

/// Pearson correlation between rows of `data`.
pub fn correlation_of_rows(names: &[String], data: &[Vec<f64>]) -> Result<DMatrix<f64>, FactorError> {
    let p = data.len();
    if p < 2 {
        return Err(FactorError::TooFewVariables(p));
    }
    let n = data[0].len();
    if n < 2 {
        return Err(FactorError::TooFewObservations(n));
    }
    // Standardize each row to zero mean and unit norm; correlations are then
    // plain dot products.
    let mut z = Vec::with_capacity(p);
    for (k, row) in data.iter().enumerate() {
        let mean = row.iter().sum::<f64>() / n as f64;
        let centred: Vec<f64> = row.iter().map(|x| x - mean).collect();
        let norm = centred.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            let name = names.get(k).cloned().unwrap_or_else(|| format!("#{k}"));
            return Err(FactorError::ZeroVariance(name));
        }
        z.push(centred.into_iter().map(|x| x / norm).collect::<Vec<_>>());
    }
    let mut r = DMatrix::identity(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            let c: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum();
            let c = c.clamp(-1.0, 1.0);
            r[(i, j)] = c;
            r[(j, i)] = c;
        }
    }
    Ok(r)
}

/// Correlation matrix of the environment's citing patterns (rows).
pub fn correlation_matrix(env: &Environment) -> Result<DMatrix<f64>, FactorError> {
    let rows: Vec<Vec<f64>> = env
        .sub_matrix
        .rows()
        .map(|r| r.iter().map(|&c| c as f64).collect())
        .collect();
    correlation_of_rows(&env.members, &rows)
}

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Column `c` pairs with `values[c]`.
    pub vectors: DMatrix<f64>,
    /// Largest `|Av - λv|` over all pairs.
    pub residual: f64,
    pub sweeps: usize,
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<(), FactorError> {
    if a.nrows() != a.ncols() {
        return Err(FactorError::NotSquare(a.nrows(), a.ncols()));
    }
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = a[(i, j)].abs().max(a[(j, i)].abs()).max(1.0);
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                return Err(FactorError::NotSymmetric { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn symmetric_eigen(input: &DMatrix<f64>) -> Result<SymmetricEigen, FactorError> {
    check_symmetric(input)?;
    let n = input.nrows();
    let mut a = input.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let norm = input.norm();

    let off = |a: &DMatrix<f64>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[(i, j)] * a[(i, j)];
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        let o = off(&a);
        if o == 0.0 || o <= f64::EPSILON * norm {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]).then(x.cmp(&y)));
    let values: Vec<f64> = order.iter().map(|&k| a[(k, k)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);

    let mut residual: f64 = 0.0;
    for (c, &lambda) in values.iter().enumerate() {
        let col = vectors.column(c);
        let r = (input * col - col * lambda).norm();
        residual = residual.max(r);
    }
    if residual > EIGEN_RESIDUAL_TOLERANCE * norm.max(1.0) {
        return Err(FactorError::NoConvergence { residual });
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        residual,
        sweeps,
    })
}

/// Flip each column so that its largest-magnitude entry is positive.
/// Returns the applied signs.
fn orient_columns(m: &mut DMatrix<f64>) -> Vec<f64> {
    let mut signs = Vec::with_capacity(m.ncols());
    for c in 0..m.ncols() {
        let mut best = 0.0f64;
        for r in 0..m.nrows() {
            if m[(r, c)].abs() > best.abs() {
                best = m[(r, c)];
            }
        }
        let sign = if best < 0.0 { -1.0 } else { 1.0 };
        if sign < 0.0 {
            m.column_mut(c).neg_mut();
        }
        signs.push(sign);
    }
    signs
}

#[derive(Debug, Clone)]
pub struct Extraction {
    /// All eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// `p x k`, column `c` is `eigenvector_c * sqrt(eigenvalue_c)`.
    pub loadings: DMatrix<f64>,
    pub residual: f64,
}

impl Extraction {
    pub fn components(&self) -> usize {
        self.loadings.ncols()
    }
}

pub fn principal_components(corr: &DMatrix<f64>, k: ComponentCount) -> Result<Extraction, FactorError> {
    let eig = symmetric_eigen(corr)?;
    let p = corr.nrows();
    let k = match k {
        ComponentCount::Fixed(0) => return Err(FactorError::NoComponents),
        ComponentCount::Fixed(k) if k > p => {
            return Err(FactorError::TooManyComponents {
                requested: k,
                available: p,
            })
        }
        ComponentCount::Fixed(k) => k,
        ComponentCount::Kaiser => eig.values.iter().filter(|&&l| l > 1.0).count(),
    };
    let mut loadings = DMatrix::from_fn(p, k, |r, c| eig.vectors[(r, c)] * eig.values[c].max(0.0).sqrt());
    orient_columns(&mut loadings);
    Ok(Extraction {
        eigenvalues: eig.values,
        loadings,
        residual: eig.residual,
    })
}

/// Sum over columns of the variance of squared loadings.
pub fn varimax_criterion(b: &DMatrix<f64>) -> f64 {
    let p = b.nrows() as f64;
    b.column_iter()
        .map(|col| {
            let s2: f64 = col.iter().map(|x| x * x).sum();
            let s4: f64 = col.iter().map(|x| x.powi(4)).sum();
            s4 / p - (s2 / p).powi(2)
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct Rotation {
    pub loadings: DMatrix<f64>,
    /// Orthogonal `k x k`; `loadings = unrotated * rotation`.
    pub rotation: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Criterion on the (normalized) loadings before the first sweep and
    /// after every sweep.
    pub criterion_history: Vec<f64>,
}

/// Rotate columns `j` and `l` of `m` by `angle`.
fn rotate_pair(m: &mut DMatrix<f64>, j: usize, l: usize, cos: f64, sin: f64) {
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, j)], m[(r, l)]);
        m[(r, j)] = x * cos + y * sin;
        m[(r, l)] = -x * sin + y * cos;
    }
}

/// Kaiser's varimax by successive planar rotations of column pairs.
///
/// Rows with zero communality are reported by index through
/// [`FactorError::ZeroCommunalityRow`] when `kaiser_normalize` is set.
pub fn varimax_rotate(
    loadings: &DMatrix<f64>,
    kaiser_normalize: bool,
    tolerance: f64,
    max_iterations: usize,
) -> Result<Rotation, FactorError> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(FactorError::Tolerance(tolerance));
    }
    let (p, k) = loadings.shape();
    if k == 0 {
        return Err(FactorError::NoComponents);
    }
    if k > p {
        return Err(FactorError::TooManyComponents {
            requested: k,
            available: p,
        });
    }
    if k == 1 {
        return Ok(Rotation {
            loadings: loadings.clone(),
            rotation: DMatrix::identity(1, 1),
            iterations: 0,
            converged: true,
            criterion_history: vec![varimax_criterion(loadings)],
        });
    }

    let h: Vec<f64> = loadings.row_iter().map(|r| r.norm()).collect();
    let mut b = loadings.clone();
    if kaiser_normalize {
        for (i, &hi) in h.iter().enumerate() {
            if hi == 0.0 {
                return Err(FactorError::ZeroCommunalityRow(i));
            }
            b.row_mut(i).scale_mut(1.0 / hi);
        }
    }

    let mut rotation = DMatrix::<f64>::identity(k, k);
    let mut history = vec![varimax_criterion(&b)];
    let mut iterations = 0;
    let mut converged = false;
    let pf = p as f64;

    while iterations < max_iterations {
        iterations += 1;
        for j in 0..k {
            for l in (j + 1)..k {
                let (mut sa, mut sb, mut sc, mut sd) = (0.0, 0.0, 0.0, 0.0);
                for r in 0..p {
                    let (x, y) = (b[(r, j)], b[(r, l)]);
                    let u = x * x - y * y;
                    let v = 2.0 * x * y;
                    sa += u;
                    sb += v;
                    sc += u * u - v * v;
                    sd += 2.0 * u * v;
                }
                let num = sd - 2.0 * sa * sb / pf;
                let den = sc - (sa * sa - sb * sb) / pf;
                if num == 0.0 && den >= 0.0 {
                    continue;
                }
                let phi = 0.25 * num.atan2(den);
                let (sin, cos) = phi.sin_cos();
                rotate_pair(&mut b, j, l, cos, sin);
                rotate_pair(&mut rotation, j, l, cos, sin);
            }
        }
        let current = varimax_criterion(&b);
        let previous = *history.last().expect("seeded");
        history.push(current);
        let change = (current - previous).abs();
        if change == 0.0 || change < tolerance * previous.abs() {
            converged = true;
            break;
        }
    }

    if kaiser_normalize {
        for (i, &hi) in h.iter().enumerate() {
            b.row_mut(i).scale_mut(hi);
        }
    }
    let signs = orient_columns(&mut b);
    for (c, s) in signs.into_iter().enumerate() {
        if s < 0.0 {
            rotation.column_mut(c).neg_mut();
        }
    }

    Ok(Rotation {
        loadings: b,
        rotation,
        iterations,
        converged,
        criterion_history: history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorOptions {
    pub components: ComponentCount,
    pub kaiser_normalize: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self {
            components: ComponentCount::Kaiser,
            kaiser_normalize: true,
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FactorModel {
    pub variables: Vec<String>,
    pub correlation: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub loadings_unrotated: DMatrix<f64>,
    pub loadings_rotated: DMatrix<f64>,
    pub rotation: DMatrix<f64>,
    pub variance_explained_total: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

impl FactorModel {
    pub fn fit(env: &Environment, options: &FactorOptions) -> Result<Self, FactorError> {
        let corr = correlation_matrix(env)?;
        Self::from_correlation(env.members.clone(), corr, options)
    }

    pub fn from_correlation(
        variables: Vec<String>,
        correlation: DMatrix<f64>,
        options: &FactorOptions,
    ) -> Result<Self, FactorError> {
        let extraction = principal_components(&correlation, options.components)?;
        let k = extraction.components();
        if k == 0 {
            return Err(FactorError::NoComponents);
        }
        let rotated = varimax_rotate(
            &extraction.loadings,
            options.kaiser_normalize,
            options.tolerance,
            options.max_iterations,
        )
        .map_err(|e| match e {
            FactorError::ZeroCommunalityRow(i) => FactorError::ZeroCommunality(variables[i].clone()),
            other => other,
        })?;
        let p = correlation.nrows() as f64;
        let variance_explained_total = extraction.eigenvalues[..k].iter().sum::<f64>() / p;
        Ok(Self {
            variables,
            correlation,
            eigenvalues: extraction.eigenvalues,
            loadings_unrotated: extraction.loadings,
            loadings_rotated: rotated.loadings,
            rotation: rotated.rotation,
            variance_explained_total,
            iterations_used: rotated.iterations,
            converged: rotated.converged,
        })
    }

    pub fn components(&self) -> usize {
        self.loadings_rotated.ncols()
    }

    pub fn loadings_table(&self, display_cutoff: f64) -> LoadingsTable {
        loadings_table(self, display_cutoff)
    }
}

/// Rotated loadings with small entries blanked for display.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingsTable {
    pub variables: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
    pub cutoff: f64,
}

pub fn loadings_table(model: &FactorModel, display_cutoff: f64) -> LoadingsTable {
    let l = &model.loadings_rotated;
    let cells = (0..l.nrows())
        .map(|r| {
            (0..l.ncols())
                .map(|c| {
                    let x = l[(r, c)];
                    (x.abs() >= display_cutoff).then_some(x)
                })
                .collect()
        })
        .collect();
    LoadingsTable {
        variables: model.variables.clone(),
        cells,
        cutoff: display_cutoff,
    }
}

fn fmt_loading(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

impl LoadingsTable {
    pub fn components(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    pub fn cell_text(&self, row: usize, col: usize) -> String {
        self.cells[row][col].map(fmt_loading).unwrap_or_default()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
        let mut header = vec!["journal".to_string()];
        header.extend((1..=self.components()).map(|c| c.to_string()));
        w.write_record(&header).expect("in-memory write");
        for (r, name) in self.variables.iter().enumerate() {
            let mut rec = vec![name.clone()];
            rec.extend((0..self.components()).map(|c| self.cell_text(r, c)));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    /// Fixed-width plain text, one row per variable.
    pub fn to_text(&self) -> String {
        let width = self.variables.iter().map(|v| v.chars().count()).max().unwrap_or(0).max(7);
        let mut out = String::new();
        let _ = write!(out, "{:<width$}", "journal");
        for c in 1..=self.components() {
            let _ = write!(out, " {c:>8}");
        }
        out.push('\n');
        for (r, name) in self.variables.iter().enumerate() {
            let _ = write!(out, "{name:<width$}");
            for c in 0..self.components() {
                let _ = write!(out, " {:>8}", self.cell_text(r, c));
            }
            // trailing blanks from suppressed cells
            let trimmed = out.trim_end_matches(' ').len();
            out.truncate(trimmed);
            out.push('\n');
        }
        out
    }
}
