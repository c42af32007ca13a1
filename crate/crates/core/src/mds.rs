//! Metric multidimensional scaling by stress majorization (SMACOF).
//!
//! Raw stress is `Σ_{i<j} (d_ij(X) − δ_ij)²` with unit weights and Euclidean
//! `d`. Each iteration applies the Guttman transform `X⁺ = n⁻¹ B(X) X`, where
//! `b_ij = −δ_ij / d_ij(X)` off the diagonal (zero when `d_ij = 0`) and the
//! diagonal makes every row sum to zero. Raw stress never increases under this
//! update.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{row_distance, DissimilarityMatrix, Embedding};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::par;
use crate::rng::Seed;

fn check_shape(coords: &DMatrix<f64>, delta: &DissimilarityMatrix) -> Result<()> {
    if coords.nrows() != delta.len() {
        return Err(Error::DimensionMismatch {
            expected: delta.len(),
            got: coords.nrows(),
        });
    }
    if coords.ncols() == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    Ok(())
}

fn raw_stress_unchecked(coords: &DMatrix<f64>, delta: &DMatrix<f64>) -> f64 {
    let n = coords.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..j {
            let r = row_distance(coords, i, j) - delta[(i, j)];
            s += r * r;
        }
    }
    s
}

pub fn raw_stress(coords: &DMatrix<f64>, delta: &DissimilarityMatrix) -> Result<f64> {
    check_shape(coords, delta)?;
    Ok(raw_stress_unchecked(coords, delta.values()))
}

fn sum_sq_upper(delta: &DMatrix<f64>) -> f64 {
    let n = delta.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..j {
            s += delta[(i, j)] * delta[(i, j)];
        }
    }
    s
}

/// Kruskal's normalized stress: `sqrt(raw_stress / Σ_{i<j} δ_ij²)`.
pub fn stress1(coords: &DMatrix<f64>, delta: &DissimilarityMatrix) -> Result<f64> {
    check_shape(coords, delta)?;
    let denom = sum_sq_upper(delta.values());
    if denom == 0.0 {
        return Err(Error::DegenerateDissimilarities);
    }
    Ok((raw_stress_unchecked(coords, delta.values()) / denom).sqrt())
}

/// Torgerson scaling: top-`dims` eigenpairs of `−½ J δ² J`.
///
/// Eigenvectors are signed so that their first nonzero component is positive.
/// Columns beyond the number of positive eigenvalues are zero.
pub fn classical_init(delta: &DissimilarityMatrix, dims: usize) -> Result<DMatrix<f64>> {
    if dims == 0 {
        return Err(Error::InvalidConfig("dims must be >= 1".into()));
    }
    let n = delta.len();
    let sq = delta.values().map(|v| v * v);
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand)
    });
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("non-finite double-centred matrix".into()));
    }
    let eig = SymmetricEigen::try_new(b, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenFailure("symmetric eigen-solver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    // Descending eigenvalue; index breaks ties so the order is reproducible.
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cutoff = scale * 1e-12;
    let mut coords = DMatrix::zeros(n, dims);
    for (c, &k) in order.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= cutoff {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let sign = v
            .iter()
            .find(|x| x.abs() > 1e-12)
            .map(|x| x.signum())
            .unwrap_or(1.0);
        let root = lambda.sqrt();
        for i in 0..n {
            coords[(i, c)] = sign * v[i] * root;
        }
    }
    Ok(coords)
}

fn guttman_unchecked(coords: &DMatrix<f64>, delta: &DMatrix<f64>) -> DMatrix<f64> {
    let n = coords.nrows();
    let d = coords.ncols();
    let mut b = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let dist = row_distance(coords, i, j);
            if dist > 0.0 {
                let v = -delta[(i, j)] / dist;
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
        }
    }
    for i in 0..n {
        let off: f64 = b.row(i).sum();
        b[(i, i)] = -off;
    }
    let mut out = b * coords;
    out /= n as f64;
    debug_assert_eq!(out.ncols(), d);
    out
}

/// One Guttman transform.
pub fn guttman_step(coords: &DMatrix<f64>, delta: &DissimilarityMatrix) -> Result<DMatrix<f64>> {
    check_shape(coords, delta)?;
    Ok(guttman_unchecked(coords, delta.values()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitStrategy {
    /// Every start is uniform in `[−1, 1]^d`.
    Random,
    /// A single deterministic Torgerson start; extra restarts would repeat it.
    Classical,
    /// Torgerson first, then `restarts − 1` random starts.
    #[default]
    Both,
}

impl FromStr for InitStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(InitStrategy::Random),
            "classical" => Ok(InitStrategy::Classical),
            "both" => Ok(InitStrategy::Both),
            other => Err(Error::InvalidConfig(format!(
                "unknown init `{other}` (expected random, classical or both)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmacofConfig {
    pub dims: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub init: InitStrategy,
    pub seed: Seed,
}

impl Default for SmacofConfig {
    fn default() -> Self {
        SmacofConfig {
            dims: 2,
            restarts: 4,
            max_iter: 300,
            rel_tol: 1e-9,
            init: InitStrategy::Both,
            seed: Seed(0),
        }
    }
}

impl SmacofConfig {
    pub fn with_dims(dims: usize) -> Self {
        SmacofConfig {
            dims,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims < 1 {
            return Err(Error::InvalidConfig("dims must be >= 1".into()));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidConfig("restarts must be >= 1".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidConfig("rel_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Raw stress after every iteration of the winning restart, starting with the
/// initial configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub restart: usize,
    pub raw_stress: Vec<f64>,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.raw_stress.len().saturating_sub(1)
    }

    /// True when every step is non-increasing up to `rel_tol` of the previous value.
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.raw_stress
            .windows(2)
            .all(|w| w[1] <= w[0] + rel_tol * w[0])
    }
}

struct RunResult {
    coords: DMatrix<f64>,
    trace: Vec<f64>,
}

/// Raw stress below this fraction of `Σ δ²` (stress-1 ≈ 1e-13) is round-off;
/// iterating further only trades rounding noise back and forth.
const EXACT_FIT_FLOOR: f64 = 1e-26;

fn run_from(mut x: DMatrix<f64>, delta: &DMatrix<f64>, cfg: &SmacofConfig) -> RunResult {
    let floor = EXACT_FIT_FLOOR * sum_sq_upper(delta);
    let mut prev = raw_stress_unchecked(&x, delta);
    let mut trace = Vec::with_capacity(cfg.max_iter + 1);
    trace.push(prev);
    for _ in 0..cfg.max_iter {
        if prev <= floor {
            break;
        }
        x = guttman_unchecked(&x, delta);
        let cur = raw_stress_unchecked(&x, delta);
        trace.push(cur);
        let done = prev - cur < cfg.rel_tol * prev;
        prev = cur;
        if done {
            break;
        }
    }
    RunResult { coords: x, trace }
}

fn center_columns(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
}

/// Runs SMACOF from every configured start and keeps the lowest raw stress
/// (ties go to the earliest restart). The result is centred on the origin.
pub fn smacof(
    delta: &DissimilarityMatrix,
    cfg: &SmacofConfig,
) -> Result<(Embedding, IterationTrace)> {
    cfg.validate()?;
    let n = delta.len();
    let unit = delta.mean_off_diagonal();
    if unit == 0.0 {
        return Err(Error::DegenerateDissimilarities);
    }
    // Work on δ scaled to unit mean so random starts in [−1, 1]^d are on scale.
    let norm = delta.values() / unit;
    let norm_delta = DissimilarityMatrix::new(delta.ids().to_vec(), norm.clone())?;

    let starts = match cfg.init {
        InitStrategy::Classical => 1,
        _ => cfg.restarts,
    };
    let classical = match cfg.init {
        InitStrategy::Random => None,
        _ => Some(classical_init(&norm_delta, cfg.dims)?),
    };

    let runs = par::map((0..starts).collect(), |r| {
        let init = match (&classical, r) {
            (Some(c), 0) => c.clone(),
            _ => {
                let mut rng = cfg.seed.derive_index("smacof/restart", r).rng();
                DMatrix::from_fn(n, cfg.dims, |_, _| rng.random_range(-1.0..=1.0))
            }
        };
        run_from(init, &norm, cfg)
    });

    let (best_idx, best) = runs
        .into_iter()
        .enumerate()
        .reduce(|a, b| {
            let sa = *a.1.trace.last().unwrap();
            let sb = *b.1.trace.last().unwrap();
            if sb < sa {
                b
            } else {
                a
            }
        })
        .expect("at least one start");

    let mut coords = best.coords * unit;
    center_columns(&mut coords);
    let s1 = stress1(&coords, delta)?;
    let unit_sq = unit * unit;
    let trace = IterationTrace {
        restart: best_idx,
        raw_stress: best.trace.iter().map(|s| s * unit_sq).collect(),
    };
    let embedding = Embedding::new(delta.ids().to_vec(), coords, s1)?;
    Ok((embedding, trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressPoint {
    pub dims: usize,
    pub stress1: f64,
    pub raw_stress: f64,
    /// `dims >= n − 1`: an exact fit is always possible, stress is uninformative.
    pub overparameterized: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StressCurve {
    pub points: Vec<StressPoint>,
}

impl StressCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dims,stress1,raw_stress\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{}",
                p.dims,
                fmt_f64(p.stress1),
                fmt_f64(p.raw_stress)
            );
        }
        out
    }

    pub fn warnings(&self) -> Vec<String> {
        self.points
            .iter()
            .filter(|p| p.overparameterized)
            .map(|p| format!("dims {} >= n-1: stress is trivially zero", p.dims))
            .collect()
    }
}

/// Runs [`smacof`] at each dimensionality and returns the stress curve along
/// with the embeddings. `config.dims` is ignored.
pub fn dimension_scan(
    delta: &DissimilarityMatrix,
    dims_list: &[usize],
    config: &SmacofConfig,
) -> Result<(StressCurve, Vec<Embedding>)> {
    if dims_list.is_empty() {
        return Err(Error::InvalidConfig("dims list is empty".into()));
    }
    if dims_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "dims list must be strictly increasing".into(),
        ));
    }
    let n = delta.len();
    let mut curve = StressCurve::default();
    let mut embeddings = Vec::with_capacity(dims_list.len());
    for &dims in dims_list {
        let cfg = SmacofConfig {
            dims,
            seed: config.seed.derive_index("dims", dims),
            ..config.clone()
        };
        let (emb, _) = smacof(delta, &cfg)?;
        curve.points.push(StressPoint {
            dims,
            stress1: emb.stress1(),
            raw_stress: raw_stress(emb.coords(), delta)?,
            overparameterized: dims + 1 >= n,
        });
        embeddings.push(emb);
    }
    Ok((curve, embeddings))
}

/// Aligns `b` onto `a` by the orthogonal transform (reflections allowed) plus
/// translation, and optionally uniform scale, that minimizes
/// `Σ ‖a_i − T(b_i)‖²`. Returns the aligned copy of `b` in `a`'s id order and
/// that minimum.
pub fn procrustes_align(
    a: &Embedding,
    b: &Embedding,
    allow_scaling: bool,
) -> Result<(Embedding, f64)> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            got: b.dims(),
        });
    }
    if a.len() != b.len() {
        return Err(Error::IdMismatch(format!(
            "{} ids vs {} ids",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    let d = a.dims();
    let mut bx = DMatrix::zeros(n, d);
    for (i, id) in a.ids().iter().enumerate() {
        let j = b
            .index_of(id.as_str())
            .ok_or_else(|| Error::IdMismatch(format!("`{id}` missing from second embedding")))?;
        bx.set_row(i, &b.coords().row(j));
    }

    let centroid = |m: &DMatrix<f64>| m.row_mean();
    let ca = centroid(a.coords());
    let cb = centroid(&bx);
    let a0 = DMatrix::from_fn(n, d, |i, c| a.coords()[(i, c)] - ca[c]);
    let b0 = DMatrix::from_fn(n, d, |i, c| bx[(i, c)] - cb[c]);

    let m = b0.transpose() * &a0;
    let svd = SVD::new(m, true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let rot = u * vt;
    let scale = if allow_scaling {
        let norm = b0.norm_squared();
        if norm > 0.0 {
            svd.singular_values.sum() / norm
        } else {
            1.0
        }
    } else {
        1.0
    };
    let mut aligned = (&b0 * rot) * scale;
    for i in 0..n {
        for c in 0..d {
            aligned[(i, c)] += ca[c];
        }
    }
    let disparity = (a.coords() - &aligned).norm_squared();
    let out = Embedding::new(a.ids().to_vec(), aligned, b.stress1())?;
    Ok((out, disparity))
}
