//! Independent checks for the analytic code paths.
//!
//! Nothing here is used by the production paths. The least-squares oracle
//! builds the full model matrix and inverts the normal equations through an
//! eigendecomposition pseudo-inverse, the control-sum oracle enumerates
//! per-unit sequences, and the generators produce seeded random designs for
//! property tests.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bounds::MinSums;
use crate::design::{Design, CONTROL};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::ModelKind;
use crate::par::{self, Execution};

/// Column layout of the full model matrix.
struct Layout {
    period: Option<usize>,
    unit: Option<usize>,
    direct: usize,
    carry: Option<usize>,
    cols: usize,
}

fn layout(d: &Design, kind: ModelKind) -> Layout {
    let (p, n, v) = (d.p(), d.n(), d.t() + 1);
    let mut cols = 1;
    let mut take = |k: usize| {
        let at = cols;
        cols += k;
        at
    };
    let period = matches!(kind, ModelKind::Carryover | ModelKind::TwoWay).then(|| take(p));
    let unit = (kind != ModelKind::ZeroWay).then(|| take(n));
    let direct = take(v);
    let carry = (kind == ModelKind::Carryover).then(|| take(v));
    Layout {
        period,
        unit,
        direct,
        carry,
        cols,
    }
}

/// `[1 | P | U | T | F]`, keeping only the blocks `kind` fits. Rows are
/// ordered unit-major.
pub fn full_model_matrix(d: &Design, kind: ModelKind) -> DMatrix<f64> {
    let lay = layout(d, kind);
    let (p, n) = (d.p(), d.n());
    let mut x = DMatrix::zeros(n * p, lay.cols);
    for u in 0..n {
        for k in 0..p {
            let row = u * p + k;
            x[(row, 0)] = 1.0;
            if let Some(c) = lay.period {
                x[(row, c + k)] = 1.0;
            }
            if let Some(c) = lay.unit {
                x[(row, c + u)] = 1.0;
            }
            x[(row, lay.direct + d.get(k, u))] = 1.0;
            if let (Some(c), true) = (lay.carry, k > 0) {
                x[(row, c + d.get(k - 1, u))] = 1.0;
            }
        }
    }
    x
}

/// Moore–Penrose inverse of a symmetric PSD matrix from its eigenvectors.
fn pseudo_inverse_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let tol = 1e-10 * eig.eigenvalues.amax().max(1.0);
    let mut g = DMatrix::zeros(a.nrows(), a.ncols());
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > tol {
            let v = eig.eigenvectors.column(k);
            g += (&v * v.transpose()) / lambda;
        }
    }
    g
}

/// Ordinary least squares for the test-minus-control contrasts.
pub struct ContrastFit {
    x: DMatrix<f64>,
    ginv: DMatrix<f64>,
    l: DMatrix<f64>,
}

impl ContrastFit {
    pub fn new(d: &Design, kind: ModelKind) -> Result<Self> {
        let x = full_model_matrix(d, kind);
        let xtx = x.transpose() * &x;
        let ginv = pseudo_inverse_psd(&xtx);
        let lay = layout(d, kind);
        let t = d.t();
        let mut l = DMatrix::zeros(t, lay.cols);
        for i in 1..=t {
            l[(i - 1, lay.direct + i)] = 1.0;
            l[(i - 1, lay.direct + CONTROL)] = -1.0;
        }
        // Estimable iff each contrast lies in the row space of X.
        let resid = &l - &l * &ginv * &xtx;
        if resid.amax() > 1e-7 {
            return Err(Error::Disconnected);
        }
        Ok(Self { x, ginv, l })
    }

    /// `L (X'X)⁻ L'` in units of `σ²`.
    pub fn covariance(&self) -> Matrix {
        let cov = &self.l * &self.ginv * self.l.transpose();
        Matrix::from_fn(cov.nrows(), cov.ncols(), |i, j| cov[(i, j)])
    }

    /// Estimates of `τᵢ − τ₀` for responses ordered unit-major.
    pub fn estimate(&self, y: &[f64]) -> Vec<f64> {
        let y = DVector::from_column_slice(y);
        let beta = &self.ginv * (self.x.transpose() * y);
        (&self.l * beta).iter().copied().collect()
    }
}

/// Covariance of the test-minus-control contrast estimates.
pub fn ols_covariance_oracle(d: &Design, kind: ModelKind) -> Result<Matrix> {
    Ok(ContrastFit::new(d, kind)?.covariance())
}

/// Every length-`p` sequence over `0..=t` with no immediate repetition,
/// with its control counts over all periods and over the first `p − 1`.
pub struct SequencePool {
    pub t: usize,
    pub p: usize,
    pub sequences: Vec<(Vec<usize>, usize, usize)>,
}

impl SequencePool {
    pub fn new(t: usize, p: usize) -> Self {
        let mut sequences = Vec::new();
        let mut cur = Vec::with_capacity(p);
        fn rec(t: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, usize, usize)>) {
            if cur.len() == p {
                let n0 = cur.iter().filter(|&&x| x == CONTROL).count();
                let nt0 = cur[..p - 1].iter().filter(|&&x| x == CONTROL).count();
                out.push((cur.clone(), n0, nt0));
                return;
            }
            for x in 0..=t {
                if cur.last() != Some(&x) {
                    cur.push(x);
                    rec(t, p, cur, out);
                    cur.pop();
                }
            }
        }
        if p > 0 {
            rec(t, p, &mut cur, &mut sequences);
        }
        Self { t, p, sequences }
    }

    /// Distinct `(n₀, ñ₀)` pairs realized by the pool.
    pub fn control_patterns(&self) -> Vec<(usize, usize)> {
        self.sequences.iter().map(|s| (s.1, s.2)).sorted().dedup().collect()
    }
}

/// Minimum control sums over assignments of per-unit control patterns with
/// `Σ n₀ = r0` and `Σ ñ₀ = r0 (p − 1)/p`, by dynamic programming over units.
pub fn brute_force_min_sums(n: usize, p: usize, r0: usize) -> Result<MinSums> {
    if n > 8 {
        return Err(Error::Unsupported(format!("brute force is limited to n ≤ 8, got {n}")));
    }
    if p < 2 || r0 % p != 0 || r0 > n * p {
        return Err(Error::Infeasible(format!("r0 = {r0} cannot be spread evenly over {p} periods of {n} units")));
    }
    let rt0 = r0 * (p - 1) / p;
    let patterns = SequencePool::new(p - 1, p).control_patterns();
    let objectives: [fn(usize, usize) -> usize; 3] = [|a, _| a * a, |a, b| a * b, |_, b| b * b];
    let mut out = [0u64; 3];
    for (slot, obj) in objectives.iter().enumerate() {
        // best[a][b] over units processed so far
        let mut best = vec![vec![None::<usize>; rt0 + 1]; r0 + 1];
        best[0][0] = Some(0);
        for _ in 0..n {
            let mut next = vec![vec![None::<usize>; rt0 + 1]; r0 + 1];
            for a in 0..=r0 {
                for b in 0..=rt0 {
                    let Some(v) = best[a][b] else { continue };
                    for &(x, y) in &patterns {
                        if a + x <= r0 && b + y <= rt0 {
                            let cand = v + obj(x, y);
                            let cell = &mut next[a + x][b + y];
                            if cell.is_none_or(|c| cand < c) {
                                *cell = Some(cand);
                            }
                        }
                    }
                }
            }
            best = next;
        }
        out[slot] = best[r0][rt0]
            .ok_or_else(|| Error::Infeasible(format!("no unit patterns reach r0 = {r0} on n = {n}, p = {p}")))?
            as u64;
    }
    Ok(MinSums {
        xi1: out[0],
        xi2: out[1],
        xi3: out[2],
    })
}

fn permutation_average(m: &Matrix, perms: impl Iterator<Item = Vec<usize>>) -> Matrix {
    let k = m.rows();
    let mut acc = Matrix::zeros(k, k);
    let mut count = 0.0;
    for s in perms {
        for i in 0..k {
            for j in 0..k {
                acc[(i, j)] += m[(s[i], s[j])];
            }
        }
        count += 1.0;
    }
    acc.scale(1.0 / count)
}

/// Average of `S' M S` over all permutation matrices `S`.
pub fn symmetrize(m: &Matrix) -> Result<Matrix> {
    let k = m.rows();
    if !m.is_square() || k == 0 || k > 5 {
        return Err(Error::Unsupported(format!("symmetrization needs a square matrix of order 1..=5, got {}×{}", m.rows(), m.cols())));
    }
    Ok(permutation_average(m, (0..k).permutations(k)))
}

/// Like [`symmetrize`] but only permutes indices `1..`, keeping index 0 fixed.
pub fn symmetrize_fixing_first(m: &Matrix) -> Result<Matrix> {
    let k = m.rows();
    if !m.is_square() || k == 0 || k > 6 {
        return Err(Error::Unsupported(format!("symmetrization needs a square matrix of order 1..=6, got {}×{}", m.rows(), m.cols())));
    }
    Ok(permutation_average(
        m,
        (1..k).permutations(k - 1).map(|rest| std::iter::once(0).chain(rest).collect()),
    ))
}

/// A uniformly random design with no other structure.
pub fn random_design(t: usize, p: usize, n: usize, seed: u64) -> Result<Design> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..p).map(|_| (0..n).map(|_| rng.random_range(0..=t)).collect()).collect();
    Design::from_rows(t, rows)
}

/// A random design in the evenly-spread-control class with no
/// self-adjacency. `r0` is a random multiple of `p` with at most `np/2`
/// control plots.
pub fn random_lambda_design(t: usize, p: usize, n: usize, seed: u64) -> Result<Design> {
    if t == 0 || p == 0 || n == 0 {
        return Err(Error::Infeasible(format!("need t, p, n ≥ 1 (t = {t}, p = {p}, n = {n})")));
    }
    let max_per_period = (n / 2).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let per_period = rng.random_range(1..=max_per_period);
        if let Some(d) = try_lambda(t, p, n, per_period, &mut rng) {
            return Ok(d);
        }
    }
    Err(Error::Infeasible(format!("no evenly-spread design found for t = {t}, p = {p}, n = {n}")))
}

fn try_lambda(t: usize, p: usize, n: usize, per_period: usize, rng: &mut ChaCha8Rng) -> Option<Design> {
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(p);
    for k in 0..p {
        let free: Vec<usize> = (0..n).filter(|&u| k == 0 || rows[k - 1][u] != CONTROL).collect();
        if free.len() < per_period {
            return None;
        }
        let chosen = rand::seq::index::sample(rng, free.len(), per_period);
        let mut row = vec![usize::MAX; n];
        for i in chosen {
            row[free[i]] = CONTROL;
        }
        for u in 0..n {
            if row[u] == CONTROL {
                continue;
            }
            let prev = (k > 0).then(|| rows[k - 1][u]);
            let choices: Vec<usize> = (1..=t).filter(|&x| Some(x) != prev).collect();
            if choices.is_empty() {
                return None;
            }
            row[u] = choices[rng.random_range(0..choices.len())];
        }
        rows.push(row);
    }
    Design::from_rows(t, rows).ok()
}

/// Parameters of the response model with direct and carryover effects.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub mu: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub tau: Vec<f64>,
    pub rho: Vec<f64>,
    pub sigma2: f64,
}

impl LinearModel {
    /// Fixed, distinct effect values sized for `d`.
    pub fn for_design(d: &Design, sigma2: f64) -> Self {
        let wave = |len: usize, a: f64| (0..len).map(|i| a * ((i as f64 + 1.0) * 0.7).sin()).collect();
        Self {
            mu: 10.0,
            alpha: wave(d.p(), 1.0),
            beta: wave(d.n(), 2.0),
            tau: wave(d.t() + 1, 1.5),
            rho: wave(d.t() + 1, 0.5),
            sigma2,
        }
    }

    pub fn validate(&self, d: &Design) -> Result<()> {
        let ok = self.alpha.len() == d.p()
            && self.beta.len() == d.n()
            && self.tau.len() == d.t() + 1
            && self.rho.len() == d.t() + 1
            && self.sigma2 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension("model parameters do not match the design".into()))
        }
    }

    /// Responses ordered unit-major.
    pub fn simulate(&self, d: &Design, rng: &mut impl Rng) -> Vec<f64> {
        let noise = Normal::new(0.0, self.sigma2.sqrt()).expect("positive variance");
        let mut y = Vec::with_capacity(d.n() * d.p());
        for u in 0..d.n() {
            for k in 0..d.p() {
                let carry = if k > 0 { self.rho[d.get(k - 1, u)] } else { 0.0 };
                y.push(self.mu + self.alpha[k] + self.beta[u] + self.tau[d.get(k, u)] + carry + noise.sample(rng));
            }
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo {
    /// Empirical `Var(τ̂ᵢ − τ̂₀) / σ²`.
    pub variance: Vec<f64>,
    /// Standard error of each entry of `variance`.
    pub std_error: Vec<f64>,
    /// Empirical means of `τ̂ᵢ − τ̂₀`.
    pub mean: Vec<f64>,
}

/// Simulates `replicates` data sets under the carryover model and fits each
/// by least squares. Replicate `r` draws from its own stream of `seed`.
pub fn monte_carlo(d: &Design, model: &LinearModel, replicates: usize, seed: u64, mode: Execution) -> Result<MonteCarlo> {
    model.validate(d)?;
    if replicates < 2 {
        return Err(Error::Infeasible("need at least two replicates".into()));
    }
    let fit = ContrastFit::new(d, ModelKind::Carryover)?;
    let draws = par::map_range(mode, replicates, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        fit.estimate(&model.simulate(d, &mut rng))
    });
    let t = d.t();
    let rf = replicates as f64;
    let mut mean = vec![0.0; t];
    for e in &draws {
        for i in 0..t {
            mean[i] += e[i] / rf;
        }
    }
    let mut variance = vec![0.0; t];
    for e in &draws {
        for i in 0..t {
            variance[i] += (e[i] - mean[i]).powi(2) / (rf - 1.0);
        }
    }
    let std_error = variance.iter().map(|v| v * (2.0 / (rf - 1.0)).sqrt() / model.sigma2).collect();
    let variance = variance.iter().map(|v| v / model.sigma2).collect();
    Ok(MonteCarlo {
        variance,
        std_error,
        mean,
    })
}
