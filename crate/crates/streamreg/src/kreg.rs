//! Sliding-window Nadaraya-Watson regression with a Gaussian kernel.
//!
//! `h_inv` is the inverse of the bandwidth matrix H, which has the shape of
//! the input covariance. Offsets are scaled by the Cholesky factor R of H⁻¹,
//! so that uᵀu = ΔᵀH⁻¹Δ and the kernel is normalized by |H|^{1/2}.

use std::f64::consts::PI;

use crate::error::LearnerError;
use crate::lifecycle::Model;
use crate::numkit::{cholesky_lower, invert_psd, log_det_from_cholesky, Matrix};
use crate::stats::z_value;
use crate::types::{DataPoint, ObservedPair, PredictionTriple};
use crate::window::SlidingWindow;

/// Kernel mass below which a query is considered outside the data.
pub const ZERO_DENSITY: f64 = 1e-300;
/// Bandwidth multiplier used before the first tune.
pub const COLD_START_ALPHA: f64 = 0.25;

pub fn gaussian_kernel(u: &[f64]) -> f64 {
    let d = u.len() as f64;
    let q: f64 = u.iter().map(|v| v * v).sum();
    (2.0 * PI).powf(-d / 2.0) * (-0.5 * q).exp()
}

/// Population covariance of `rows` (one point per row). A diagonal entry below
/// 1e-12 marks a constant feature and is replaced by 1.
pub fn var_cov(rows: &[&[f64]]) -> Matrix {
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.len());
    let mut mean = vec![0.0; d];
    for r in rows {
        mean.iter_mut().zip(*r).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
    let mut cov = Matrix::zeros(d, d);
    for r in rows {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(v, m)| v - m).collect();
        cov.add_outer(1.0, &c, &c);
    }
    cov.scale_in_place(1.0 / n.max(1) as f64);
    for i in 0..d {
        if cov[(i, i)] < 1e-12 {
            for j in 0..d {
                cov[(i, j)] = 0.0;
                cov[(j, i)] = 0.0;
            }
            cov[(i, i)] = 1.0;
        }
    }
    cov
}

/// Bandwidth in the form the kernel evaluations need.
#[derive(Debug, Clone)]
pub struct Bandwidth {
    h_inv: Matrix,
    /// Rᵀ with R the lower Cholesky factor of H⁻¹, stored row-major.
    scale: Matrix,
    /// |H|^{1/2}.
    norm: f64,
}

impl Bandwidth {
    pub fn from_inverse(h_inv: Matrix) -> Result<Self, LearnerError> {
        let r = cholesky_lower(&h_inv)?;
        let norm = (-0.5 * log_det_from_cholesky(&r)).exp();
        Ok(Self { h_inv, scale: r.transpose(), norm })
    }

    /// H = alpha·COV.
    pub fn from_cov(alpha: f64, cov: &Matrix) -> Result<Self, LearnerError> {
        Self::from_inverse(invert_psd(&cov.scaled(alpha))?)
    }

    pub fn identity(d: usize) -> Self {
        Self::from_inverse(Matrix::identity(d)).expect("identity is positive definite")
    }

    pub fn h_inv(&self) -> &Matrix {
        &self.h_inv
    }

    /// |H|^{1/2}, the kernel normalizer.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn offset(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let delta: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.scale.mul_vec(&delta)
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        gaussian_kernel(&self.offset(a, b))
    }
}

/// Running mean of the last `horizon` squared prediction errors.
#[derive(Debug, Clone)]
pub struct AseTracker {
    errors: SlidingWindow<f64>,
}

impl AseTracker {
    pub fn new(horizon: usize) -> Self {
        Self { errors: SlidingWindow::new(horizon) }
    }

    pub fn push(&mut self, sq_err: f64) {
        self.errors.push(sq_err);
    }

    /// Restarts the horizon from a single seed value.
    pub fn reset_to(&mut self, value: f64) {
        self.errors.clear();
        self.errors.push(value);
    }

    pub fn value(&self) -> f64 {
        if self.errors.is_empty() {
            0.0
        } else {
            self.errors.iter().sum::<f64>() / self.errors.len() as f64
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    pair: ObservedPair,
    density: f64,
    contribution: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self { min: 0.05, max: 2.0, step: 0.01 }
    }
}

impl AlphaGrid {
    pub fn single(alpha: f64) -> Self {
        Self { min: alpha, max: alpha, step: 1.0 }
    }

    pub fn values(&self) -> Vec<f64> {
        let steps = ((self.max - self.min) / self.step + 1e-9).floor().max(0.0) as usize;
        (0..=steps).map(|i| self.min + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone)]
pub struct KregState {
    window: SlidingWindow<Entry>,
    bandwidth: Bandwidth,
    ase: AseTracker,
    high_conf: bool,
    grid: AlphaGrid,
    tuned: bool,
}

impl KregState {
    pub fn new(d: usize, capacity: usize, high_conf: bool) -> Self {
        Self {
            window: SlidingWindow::new(capacity),
            bandwidth: Bandwidth::identity(d),
            ase: AseTracker::new(capacity),
            high_conf,
            grid: AlphaGrid::default(),
            tuned: false,
        }
    }

    pub fn with_grid(mut self, grid: AlphaGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn bandwidth(&self) -> &Bandwidth {
        &self.bandwidth
    }

    pub fn ase(&self) -> f64 {
        self.ase.value()
    }

    pub fn set_ase(&mut self, value: f64) {
        self.ase.reset_to(value);
    }

    pub fn z(&self) -> f64 {
        z_value(if self.high_conf { 0.999 } else { 0.95 })
    }

    pub fn pairs(&self) -> Vec<ObservedPair> {
        self.window.iter().map(|e| e.pair.clone()).collect()
    }

    pub fn densities(&self) -> Vec<f64> {
        self.window.iter().map(|e| e.density).collect()
    }

    pub fn contributions(&self) -> Vec<f64> {
        self.window.iter().map(|e| e.contribution).collect()
    }

    pub fn set_bandwidth(&mut self, bandwidth: Bandwidth) {
        self.bandwidth = bandwidth;
        self.rebuild_caches();
    }

    /// Recomputes every cached density and contribution with a double loop.
    pub fn rebuild_caches(&mut self) {
        let (dens, contrib) = recompute_caches(&self.pairs(), &self.bandwidth);
        for ((e, d), c) in self.window.iter_mut().zip(dens).zip(contrib) {
            e.density = d;
            e.contribution = c;
        }
    }

    pub fn nw_predict(&self, x: &DataPoint) -> PredictionTriple {
        let n = self.window.len();
        let (mut num, mut den) = (0.0, 0.0);
        for e in self.window.iter() {
            let k = self.bandwidth.kernel(e.pair.x(), x.as_slice());
            num += k * e.pair.target;
            den += k;
        }
        if !(den >= ZERO_DENSITY) {
            let mean = self.window.iter().map(|e| e.pair.target).sum::<f64>() / n.max(1) as f64;
            return PredictionTriple::uninformed(mean);
        }
        let point = num / den;
        let d = x.dim() as f64;
        let f_hat = den / (n as f64 * self.bandwidth.norm());
        let var = (4.0 * PI).powf(-d / 2.0) * self.ase.value() / f_hat;
        PredictionTriple::symmetric(point, self.z() * var.max(0.0).sqrt())
    }

    pub fn nw_update(&mut self, new: &ObservedPair, observed_minus_predicted: f64) {
        if self.window.is_full() {
            let dropped = self.window.pop_oldest().expect("full window has an oldest entry");
            for e in self.window.iter_mut() {
                let k = self.bandwidth.kernel(dropped.pair.x(), e.pair.x());
                e.density -= k;
                e.contribution -= k * dropped.pair.target;
            }
        }
        let mut density = 0.0;
        let mut contribution = 0.0;
        for e in self.window.iter_mut() {
            let k = self.bandwidth.kernel(new.x(), e.pair.x());
            e.density += k;
            e.contribution += k * new.target;
            density += k;
            contribution += k * e.pair.target;
        }
        let k0 = gaussian_kernel(&vec![0.0; new.point.dim()]);
        density += k0;
        contribution += k0 * new.target;
        self.window.push(Entry { pair: new.clone(), density, contribution });
        self.ase.push(observed_minus_predicted * observed_minus_predicted);
    }

    /// Hold-out-one search over H = α·COV; returns the winning α and its CV error.
    pub fn kreg_tune(&mut self) -> Result<(f64, f64), LearnerError> {
        let pairs = self.pairs();
        if pairs.len() < 2 {
            return Err(LearnerError::InsufficientData { needed: 2, have: pairs.len() });
        }
        let rows: Vec<&[f64]> = pairs.iter().map(|p| p.x()).collect();
        let cov = var_cov(&rows);
        let mut best: Option<(f64, f64, Bandwidth)> = None;
        for alpha in self.grid.values() {
            let Ok(bw) = Bandwidth::from_cov(alpha, &cov) else { continue };
            let cv = hold_out_one_cv(&pairs, &bw);
            if best.as_ref().map_or(true, |(_, b, _)| cv < *b) {
                best = Some((alpha, cv, bw));
            }
        }
        let (alpha, cv, bw) = best.ok_or(LearnerError::InsufficientData { needed: 2, have: pairs.len() })?;
        self.set_bandwidth(bw);
        self.ase.reset_to(cv);
        self.tuned = true;
        Ok((alpha, cv))
    }

    fn cold_start_refresh(&mut self) {
        let n = self.window.len();
        if self.tuned || n < 2 || !n.is_power_of_two() {
            return;
        }
        let pairs = self.pairs();
        let rows: Vec<&[f64]> = pairs.iter().map(|p| p.x()).collect();
        if let Ok(bw) = Bandwidth::from_cov(COLD_START_ALPHA, &var_cov(&rows)) {
            self.set_bandwidth(bw);
        }
    }
}

/// From-scratch densities and contributions for every stored point.
pub fn recompute_caches(pairs: &[ObservedPair], bw: &Bandwidth) -> (Vec<f64>, Vec<f64>) {
    let mut dens = vec![0.0; pairs.len()];
    let mut contrib = vec![0.0; pairs.len()];
    for (i, p) in pairs.iter().enumerate() {
        for q in pairs {
            let k = bw.kernel(p.x(), q.x());
            dens[i] += k;
            contrib[i] += k * q.target;
        }
    }
    (dens, contrib)
}

/// Mean squared error of the predictions for each stored point made without it.
pub fn hold_out_one_cv(pairs: &[ObservedPair], bw: &Bandwidth) -> f64 {
    let n = pairs.len();
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let k = bw.kernel(pairs[i].x(), pairs[j].x());
            num[i] += k * pairs[j].target;
            den[i] += k;
            num[j] += k * pairs[i].target;
            den[j] += k;
        }
    }
    let total: f64 = pairs.iter().map(|p| p.target).sum();
    let mut sse = 0.0;
    for i in 0..n {
        let pred = if den[i] >= ZERO_DENSITY {
            num[i] / den[i]
        } else {
            (total - pairs[i].target) / (n - 1) as f64
        };
        sse += (pred - pairs[i].target).powi(2);
    }
    sse / n as f64
}

impl Model for KregState {
    fn predict(&self, x: &DataPoint) -> Result<PredictionTriple, LearnerError> {
        Ok(self.nw_predict(x))
    }

    fn update(&mut self, pair: &ObservedPair, last: &PredictionTriple) -> Result<(), LearnerError> {
        self.nw_update(pair, pair.target - last.point);
        self.cold_start_refresh();
        Ok(())
    }

    fn tune(&mut self) -> Result<(), LearnerError> {
        self.kreg_tune().map(|_| ())
    }

    fn len(&self) -> usize {
        self.window.len()
    }

    fn capacity(&self) -> usize {
        self.window.capacity()
    }
}
