//! Sliding-window Gaussian process regression with a squared-exponential ARD
//! kernel, incrementally maintained kernel inverse and marginal-likelihood tuning.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::error::LearnerError;
use crate::lifecycle::Model;
use crate::numkit::{cholesky_lower, cholesky_solve, dot, inverse_from_cholesky, log_det_from_cholesky, Matrix};
use crate::parametric::ParamState;
use crate::stats::z_value;
use crate::types::{DataPoint, ObservedPair, PredictionTriple};
use crate::window::SlidingWindow;

pub const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("partition scalar {0} is numerically zero")]
pub struct DegenerateScalar(pub f64);

/// Log-space proxies: σ_w = e^{px_w}, σ_y = e^{px_y}, l_i = e^{px_l[i]}.
#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperParams {
    pub px_w: f64,
    pub px_y: f64,
    pub px_l: Vec<f64>,
}

impl GpHyperParams {
    pub fn new(px_w: f64, px_y: f64, px_l: Vec<f64>) -> Self {
        Self { px_w, px_y, px_l }
    }

    pub fn unit(d: usize) -> Self {
        Self::new(0.0, 0.0, vec![0.0; d])
    }

    /// Scales read off the data: lengthscales from input spreads, signal from
    /// the residual magnitude, noise a tenth of the signal.
    pub fn from_data(xs: &[&[f64]], r: &[f64]) -> Self {
        let d = xs.first().map_or(0, |x| x.len());
        let n = xs.len().max(1) as f64;
        let px_l = (0..d)
            .map(|i| {
                let m = xs.iter().map(|x| x[i]).sum::<f64>() / n;
                let v = xs.iter().map(|x| (x[i] - m).powi(2)).sum::<f64>() / n;
                if v > 1e-24 { 0.5 * v.ln() } else { 0.0 }
            })
            .collect();
        let rms = (r.iter().map(|v| v * v).sum::<f64>() / r.len().max(1) as f64).sqrt();
        let px_w = rms.max(1e-6).ln();
        Self::new(px_w, px_w - 10f64.ln(), px_l)
    }

    pub fn dim(&self) -> usize {
        self.px_l.len()
    }

    pub fn sigma_w(&self) -> f64 {
        self.px_w.exp()
    }

    pub fn sigma_y(&self) -> f64 {
        self.px_y.exp()
    }

    pub fn lengthscale(&self, i: usize) -> f64 {
        self.px_l[i].exp()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.px_w, self.px_y];
        v.extend_from_slice(&self.px_l);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2..].to_vec())
    }

    pub fn prior_variance(&self) -> f64 {
        (2.0 * self.px_w).exp() + (2.0 * self.px_y).exp()
    }
}

/// Noise-free part σ_w²·exp(−½ Σ ((xp_i − xq_i)/l_i)²).
pub fn signal_kernel(xp: &[f64], xq: &[f64], h: &GpHyperParams) -> f64 {
    let q: f64 = xp
        .iter()
        .zip(xq)
        .zip(&h.px_l)
        .map(|((a, b), pl)| {
            let z = (a - b) * (-pl).exp();
            z * z
        })
        .sum();
    (2.0 * h.px_w - 0.5 * q).exp()
}

/// Full covariance; `same_item` marks the Kronecker noise term, which fires on
/// stored-item identity rather than on equal features.
pub fn sq_exp_kernel(xp: &[f64], xq: &[f64], h: &GpHyperParams, same_item: bool) -> f64 {
    let noise = if same_item { (2.0 * h.px_y).exp() } else { 0.0 };
    signal_kernel(xp, xq, h) + noise
}

pub fn kernel_matrix(xs: &[&[f64]], h: &GpHyperParams) -> Matrix {
    let n = xs.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = h.prior_variance();
        for j in 0..i {
            let v = signal_kernel(xs[i], xs[j], h);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// −(n/2)·ln 2π − ½·ln|K| − ½·rᵀK⁻¹r.
pub fn log_likelihood(k: &Matrix, r: &[f64]) -> Result<f64, LearnerError> {
    let l = cholesky_lower(k)?;
    Ok(log_likelihood_from_cholesky(&l, r))
}

fn log_likelihood_from_cholesky(l: &Matrix, r: &[f64]) -> f64 {
    let n = r.len() as f64;
    let a = cholesky_solve(l, r);
    -0.5 * n * (2.0 * PI).ln() - 0.5 * log_det_from_cholesky(l) - 0.5 * dot(r, &a)
}

/// Kernel matrix factorization and the quantities the likelihood needs.
struct Fit {
    k_inv: Matrix,
    alpha: Vec<f64>,
    ll: f64,
}

impl Fit {
    fn new(xs: &[&[f64]], r: &[f64], h: &GpHyperParams) -> Option<Self> {
        let k = kernel_matrix(xs, h);
        let l = cholesky_lower(&k).ok()?;
        let ll = log_likelihood_from_cholesky(&l, r);
        if !ll.is_finite() {
            return None;
        }
        let k_inv = inverse_from_cholesky(&l);
        let alpha = k_inv.mul_vec(r);
        Some(Self { k_inv, alpha, ll })
    }

    fn ll_only(xs: &[&[f64]], r: &[f64], h: &GpHyperParams) -> f64 {
        let k = kernel_matrix(xs, h);
        match cholesky_lower(&k) {
            Ok(l) => {
                let ll = log_likelihood_from_cholesky(&l, r);
                if ll.is_finite() { ll } else { f64::NEG_INFINITY }
            }
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// ½·Σ_pq (α_p α_q − K⁻¹_pq)·∂K_pq for every proxy.
    fn gradient(&self, xs: &[&[f64]], h: &GpHyperParams) -> Vec<f64> {
        let n = xs.len();
        let d = h.dim();
        let mut g = vec![0.0; d + 2];
        let noise2 = (2.0 * h.px_y).exp();
        let inv_l2: Vec<f64> = h.px_l.iter().map(|p| (-2.0 * p).exp()).collect();
        for p in 0..n {
            for q in 0..=p {
                let w = self.alpha[p] * self.alpha[q] - self.k_inv[(p, q)];
                let mult = if p == q { 0.5 } else { 1.0 };
                let s = signal_kernel(xs[p], xs[q], h);
                g[0] += mult * w * 2.0 * s;
                if p == q {
                    g[1] += mult * w * 2.0 * noise2;
                } else {
                    for i in 0..d {
                        let delta = xs[p][i] - xs[q][i];
                        g[2 + i] += mult * w * delta * delta * inv_l2[i] * s;
                    }
                }
            }
        }
        g
    }
}

pub fn log_likelihood_gradient(xs: &[&[f64]], r: &[f64], h: &GpHyperParams) -> Result<Vec<f64>, LearnerError> {
    let k = kernel_matrix(xs, h);
    let l = cholesky_lower(&k)?;
    let k_inv = inverse_from_cholesky(&l);
    let alpha = k_inv.mul_vec(r);
    let fit = Fit { k_inv, alpha, ll: 0.0 };
    Ok(fit.gradient(xs, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MeanKind {
    Zero,
    Average,
    Ols,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneConfig {
    pub max_iterations: usize,
    pub max_decays: usize,
    pub max_step: f64,
    pub decayer: f64,
    pub zero_gradient: f64,
    /// Half-width of the uniform restart box around the data-derived centre.
    pub restart_range: f64,
    /// Lower limit of ln(σ_y/σ_w) explored while tuning.
    pub min_log_noise_ratio: f64,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            max_decays: 10,
            max_step: 1.0,
            decayer: 0.5,
            zero_gradient: 1e-4,
            restart_range: 3.0,
            min_log_noise_ratio: -7.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    pair: ObservedPair,
    mean: f64,
}

#[derive(Debug, Clone)]
pub struct GpState {
    window: SlidingWindow<Entry>,
    hyper: GpHyperParams,
    k: Matrix,
    k_inv: Matrix,
    alpha: Vec<f64>,
    mean_kind: MeanKind,
    target_sum: f64,
    target_count: usize,
    ols: Option<ParamState>,
    confidence: f64,
    tune_cfg: TuneConfig,
    rng: ChaCha8Rng,
    tuned: bool,
    fallbacks: usize,
}

impl GpState {
    pub fn new(d: usize, capacity: usize, mean_kind: MeanKind, confidence: f64, seed: u64) -> Self {
        Self {
            window: SlidingWindow::new(capacity),
            hyper: GpHyperParams::unit(d),
            k: Matrix::zeros(0, 0),
            k_inv: Matrix::zeros(0, 0),
            alpha: Vec::new(),
            mean_kind,
            target_sum: 0.0,
            target_count: 0,
            ols: (mean_kind == MeanKind::Ols).then(|| ParamState::mle(d)),
            confidence,
            tune_cfg: TuneConfig::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            tuned: false,
            fallbacks: 0,
        }
    }

    pub fn with_hyper(mut self, hyper: GpHyperParams) -> Self {
        self.hyper = hyper;
        self.tuned = true;
        self.rebuild();
        self
    }

    pub fn with_tune_config(mut self, cfg: TuneConfig) -> Self {
        self.tune_cfg = cfg;
        self
    }

    pub fn hyper(&self) -> &GpHyperParams {
        &self.hyper
    }

    pub fn kernel_matrix(&self) -> &Matrix {
        &self.k
    }

    pub fn kernel_inverse(&self) -> &Matrix {
        &self.k_inv
    }

    pub fn means(&self) -> Vec<f64> {
        self.window.iter().map(|e| e.mean).collect()
    }

    pub fn pairs(&self) -> Vec<ObservedPair> {
        self.window.iter().map(|e| e.pair.clone()).collect()
    }

    /// Number of dense re-inversions taken instead of an incremental step.
    pub fn fallback_count(&self) -> usize {
        self.fallbacks
    }

    pub fn inverse_health(&self) -> f64 {
        self.k.matmul(&self.k_inv).identity_defect()
    }

    pub fn mean_value(&self, x: &[f64]) -> f64 {
        match self.mean_kind {
            MeanKind::Zero => 0.0,
            MeanKind::Average => {
                if self.target_count == 0 { 0.0 } else { self.target_sum / self.target_count as f64 }
            }
            MeanKind::Ols => self.ols.as_ref().map_or(0.0, |s| s.predict_point(x)),
        }
    }

    fn residuals(&self) -> Vec<f64> {
        self.window.iter().map(|e| e.pair.target - e.mean).collect()
    }

    fn refresh_alpha(&mut self) {
        self.alpha = self.k_inv.mul_vec(&self.residuals());
    }

    /// Dense rebuild of K and K⁻¹, adding diagonal jitter if K is numerically indefinite.
    pub fn rebuild(&mut self) {
        let pairs = self.pairs();
        let xs: Vec<&[f64]> = pairs.iter().map(|p| p.x()).collect();
        self.k = kernel_matrix(&xs, &self.hyper);
        let mut jitter = 0.0;
        let scale = self.hyper.prior_variance();
        self.k_inv = loop {
            let mut kj = self.k.clone();
            for i in 0..kj.rows() {
                kj[(i, i)] += jitter;
            }
            match cholesky_lower(&kj) {
                Ok(l) => break inverse_from_cholesky(&l),
                Err(_) => jitter = if jitter == 0.0 { 1e-10 * scale } else { jitter * 10.0 },
            }
        };
        self.refresh_alpha();
    }

    pub fn kernel_inverse_remove_oldest(&mut self) -> Result<(), DegenerateScalar> {
        let n = self.k_inv.rows();
        self.window.pop_oldest();
        let e = self.k_inv[(0, 0)];
        self.k = self.k.without_row_col(0);
        if e.abs() < DEGENERATE_TOL {
            self.fallbacks += 1;
            self.rebuild();
            return Err(DegenerateScalar(e));
        }
        let f: Vec<f64> = (1..n).map(|i| self.k_inv[(i, 0)]).collect();
        let mut g = self.k_inv.without_row_col(0);
        g.add_outer(-1.0 / e, &f, &f);
        self.k_inv = g;
        Ok(())
    }

    pub fn kernel_inverse_add(&mut self, pair: ObservedPair, mean: f64) -> Result<(), DegenerateScalar> {
        let n = self.k.rows();
        let b: Vec<f64> = self.window.iter().map(|e| signal_kernel(e.pair.x(), pair.x(), &self.hyper)).collect();
        let kxx = self.hyper.prior_variance();
        self.window.push(Entry { pair, mean });
        let mut k = Matrix::zeros(n + 1, n + 1);
        for i in 0..n {
            k.row_mut(i)[..n].copy_from_slice(self.k.row(i));
            k[(i, n)] = b[i];
            k[(n, i)] = b[i];
        }
        k[(n, n)] = kxx;
        self.k = k;
        let c = self.k_inv.mul_vec(&b);
        let schur = kxx - dot(&b, &c);
        if !(schur >= DEGENERATE_TOL) {
            self.fallbacks += 1;
            self.rebuild();
            return Err(DegenerateScalar(schur));
        }
        let g = 1.0 / schur;
        let mut inv = Matrix::zeros(n + 1, n + 1);
        for i in 0..n {
            let row = inv.row_mut(i);
            row[..n].copy_from_slice(self.k_inv.row(i));
            for j in 0..n {
                row[j] += c[i] * c[j] * g;
            }
            row[n] = -c[i] * g;
        }
        for j in 0..n {
            inv[(n, j)] = -c[j] * g;
        }
        inv[(n, n)] = g;
        self.k_inv = inv;
        Ok(())
    }

    /// Cheap residual check on the newest column; falls back to a dense rebuild on drift.
    fn check_newest_column(&mut self) {
        let n = self.k.rows();
        if n == 0 {
            return;
        }
        let col: Vec<f64> = (0..n).map(|i| self.k_inv[(i, n - 1)]).collect();
        let kc = self.k.mul_vec(&col);
        let defect = kc
            .iter()
            .enumerate()
            .map(|(i, v)| (v - if i == n - 1 { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        if defect > 1e-8 {
            self.fallbacks += 1;
            self.rebuild();
        }
    }

    /// Slides the window by one item, maintaining K⁻¹ incrementally.
    pub fn add_observation(&mut self, pair: ObservedPair) {
        let mean = self.mean_value(pair.x());
        let dropped = if self.window.is_full() { self.window.oldest().map(|e| e.pair.clone()) } else { None };
        if dropped.is_some() {
            let _ = self.kernel_inverse_remove_oldest();
        }
        if let Some(ols) = self.ols.as_mut() {
            let step = match &dropped {
                Some(d) => ols.windowed_replace((d.x(), d.target), (pair.x(), pair.target)),
                None => ols.absorb(pair.x(), pair.target),
            };
            if step.is_err() {
                let mut pts = self.window.to_vec();
                pts.push(Entry { pair: pair.clone(), mean });
                let _ = ols.recompute(pts.iter().map(|e| (e.pair.x(), e.pair.target)));
            }
        }
        self.target_sum += pair.target;
        self.target_count += 1;
        if self.kernel_inverse_add(pair, mean).is_ok() {
            self.check_newest_column();
        }
        if self.mean_kind != MeanKind::Zero {
            self.refresh_means();
        }
        self.refresh_alpha();
    }

    pub fn gp_predict(&self, x: &DataPoint) -> PredictionTriple {
        let mu = self.mean_value(x.as_slice());
        if self.window.is_empty() {
            return PredictionTriple::uninformed(mu);
        }
        let b: Vec<f64> = self.window.iter().map(|e| signal_kernel(e.pair.x(), x.as_slice(), &self.hyper)).collect();
        let mean = mu + dot(&b, &self.alpha);
        let var = (self.hyper.prior_variance() - self.k_inv.quad_form(&b)).max(0.0);
        PredictionTriple::symmetric(mean, z_value(self.confidence) * var.sqrt())
    }

    pub fn log_likelihood(&self) -> Result<f64, LearnerError> {
        log_likelihood(&self.k, &self.residuals())
    }

    pub fn log_likelihood_gradient(&self) -> Result<Vec<f64>, LearnerError> {
        let pairs = self.pairs();
        let xs: Vec<&[f64]> = pairs.iter().map(|p| p.x()).collect();
        log_likelihood_gradient(&xs, &self.residuals(), &self.hyper)
    }

    fn refresh_means(&mut self) {
        let means: Vec<f64> = self.window.iter().map(|e| self.mean_value(e.pair.x())).collect();
        for (e, m) in self.window.iter_mut().zip(means) {
            e.mean = m;
        }
    }

    fn constrain(&self, v: &mut [f64]) {
        for p in v.iter_mut() {
            *p = p.clamp(-30.0, 30.0);
        }
        v[1] = v[1].max(v[0] + self.tune_cfg.min_log_noise_ratio);
    }

    /// Gradient ascent on the log marginal likelihood with step decay and
    /// random restarts; keeps the best configuration visited.
    pub fn gp_tune(&mut self) {
        if self.window.len() < 2 {
            return;
        }
        self.refresh_means();
        let pairs = self.pairs();
        let xs: Vec<&[f64]> = pairs.iter().map(|p| p.x()).collect();
        let r = self.residuals();
        let cfg = self.tune_cfg;
        let centre = GpHyperParams::from_data(&xs, &r).to_vec();

        let mut cur = self.hyper.to_vec();
        let mut cur_fit = Fit::new(&xs, &r, &self.hyper);
        let mut best = (cur.clone(), cur_fit.as_ref().map_or(f64::NEG_INFINITY, |f| f.ll));
        for _ in 0..cfg.max_iterations {
            let Some(fit) = cur_fit.as_ref() else {
                cur = self.restart(&centre);
                cur_fit = Fit::new(&xs, &r, &GpHyperParams::from_slice(&cur));
                continue;
            };
            let h = GpHyperParams::from_slice(&cur);
            let grad = fit.gradient(&xs, &h);
            let norm = grad.iter().fold(0.0, |m: f64, g| m.max(g.abs()));
            if !(norm >= cfg.zero_gradient) {
                break;
            }
            let mut step = cfg.max_step;
            let mut moved = None;
            for _ in 0..=cfg.max_decays {
                let mut cand: Vec<f64> = cur.iter().zip(&grad).map(|(p, g)| p + step * g / norm).collect();
                self.constrain(&mut cand);
                if Fit::ll_only(&xs, &r, &GpHyperParams::from_slice(&cand)) > fit.ll {
                    moved = Some(cand);
                    break;
                }
                step *= cfg.decayer;
            }
            cur = moved.unwrap_or_else(|| self.restart(&centre));
            cur_fit = Fit::new(&xs, &r, &GpHyperParams::from_slice(&cur));
            if let Some(f) = &cur_fit {
                if f.ll > best.1 {
                    best = (cur.clone(), f.ll);
                }
            }
        }
        self.hyper = GpHyperParams::from_slice(&best.0);
        self.tuned = true;
        self.rebuild();
    }

    fn restart(&mut self, centre: &[f64]) -> Vec<f64> {
        let range = self.tune_cfg.restart_range;
        let mut v: Vec<f64> = centre.iter().map(|c| c + self.rng.random_range(-range..=range)).collect();
        self.constrain(&mut v);
        v
    }

    fn cold_start_refresh(&mut self) {
        let n = self.window.len();
        if self.tuned || n < 2 || !n.is_power_of_two() {
            return;
        }
        self.refresh_means();
        let pairs = self.pairs();
        let xs: Vec<&[f64]> = pairs.iter().map(|p| p.x()).collect();
        self.hyper = GpHyperParams::from_data(&xs, &self.residuals());
        self.rebuild();
    }
}

impl Model for GpState {
    fn predict(&self, x: &DataPoint) -> Result<PredictionTriple, LearnerError> {
        Ok(self.gp_predict(x))
    }

    fn update(&mut self, pair: &ObservedPair, _last: &PredictionTriple) -> Result<(), LearnerError> {
        if pair.point.dim() != self.hyper.dim() {
            return Err(LearnerError::DimensionMismatch { expected: self.hyper.dim(), got: pair.point.dim() });
        }
        self.add_observation(pair.clone());
        self.cold_start_refresh();
        Ok(())
    }

    fn tune(&mut self) -> Result<(), LearnerError> {
        self.gp_tune();
        Ok(())
    }

    fn len(&self) -> usize {
        self.window.len()
    }

    fn capacity(&self) -> usize {
        self.window.capacity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        let h = GpHyperParams::new(0.0, 0.5f64.ln(), vec![0.0]);
        assert!((sq_exp_kernel(&[1.0], &[1.0], &h, true) - 1.25).abs() < 1e-12);
        assert!((sq_exp_kernel(&[1.0], &[1.0], &h, false) - 1.0).abs() < 1e-12);
        let h0 = GpHyperParams::new(0.0, f64::NEG_INFINITY, vec![0.0]);
        let v = sq_exp_kernel(&[0.0], &[2f64.sqrt()], &h0, false);
        assert!((v - (-1f64).exp()).abs() < 1e-12);
        assert!(sq_exp_kernel(&[0.0], &[1e3], &h0, false) < 1e-300);
    }

    #[test]
    fn add_to_empty() {
        let h = GpHyperParams::new(0.3, -0.2, vec![0.1]);
        let mut s = GpState::new(1, 4, MeanKind::Zero, 0.95, 0).with_hyper(h.clone());
        s.add_observation(ObservedPair::new(vec![1.0], 2.0));
        let k = h.prior_variance();
        assert!((s.kernel_matrix()[(0, 0)] - k).abs() < 1e-15);
        assert!((s.kernel_inverse()[(0, 0)] - 1.0 / k).abs() < 1e-15);
    }

    #[test]
    fn single_point_likelihood() {
        let k = Matrix::from_rows(&[vec![2.5]]);
        let y0 = 1.7;
        let want = -0.5 * (2.0 * PI).ln() - 0.5 * 2.5f64.ln() - y0 * y0 / 5.0;
        assert!((log_likelihood(&k, &[y0]).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn mean_kinds() {
        let mut s = GpState::new(1, 8, MeanKind::Average, 0.95, 0);
        for y in [2.0, 4.0, 6.0] {
            s.update(&ObservedPair::new(vec![y], y), &PredictionTriple::exact(0.0)).unwrap();
        }
        assert_eq!(s.mean_value(&[0.0]), 4.0);
        let z = GpState::new(1, 8, MeanKind::Zero, 0.95, 0);
        assert_eq!(z.mean_value(&[3.0]), 0.0);
    }

    #[test]
    fn far_query_recovers_prior() {
        let h = GpHyperParams::new(0.0, (0.1f64).ln(), vec![0.0]);
        let mut s = GpState::new(1, 8, MeanKind::Zero, 0.95, 0).with_hyper(h.clone());
        for x in [0.0, 1.0, 2.0] {
            s.add_observation(ObservedPair::new(vec![x], x + 1.0));
        }
        let t = s.gp_predict(&DataPoint::new(vec![1e4]));
        assert!(t.point.abs() < 1e-12);
        let half = t.upper - t.point;
        assert!((half - 1.96 * h.prior_variance().sqrt()).abs() < 1e-9);
    }
}
