//! Linear-in-parameters learners: MLE and MAP estimators, maintained either
//! with a forgetting factor or over a sliding window.

use crate::error::LearnerError;
use crate::kreg::var_cov;
use crate::lifecycle::Model;
use crate::numkit::{
    cholesky_lower, cholesky_solve, dot, invert_psd, rank1_downdate_inverse_in_place,
    rank1_update_inverse_in_place, LinalgError, Matrix,
};
use crate::stats::z_value;
use crate::types::{DataPoint, ObservedPair, PredictionTriple};
use crate::window::SlidingWindow;

/// Prior scale: the initial inverse information matrix is `INIT_SCALE · I`.
pub const INIT_SCALE: f64 = 10_000.0;
/// Window replacements between Newton-Schulz corrections of `m1`.
pub const REANCHOR_PERIOD: usize = 16;

pub fn mapped_dim(d: usize) -> usize {
    d + d * (d + 1) / 2 + 2 * d
}

/// Degree-1 and degree-2 monomials, then ln and sqrt of each input.
pub fn map_features(x: &[f64]) -> Result<Vec<f64>, LearnerError> {
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(LearnerError::NonPositiveFeature { index, value });
    }
    let d = x.len();
    let mut out = Vec::with_capacity(mapped_dim(d));
    out.extend_from_slice(x);
    for i in 0..d {
        for j in i..d {
            out.push(x[i] * x[j]);
        }
    }
    out.extend(x.iter().map(|v| v.ln()));
    out.extend(x.iter().map(|v| v.sqrt()));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureMap {
    pub mapped: bool,
}

impl FeatureMap {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LearnerError> {
        if self.mapped {
            map_features(x)
        } else {
            Ok(x.to_vec())
        }
    }

    pub fn dim(&self, d: usize) -> usize {
        if self.mapped {
            mapped_dim(d)
        } else {
            d
        }
    }
}

/// Recursively maintained estimator. `m1` tracks (XXᵀ + init)⁻¹, `m2` tracks Xy.
#[derive(Debug, Clone)]
pub struct ParamState {
    pub m1: Matrix,
    pub m2: Vec<f64>,
    pub w: Vec<f64>,
    /// Regularizer added to XXᵀ; kept so the state can be rebuilt from scratch.
    pub init: Matrix,
    /// XXᵀ + init, the matrix `m1` inverts.
    pub gram: Matrix,
    pub s2: Option<f64>,
    pub n_seen: usize,
}

impl ParamState {
    /// Maximum-likelihood start: init = I/k, so m1 = k·I.
    pub fn mle(p: usize) -> Self {
        Self {
            m1: Matrix::scaled_identity(p, INIT_SCALE),
            m2: vec![0.0; p],
            w: vec![0.0; p],
            init: Matrix::scaled_identity(p, 1.0 / INIT_SCALE),
            gram: Matrix::scaled_identity(p, 1.0 / INIT_SCALE),
            s2: None,
            n_seen: 0,
        }
    }

    pub fn with_regularizer(init: Matrix) -> Result<Self, LearnerError> {
        let p = init.rows();
        Ok(Self { m1: invert_psd(&init)?, m2: vec![0.0; p], w: vec![0.0; p], gram: init.clone(), init, s2: None, n_seen: 0 })
    }

    pub fn p(&self) -> usize {
        self.w.len()
    }

    pub fn predict_point(&self, x: &[f64]) -> f64 {
        dot(&self.w, x)
    }

    /// w = m1·m2 followed by one step of iterative refinement against `gram`.
    fn refresh_w(&mut self) {
        let mut w = self.m1.mul_vec(&self.m2);
        let gw = self.gram.mul_vec(&w);
        let r: Vec<f64> = self.m2.iter().zip(&gw).map(|(b, g)| b - g).collect();
        w.iter_mut().zip(self.m1.mul_vec(&r)).for_each(|(wi, c)| *wi += c);
        self.w = w;
    }

    /// One Newton-Schulz step m1 ← 2·m1 − m1·gram·m1, which squares the
    /// inversion defect accumulated by rank-1 updates.
    pub fn reanchor(&mut self) {
        let m1g = self.m1.matmul(&self.gram);
        let mut next = self.m1.scaled(2.0).sub(&m1g.matmul(&self.m1));
        next.symmetrize();
        if next.as_slice().iter().all(|v| v.is_finite()) {
            self.m1 = next;
        }
    }

    /// Adds one point without forgetting.
    pub fn absorb(&mut self, x: &[f64], y: f64) -> Result<(), LearnerError> {
        rank1_update_inverse_in_place(&mut self.m1, x)?;
        self.gram.add_outer(1.0, x, x);
        self.m2.iter_mut().zip(x).for_each(|(m, xi)| *m += xi * y);
        self.refresh_w();
        self.n_seen += 1;
        Ok(())
    }

    /// Removes one previously absorbed point.
    pub fn forget(&mut self, x: &[f64], y: f64) -> Result<(), LearnerError> {
        rank1_downdate_inverse_in_place(&mut self.m1, x)?;
        self.gram.add_outer(-1.0, x, x);
        self.m2.iter_mut().zip(x).for_each(|(m, xi)| *m -= xi * y);
        self.refresh_w();
        Ok(())
    }

    /// Changes the target of a stored point in place; the inverse is untouched.
    pub fn retarget(&mut self, x: &[f64], old_y: f64, new_y: f64) {
        self.m2.iter_mut().zip(x).for_each(|(m, xi)| *m += xi * (new_y - old_y));
        self.refresh_w();
    }

    /// Rebuilds m1, m2 and w directly from a set of points.
    pub fn recompute<'a>(&mut self, points: impl IntoIterator<Item = (&'a [f64], f64)>) -> Result<(), LearnerError> {
        let p = self.p();
        let mut a = self.init.clone();
        let mut b = vec![0.0; p];
        for (x, y) in points {
            a.add_outer(1.0, x, x);
            b.iter_mut().zip(x).for_each(|(m, xi)| *m += xi * y);
        }
        self.m1 = invert_psd(&a)?;
        self.gram = a;
        self.m2 = b;
        self.refresh_w();
        Ok(())
    }

    /// Recursive least squares with forgetting factor `alpha`: past information
    /// is discounted by (1 − alpha) per step.
    pub fn forgetting_update(&mut self, x: &[f64], y: f64, alpha: f64) -> Result<(), LearnerError> {
        assert!((0.0..1.0).contains(&alpha), "forgetting factor must lie in [0,1)");
        let err = y - self.predict_point(x);
        rank1_update_inverse_in_place(&mut self.m1, x)?;
        self.gram.add_outer(1.0, x, x);
        let gain = self.m1.mul_vec(x);
        self.w.iter_mut().zip(&gain).for_each(|(w, g)| *w += g * err);
        self.m2.iter_mut().zip(x).for_each(|(m, xi)| *m = (1.0 - alpha) * (*m + xi * y));
        if alpha > 0.0 {
            self.m1.scale_in_place(1.0 / (1.0 - alpha));
            self.gram.scale_in_place(1.0 - alpha);
        }
        self.n_seen += 1;
        Ok(())
    }

    /// Swaps `dropped` for `added` in the maintained sums.
    pub fn windowed_replace(&mut self, dropped: (&[f64], f64), added: (&[f64], f64)) -> Result<(), LearnerError> {
        // Updating before downdating keeps the intermediate matrix full rank.
        rank1_update_inverse_in_place(&mut self.m1, added.0)?;
        rank1_downdate_inverse_in_place(&mut self.m1, dropped.0)?;
        self.gram.add_outer(1.0, added.0, added.0);
        self.gram.add_outer(-1.0, dropped.0, dropped.0);
        self.n_seen += 1;
        if self.n_seen % REANCHOR_PERIOD == 0 {
            self.reanchor();
        }
        for ((m, xd), xa) in self.m2.iter_mut().zip(dropped.0).zip(added.0) {
            *m += xa * added.1 - xd * dropped.1;
        }
        self.refresh_w();
        Ok(())
    }
}

/// s² = Σ residual² / (n − p).
pub fn residual_s2<'a>(points: impl IntoIterator<Item = (&'a [f64], f64)>, w: &[f64]) -> Result<f64, LearnerError> {
    let p = w.len();
    let mut n = 0usize;
    let mut sse = 0.0;
    for (x, y) in points {
        let r = y - dot(w, x);
        sse += r * r;
        n += 1;
    }
    if n <= p {
        return Err(LearnerError::InsufficientData { needed: p, have: n });
    }
    Ok(sse / (n - p) as f64)
}

pub fn asymptotic_bounds(x: &[f64], state: &ParamState, confidence: f64) -> PredictionTriple {
    let point = state.predict_point(x);
    match state.s2 {
        Some(s2) => {
            let leverage = state.m1.quad_form(x).max(0.0);
            let half = z_value(confidence) * (s2 * leverage + s2).sqrt();
            PredictionTriple::symmetric(point, half)
        }
        None => PredictionTriple::uninformed(point),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapPrior {
    pub sigma_y: f64,
    /// σ_y²·Σ_w⁻¹.
    pub sigma_w_inv_scaled: Matrix,
}

/// Prior and initial state from a parameter covariance Σ_w and noise level σ_y.
/// A degenerate Σ_w falls back to the identity.
pub fn map_init(sigma_w: Option<&Matrix>, sigma_y: f64, p: usize) -> (MapPrior, ParamState) {
    let sigma_w_inv = sigma_w
        .and_then(|s| invert_psd(s).ok())
        .unwrap_or_else(|| Matrix::identity(p));
    let reg = sigma_w_inv.scaled(sigma_y * sigma_y);
    let state = ParamState::with_regularizer(reg.clone())
        .unwrap_or_else(|_| ParamState::with_regularizer(Matrix::scaled_identity(p, sigma_y * sigma_y)).expect("σ_y²I is positive definite"));
    (MapPrior { sigma_y, sigma_w_inv_scaled: state.init.clone() }, state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for SigmaGrid {
    fn default() -> Self {
        Self { min: 0.1, max: 5.0, step: 0.1 }
    }
}

impl SigmaGrid {
    pub fn values(&self) -> Vec<f64> {
        let steps = ((self.max - self.min) / self.step + 1e-9).floor().max(0.0) as usize;
        (0..=steps).map(|i| self.min + i as f64 * self.step).collect()
    }
}

/// Exhaustive σ_y search with the window covariance as the parameter prior,
/// followed by a from-scratch refit for the winner.
pub fn map_tune(samples: &[(&[f64], f64)], grid: &SigmaGrid) -> Result<(MapPrior, ParamState), LearnerError> {
    let p = samples.first().map(|s| s.0.len()).ok_or(LearnerError::InsufficientData { needed: 1, have: 0 })?;
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.0).collect();
    let sigma_w = var_cov(&rows);
    let sigma_w_inv = invert_psd(&sigma_w).unwrap_or_else(|_| Matrix::identity(p));
    let mut gram = Matrix::zeros(p, p);
    let mut xy = vec![0.0; p];
    for &(x, y) in samples {
        gram.add_outer(1.0, x, x);
        xy.iter_mut().zip(x).for_each(|(b, xi)| *b += xi * y);
    }
    let mut best: Option<(f64, f64)> = None;
    for s in grid.values() {
        let a = gram.add(&sigma_w_inv.scaled(s * s));
        let Ok(l) = cholesky_lower(&a) else { continue };
        let w = cholesky_solve(&l, &xy);
        let err: f64 = samples.iter().map(|&(x, y)| (y - dot(&w, x)).powi(2)).sum();
        if best.map_or(true, |(_, e)| err < e) {
            best = Some((s, err));
        }
    }
    let (sigma_y, _) = best.ok_or(LinalgError::NotPositiveDefinite { index: 0, pivot: 0.0 })?;
    let reg = sigma_w_inv.scaled(sigma_y * sigma_y);
    let mut state = ParamState::with_regularizer(reg.clone())?;
    state.recompute(samples.iter().copied())?;
    state.n_seen = samples.len();
    Ok((MapPrior { sigma_y, sigma_w_inv_scaled: reg }, state))
}

/// Three-learner ad-hoc bounds for the forgetting flavors.
#[derive(Debug, Clone)]
pub struct EnsembleState {
    pub base: ParamState,
    pub upper: ParamState,
    pub lower: ParamState,
    pub burn_in_remaining: usize,
}

impl EnsembleState {
    pub fn new(start: ParamState, burn_in: usize) -> Self {
        Self { base: start.clone(), upper: start.clone(), lower: start, burn_in_remaining: burn_in }
    }

    pub fn predict(&self, x: &[f64]) -> PredictionTriple {
        PredictionTriple::new(self.lower.predict_point(x), self.base.predict_point(x), self.upper.predict_point(x))
    }

    pub fn update(&mut self, x: &[f64], y: f64, last: &PredictionTriple, alpha: f64) -> Result<(), LearnerError> {
        self.base.forgetting_update(x, y, alpha)?;
        if self.burn_in_remaining > 0 {
            self.burn_in_remaining -= 1;
            self.upper.forgetting_update(x, y, alpha)?;
            self.lower.forgetting_update(x, y, alpha)?;
            return Ok(());
        }
        if y > last.lower {
            self.upper.forgetting_update(x, y, alpha)?;
        }
        if y < last.upper {
            self.lower.forgetting_update(x, y, alpha)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Mle,
    Map,
}

#[derive(Debug, Clone)]
struct Sample {
    raw: Vec<f64>,
    phi: Vec<f64>,
    y: f64,
}

/// Sliding-window MLE/MAP learner with asymptotic bounds.
#[derive(Debug, Clone)]
pub struct WindowedParametric {
    estimator: Estimator,
    features: FeatureMap,
    confidence: f64,
    grid: SigmaGrid,
    window: SlidingWindow<Sample>,
    state: ParamState,
    prior: Option<MapPrior>,
}

impl WindowedParametric {
    pub fn new(estimator: Estimator, d: usize, capacity: usize, mapped: bool, confidence: f64) -> Self {
        let features = FeatureMap { mapped };
        let p = features.dim(d);
        let (state, prior) = match estimator {
            Estimator::Mle => (ParamState::mle(p), None),
            Estimator::Map => {
                let (prior, state) = map_init(None, 1.0, p);
                (state, Some(prior))
            }
        };
        Self { estimator, features, confidence, grid: SigmaGrid::default(), window: SlidingWindow::new(capacity), state, prior }
    }

    pub fn with_grid(mut self, grid: SigmaGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn state(&self) -> &ParamState {
        &self.state
    }

    pub fn prior(&self) -> Option<&MapPrior> {
        self.prior.as_ref()
    }

    /// Window contents as (mapped features, target), oldest first.
    pub fn window_samples(&self) -> Vec<(Vec<f64>, f64)> {
        self.window.iter().map(|s| (s.phi.clone(), s.y)).collect()
    }

    fn recompute(&mut self) -> Result<(), LearnerError> {
        let window = &self.window;
        self.state.recompute(window.iter().map(|s| (s.phi.as_slice(), s.y)))
    }

    fn refresh_s2(&mut self) {
        self.state.s2 = residual_s2(self.window.iter().map(|s| (s.phi.as_slice(), s.y)), &self.state.w).ok();
    }

    fn insert(&mut self, raw: Vec<f64>, phi: Vec<f64>, y: f64) -> Result<(), LearnerError> {
        if let Some(stored) = self.window.iter_mut().find(|s| s.raw == raw) {
            let old = stored.y;
            stored.y = y;
            self.state.retarget(&phi, old, y);
            return Ok(());
        }
        let dropped = self.window.push(Sample { raw, phi: phi.clone(), y });
        let step = match &dropped {
            Some(d) => self.state.windowed_replace((&d.phi, d.y), (&phi, y)),
            None => self.state.absorb(&phi, y),
        };
        match step {
            Err(LearnerError::Linalg(LinalgError::SingularUpdate { .. })) => self.recompute(),
            other => other,
        }
    }
}

impl Model for WindowedParametric {
    fn predict(&self, x: &DataPoint) -> Result<PredictionTriple, LearnerError> {
        let phi = self.features.apply(x.as_slice())?;
        Ok(asymptotic_bounds(&phi, &self.state, self.confidence))
    }

    fn update(&mut self, pair: &ObservedPair, _last: &PredictionTriple) -> Result<(), LearnerError> {
        let phi = self.features.apply(pair.x())?;
        if phi.len() != self.state.p() {
            return Err(LearnerError::DimensionMismatch { expected: self.state.p(), got: phi.len() });
        }
        self.insert(pair.x().to_vec(), phi, pair.target)?;
        self.refresh_s2();
        Ok(())
    }

    fn tune(&mut self) -> Result<(), LearnerError> {
        if self.estimator == Estimator::Mle || self.window.is_empty() {
            return Ok(());
        }
        let samples: Vec<(&[f64], f64)> = self.window.iter().map(|s| (s.phi.as_slice(), s.y)).collect();
        let (prior, state) = map_tune(&samples, &self.grid)?;
        self.prior = Some(prior);
        self.state = state;
        self.refresh_s2();
        Ok(())
    }

    fn len(&self) -> usize {
        self.window.len()
    }

    fn capacity(&self) -> usize {
        self.window.capacity()
    }
}

/// Forgetting-factor MLE/MAP learner with ensemble bounds.
#[derive(Debug, Clone)]
pub struct ForgettingParametric {
    features: FeatureMap,
    alpha: f64,
    ensemble: EnsembleState,
}

pub const DEFAULT_BURN_IN: usize = 30;

impl ForgettingParametric {
    pub fn new(estimator: Estimator, d: usize, alpha: f64, mapped: bool, burn_in: usize) -> Self {
        let features = FeatureMap { mapped };
        let p = features.dim(d);
        let start = match estimator {
            Estimator::Mle => ParamState::mle(p),
            Estimator::Map => map_init(None, 1.0, p).1,
        };
        Self { features, alpha, ensemble: EnsembleState::new(start, burn_in) }
    }

    pub fn ensemble(&self) -> &EnsembleState {
        &self.ensemble
    }
}

impl Model for ForgettingParametric {
    fn predict(&self, x: &DataPoint) -> Result<PredictionTriple, LearnerError> {
        Ok(self.ensemble.predict(&self.features.apply(x.as_slice())?))
    }

    fn update(&mut self, pair: &ObservedPair, last: &PredictionTriple) -> Result<(), LearnerError> {
        let phi = self.features.apply(pair.x())?;
        self.ensemble.update(&phi, pair.target, last, self.alpha)
    }

    fn len(&self) -> usize {
        self.ensemble.base.n_seen
    }

    fn capacity(&self) -> usize {
        usize::MAX
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_map_examples() {
        let f = map_features(&[2.0]).unwrap();
        assert_eq!(f, vec![2.0, 4.0, 2f64.ln(), 2f64.sqrt()]);
        let g = map_features(&[1.0, 1.0]).unwrap();
        assert_eq!(g, vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let h = map_features(&[2.0, 3.0]).unwrap();
        let want = [2.0, 3.0, 4.0, 6.0, 9.0, 2f64.ln(), 3f64.ln(), 2f64.sqrt(), 3f64.sqrt()];
        assert_eq!(h, want.to_vec());
        assert_eq!((mapped_dim(1), mapped_dim(2), mapped_dim(4)), (4, 9, 22));
        assert_eq!(map_features(&[1.0, 2.0, 3.0, 4.0]).unwrap().len(), 22);
    }

    #[test]
    fn feature_map_rejects_non_positive() {
        assert_eq!(
            map_features(&[1.0, 0.0]),
            Err(LearnerError::NonPositiveFeature { index: 1, value: 0.0 })
        );
    }

    #[test]
    fn s2_arithmetic() {
        let xs = [[1.0], [1.0], [1.0]];
        let ys = [1.0, -1.0, 2.0];
        let pts = xs.iter().zip(ys).map(|(x, y)| (x.as_slice(), y));
        assert_eq!(residual_s2(pts, &[0.0]).unwrap(), 3.0);
        let pts = xs.iter().take(1).map(|x| (x.as_slice(), 0.0));
        assert!(matches!(residual_s2(pts, &[0.0]), Err(LearnerError::InsufficientData { .. })));
    }

    #[test]
    fn bounds_examples() {
        let mut s = ParamState::mle(1);
        s.m1 = Matrix::zeros(1, 1);
        s.s2 = Some(1.0);
        let t = asymptotic_bounds(&[1.0], &s, 0.95);
        assert!((t.upper - t.point - 1.96).abs() < 1e-12);
        s.s2 = Some(0.0);
        let t = asymptotic_bounds(&[1.0], &s, 0.95);
        assert!(t.lower == t.point && t.point == t.upper);
    }

    #[test]
    fn map_init_examples() {
        let (_, s) = map_init(None, 1.0, 3);
        assert_eq!(s.m1, Matrix::identity(3));
        let (prior, s) = map_init(Some(&Matrix::diagonal(&[4.0, 1.0])), 2.0, 2);
        assert!(prior.sigma_w_inv_scaled.max_abs_diff(&Matrix::diagonal(&[1.0, 4.0])) < 1e-15);
        assert!(s.m1.max_abs_diff(&Matrix::diagonal(&[1.0, 0.25])) < 1e-15);
        let (_, s) = map_init(Some(&Matrix::zeros(2, 2)), 1.0, 2);
        assert_eq!(s.m1, Matrix::identity(2));
    }

    #[test]
    fn sigma_grid_values() {
        let v = SigmaGrid::default().values();
        assert_eq!(v.len(), 50);
        assert!((v[49] - 5.0).abs() < 1e-12);
        assert_eq!(SigmaGrid { min: 0.7, max: 0.7, step: 0.1 }.values(), vec![0.7]);
    }

    #[test]
    fn ensemble_filters() {
        let mut e = EnsembleState::new(ParamState::mle(1), 0);
        let last = PredictionTriple::new(0.0, 1.0, 2.0);
        e.update(&[1.0], 3.0, &last, 0.0).unwrap();
        assert_eq!((e.base.n_seen, e.upper.n_seen, e.lower.n_seen), (1, 1, 0));
        e.update(&[1.0], 1.0, &last, 0.0).unwrap();
        assert_eq!((e.base.n_seen, e.upper.n_seen, e.lower.n_seen), (2, 2, 1));
        let mut b = EnsembleState::new(ParamState::mle(1), 30);
        b.update(&[1.0], 9.0, &last, 0.0).unwrap();
        assert_eq!((b.base.n_seen, b.upper.n_seen, b.lower.n_seen), (1, 1, 1));
        let t = b.predict(&[1.0]);
        assert!(t.lower == t.point && t.point == t.upper);
    }

    #[test]
    fn ensemble_clamps() {
        let mut e = EnsembleState::new(ParamState::mle(1), 0);
        e.upper.w = vec![-1.0];
        e.base.w = vec![1.0];
        e.lower.w = vec![2.0];
        let t = e.predict(&[1.0]);
        assert_eq!((t.lower, t.point, t.upper), (1.0, 1.0, 1.0));
    }

    #[test]
    fn duplicate_point_overwrites_target() {
        let mut m = WindowedParametric::new(Estimator::Mle, 1, 4, false, 0.95);
        let last = PredictionTriple::exact(0.0);
        m.update(&ObservedPair::new(vec![1.0], 1.0), &last).unwrap();
        m.update(&ObservedPair::new(vec![2.0], 1.0), &last).unwrap();
        let m1 = m.state().m1.clone();
        m.update(&ObservedPair::new(vec![1.0], 5.0), &last).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.state().m1, m1);
        assert_eq!(m.window_samples()[0], (vec![1.0], 5.0));
    }
}
