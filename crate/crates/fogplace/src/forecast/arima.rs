//! ARIMA modeling: d-fold differencing, conditional-sum-of-squares fitting
//! via simplex search, recursive forecasting, and order selection.
//!
//! Model form:
//!   z_t = alpha + phi_1 z_{t-1} + ... + phi_p z_{t-p}
//!             + eps_t - theta_1 eps_{t-1} - ... - theta_q eps_{t-q}
//! on the d-times differenced series z.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::optim::nelder_mead;

/// First-difference a series `d` times.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() <= d {
        return Err(Error::InvalidInput(format!(
            "series of length {} cannot be differenced {d} times",
            series.len()
        )));
    }
    let mut cur = series.to_vec();
    for _ in 0..d {
        cur = cur.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(cur)
}

/// Leading values needed to invert [`difference`]: the first element of each
/// intermediate differencing level, outermost first.
pub fn anchors(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() <= d {
        return Err(Error::InvalidInput(format!(
            "series of length {} cannot be differenced {d} times",
            series.len()
        )));
    }
    let mut cur = series.to_vec();
    let mut out = Vec::with_capacity(d);
    for _ in 0..d {
        out.push(cur[0]);
        cur = cur.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Invert `d`-fold differencing given the level anchors from [`anchors`].
pub fn undifference(diffed: &[f64], d: usize, anchors: &[f64]) -> Result<Vec<f64>> {
    if anchors.len() != d {
        return Err(Error::InvalidInput(format!(
            "{} anchors supplied for d = {d}",
            anchors.len()
        )));
    }
    let mut cur = diffed.to_vec();
    for &anchor in anchors.iter().rev() {
        let mut rebuilt = Vec::with_capacity(cur.len() + 1);
        rebuilt.push(anchor);
        for v in &cur {
            let prev = *rebuilt.last().unwrap();
            rebuilt.push(prev + v);
        }
        cur = rebuilt;
    }
    Ok(cur)
}

/// Schur-Cohn test: true iff all roots of 1 - phi_1 z - ... - phi_p z^p lie
/// outside the unit circle.
pub fn ar_is_stationary(phi: &[f64]) -> bool {
    // Work on the reflected coefficients a_k = phi_k; the recursion checks
    // that all partial autocorrelations have magnitude below one.
    let mut a: Vec<f64> = phi.to_vec();
    while let Some(&last) = a.last() {
        if last.abs() >= 1.0 - 1e-12 {
            return false;
        }
        let k = a.len() - 1;
        if k == 0 {
            return true;
        }
        let denom = 1.0 - last * last;
        let prev: Vec<f64> = (0..k)
            .map(|i| (a[i] + last * a[k - 1 - i]) / denom)
            .collect();
        a = prev;
    }
    true
}

/// A fitted ARIMA model, including the state needed to forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub alpha: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub residual_variance: f64,
    /// Whether the fitted AR polynomial is stationary. Non-stationary fits
    /// are returned but flagged.
    pub stationary: bool,
    /// Last p differenced values, most recent last.
    pub last_values: Vec<f64>,
    /// Last q in-sample residuals, most recent last.
    pub last_residuals: Vec<f64>,
    /// Last observed value at each differencing level 0..d (level 0 is the
    /// original series), used to integrate forecasts.
    pub tails: Vec<f64>,
}

/// Conditional sum of squared one-step residuals on the differenced series.
/// Pre-sample residuals are zero; summation starts at t = p.
fn css_residuals(z: &[f64], p: usize, q: usize, params: &[f64]) -> (Vec<f64>, f64) {
    let alpha = params[0];
    let phi = &params[1..1 + p];
    let theta = &params[1 + p..1 + p + q];
    let mut resid = vec![0.0; z.len()];
    let mut sse = 0.0;
    for t in p..z.len() {
        let mut pred = alpha;
        for (i, ph) in phi.iter().enumerate() {
            pred += ph * z[t - 1 - i];
        }
        for (j, th) in theta.iter().enumerate() {
            if t > j {
                pred -= th * resid[t - 1 - j];
            }
        }
        let e = z[t] - pred;
        resid[t] = e;
        sse += e * e;
    }
    (resid, sse)
}

fn css_objective(z: &[f64], p: usize, q: usize, params: &[f64]) -> f64 {
    let phi = &params[1..1 + p];
    let (_, sse) = css_residuals(z, p, q, params);
    if !sse.is_finite() {
        return f64::MAX / 4.0;
    }
    // Keep the search inside the stationary region; the final fit is
    // re-checked and flagged honestly.
    if !ar_is_stationary(phi) {
        let excess: f64 = phi.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
        return sse + 1e6 * excess;
    }
    sse
}

/// Ordinary least squares AR(p) start values (ignoring the MA part).
#[allow(clippy::needless_range_loop)]
fn ols_ar_start(z: &[f64], p: usize) -> Vec<f64> {
    // Solve the Yule-Walker-style normal equations by Gaussian elimination
    // on the small (p+1) system with intercept.
    let n = z.len();
    let dim = p + 1;
    let mut ata = vec![vec![0.0; dim]; dim];
    let mut atb = vec![0.0; dim];
    for t in p..n {
        let mut row = vec![1.0];
        for i in 0..p {
            row.push(z[t - 1 - i]);
        }
        for a in 0..dim {
            for b in 0..dim {
                ata[a][b] += row[a] * row[b];
            }
            atb[a] += row[a] * z[t];
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&a, &b| ata[a][col].abs().total_cmp(&ata[b][col].abs()))
            .unwrap();
        ata.swap(col, pivot);
        atb.swap(col, pivot);
        if ata[col][col].abs() < 1e-12 {
            return vec![0.0; dim];
        }
        for row in col + 1..dim {
            let factor = ata[row][col] / ata[col][col];
            for k in col..dim {
                ata[row][k] -= factor * ata[col][k];
            }
            atb[row] -= factor * atb[col];
        }
    }
    let mut x = vec![0.0; dim];
    for row in (0..dim).rev() {
        let mut acc = atb[row];
        for k in row + 1..dim {
            acc -= ata[row][k] * x[k];
        }
        x[row] = acc / ata[row][row];
    }
    x
}

/// Fit ARIMA(p, d, q) by minimizing the conditional sum of squares with a
/// simplex search from deterministic starts.
pub fn fit_arima(series: &[f64], p: usize, d: usize, q: usize) -> Result<ArimaModel> {
    let min_len = 10 * (p + q + 1) + d;
    if series.len() < min_len {
        return Err(Error::InvalidInput(format!(
            "series of length {} is shorter than required {min_len} for ({p},{d},{q})",
            series.len()
        )));
    }
    let z = difference(series, d)?;
    let mean = z.iter().sum::<f64>() / z.len() as f64;

    let params = if p == 0 && q == 0 {
        // Closed form: the CSS minimizer of a constant model is the mean.
        vec![mean]
    } else {
        let dim = 1 + p + q;
        let mut starts: Vec<Vec<f64>> = Vec::new();
        let mut zero_start = vec![0.0; dim];
        zero_start[0] = mean;
        starts.push(zero_start);
        if p > 0 {
            let ols = ols_ar_start(&z, p);
            let mut s = vec![0.0; dim];
            s[..1 + p].copy_from_slice(&ols);
            starts.push(s);
        }
        let mut mild = vec![0.1; dim];
        mild[0] = mean;
        starts.push(mild);

        let mut best: Option<(f64, Vec<f64>)> = None;
        for start in &starts {
            let r = nelder_mead(|x| css_objective(&z, p, q, x), start, 0.2, 400 * dim, 1e-12);
            if best.as_ref().is_none_or(|(v, _)| r.value < *v) {
                best = Some((r.value, r.point));
            }
        }
        let (value, point) = best.expect("at least one start");
        if !value.is_finite() {
            return Err(Error::NonConvergence(format!(
                "CSS search failed for ({p},{d},{q}): non-finite objective"
            )));
        }
        point
    };

    let (resid, sse) = css_residuals(&z, p, q, &params);
    let effective = (z.len() - p).max(1);
    let phi = params[1..1 + p].to_vec();
    let theta = params[1 + p..1 + p + q].to_vec();

    let mut tails = Vec::with_capacity(d);
    let mut level = series.to_vec();
    for _ in 0..d {
        tails.push(*level.last().unwrap());
        level = level.windows(2).map(|w| w[1] - w[0]).collect();
    }

    Ok(ArimaModel {
        p,
        d,
        q,
        alpha: params[0],
        stationary: ar_is_stationary(&phi),
        phi,
        theta,
        residual_variance: sse / effective as f64,
        last_values: z[z.len() - p..].to_vec(),
        last_residuals: resid[z.len() - q..].to_vec(),
        tails,
    })
}

impl ArimaModel {
    /// Recompute in-sample residuals for a series; used to confirm the
    /// reported residual variance.
    pub fn residual_variance_on(&self, series: &[f64]) -> Result<f64> {
        let z = difference(series, self.d)?;
        let mut params = vec![self.alpha];
        params.extend_from_slice(&self.phi);
        params.extend_from_slice(&self.theta);
        let (_, sse) = css_residuals(&z, self.p, self.q, &params);
        Ok(sse / (z.len() - self.p).max(1) as f64)
    }

    /// Recursive forecast: future residuals are zero, forecasts feed back as
    /// lagged values, and the result is integrated back through d levels.
    pub fn predict(&self, horizon: usize) -> Vec<f64> {
        let mut vals = self.last_values.clone();
        let mut resids = self.last_residuals.clone();
        let mut tails = self.tails.clone();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let mut pred = self.alpha;
            for (i, ph) in self.phi.iter().enumerate() {
                pred += ph * vals[vals.len() - 1 - i];
            }
            for (j, th) in self.theta.iter().enumerate() {
                pred -= th * resids[resids.len() - 1 - j];
            }
            vals.push(pred);
            resids.push(0.0);
            // Integrate one step through the differencing levels.
            let mut cur = pred;
            for k in (0..self.d).rev() {
                cur += tails[k];
                tails[k] = cur;
            }
            out.push(cur);
        }
        out
    }
}

/// Incremental one-step forecaster: feeds observations in one at a time and
/// keeps the differenced lags, residuals, and integration tails current.
#[derive(Debug, Clone)]
pub struct ArimaState {
    model: ArimaModel,
    vals: Vec<f64>,
    resids: Vec<f64>,
    tails: Vec<Option<f64>>,
    seen: usize,
}

impl ArimaState {
    /// Start from a fitted model, forgetting its in-sample state; feed
    /// history through [`observe`](Self::observe).
    pub fn new(model: &ArimaModel) -> Self {
        ArimaState {
            model: model.clone(),
            vals: Vec::new(),
            resids: Vec::new(),
            tails: vec![None; model.d],
            seen: 0,
        }
    }

    /// Number of observations consumed.
    pub fn observations(&self) -> usize {
        self.seen
    }

    /// Whether enough history has accumulated to forecast.
    pub fn ready(&self) -> bool {
        self.vals.len() >= self.model.p && self.seen > self.model.d
    }

    /// Consume one observation of the original (undifferenced) series.
    pub fn observe(&mut self, y: f64) {
        self.seen += 1;
        // Difference incrementally through the levels.
        let mut cur = y;
        let mut complete = true;
        for k in 0..self.model.d {
            match self.tails[k] {
                Some(prev) => {
                    let next = cur - prev;
                    self.tails[k] = Some(cur);
                    cur = next;
                }
                None => {
                    self.tails[k] = Some(cur);
                    complete = false;
                    break;
                }
            }
        }
        if !complete {
            return;
        }
        // cur is now the new differenced value; residual against the
        // one-step prediction made from the previous state.
        let resid = if self.vals.len() >= self.model.p {
            cur - self.predict_diff()
        } else {
            0.0
        };
        self.vals.push(cur);
        self.resids.push(resid);
        let keep = self.model.p.max(self.model.q).max(1);
        if self.vals.len() > keep {
            let cut = self.vals.len() - keep;
            self.vals.drain(..cut);
            self.resids.drain(..cut);
        }
    }

    fn predict_diff(&self) -> f64 {
        let m = &self.model;
        let mut pred = m.alpha;
        for (i, ph) in m.phi.iter().enumerate() {
            pred += ph * self.vals[self.vals.len() - 1 - i];
        }
        for (j, th) in m.theta.iter().enumerate() {
            if self.resids.len() > j {
                pred -= th * self.resids[self.resids.len() - 1 - j];
            }
        }
        pred
    }

    /// One-step-ahead forecast of the original series.
    pub fn forecast_one(&self) -> Option<f64> {
        if !self.ready() {
            return None;
        }
        let mut cur = self.predict_diff();
        for k in (0..self.model.d).rev() {
            cur += self.tails[k].expect("ready implies tails are filled");
        }
        Some(cur)
    }
}

/// Result of an order search.
#[derive(Debug, Clone)]
pub struct AutoArima {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub holdout_mae: f64,
    pub holdout_rmse: f64,
    pub model: ArimaModel,
}

/// Exhaustive grid search over p + q <= max_pq_sum and d <= max_d, selecting
/// the order with minimal holdout MAE (ties: RMSE, then fewer parameters,
/// then lexicographic order). The returned model is refit on the full series.
pub fn auto_arima(
    series: &[f64],
    max_p: usize,
    max_q: usize,
    max_d: usize,
    holdout_fraction: f64,
    max_pq_sum: usize,
) -> Result<AutoArima> {
    if !(0.0..1.0).contains(&holdout_fraction) || holdout_fraction <= 0.0 {
        return Err(Error::InvalidInput(
            "holdout_fraction must lie strictly between 0 and 1".into(),
        ));
    }
    let holdout_len = ((series.len() as f64 * holdout_fraction).round() as usize).max(1);
    if holdout_len >= series.len() {
        return Err(Error::InvalidInput("holdout larger than series".into()));
    }
    let (train, holdout) = series.split_at(series.len() - holdout_len);

    // (holdout MAE, holdout RMSE, parameter count, (p, d, q))
    type Ranked = (f64, f64, usize, (usize, usize, usize));
    let mut best: Option<Ranked> = None;
    let mut failures = Vec::new();
    for d in 0..=max_d {
        for p in 0..=max_p {
            for q in 0..=max_q {
                if p + q > max_pq_sum {
                    continue;
                }
                let model = match fit_arima(train, p, d, q) {
                    Ok(m) => m,
                    Err(e) => {
                        failures.push(format!("({p},{d},{q}): {e}"));
                        continue;
                    }
                };
                // Rolling one-step-ahead evaluation over the holdout: the
                // coefficients stay fixed, the state advances on actuals.
                let mut state = ArimaState::new(&model);
                for &y in train {
                    state.observe(y);
                }
                let mut abs_sum = 0.0;
                let mut sq_sum = 0.0;
                let mut count = 0usize;
                for &actual in holdout {
                    if let Some(f) = state.forecast_one() {
                        abs_sum += (f - actual).abs();
                        sq_sum += (f - actual).powi(2);
                        count += 1;
                    }
                    state.observe(actual);
                }
                if count == 0 {
                    failures.push(format!("({p},{d},{q}): holdout too short"));
                    continue;
                }
                let mae = abs_sum / count as f64;
                let rmse = (sq_sum / count as f64).sqrt();
                if !mae.is_finite() {
                    failures.push(format!("({p},{d},{q}): non-finite holdout error"));
                    continue;
                }
                let key = (mae, rmse, p + q + d, (p, d, q));
                let replace = match &best {
                    None => true,
                    Some((bm, br, bn, bo)) => {
                        key.0 < bm - 1e-12
                            || ((key.0 - bm).abs() <= 1e-12
                                && (key.1 < br - 1e-12
                                    || ((key.1 - br).abs() <= 1e-12
                                        && (key.2 < *bn || (key.2 == *bn && key.3 < *bo)))))
                    }
                };
                if replace {
                    best = Some(key);
                }
            }
        }
    }
    let (mae, rmse, _, (p, d, q)) = best.ok_or_else(|| {
        Error::NonConvergence(format!("all ARIMA fits failed: {}", failures.join("; ")))
    })?;
    let model = fit_arima(series, p, d, q)?;
    Ok(AutoArima {
        p,
        d,
        q,
        holdout_mae: mae,
        holdout_rmse: rmse,
        model,
    })
}

pub const ARIMA_SCHEMA_VERSION: u32 = 1;

/// Versioned JSON wire form of a fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArimaModelDoc {
    pub schema_version: u32,
    #[serde(flatten)]
    pub model: ArimaModel,
}

impl ArimaModel {
    pub fn to_doc(&self) -> ArimaModelDoc {
        ArimaModelDoc {
            schema_version: ARIMA_SCHEMA_VERSION,
            model: self.clone(),
        }
    }

    pub fn from_doc(doc: ArimaModelDoc) -> Result<ArimaModel> {
        if doc.schema_version != ARIMA_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported ARIMA schema version {}",
                doc.schema_version
            )));
        }
        Ok(doc.model)
    }
}
