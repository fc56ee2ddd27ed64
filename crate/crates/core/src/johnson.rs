//! Johnson SB (bounded family) normalizing transformation:
//! `t = gamma + eta * ln((x - xi) / (xi + lambda - x))` on `(xi, xi + lambda)`.

use serde::{Deserialize, Serialize};

use crate::diagnose::shapiro_wilk;
use crate::dist::{norm_cdf, norm_quantile};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};

/// Minimum sample size accepted by [`fit_sb`].
pub const MIN_FIT_SAMPLE: usize = 20;
/// Relative widening of a fitted support on each side, in units of lambda.
pub const SUPPORT_MARGIN: f64 = 1e-6;

/// The z value selected by the percentile fit and the Shapiro-Wilk p-value
/// of the transformed sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitMeta {
    pub z: f64,
    pub sw_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlatParams", into = "FlatParams")]
pub struct JohnsonSbParams {
    pub gamma: f64,
    pub eta: f64,
    pub xi: f64,
    pub lambda: f64,
    pub fit: Option<FitMeta>,
}

#[derive(Serialize, Deserialize)]
struct FlatParams {
    gamma: f64,
    eta: f64,
    xi: f64,
    lambda: f64,
    z: Option<f64>,
    sw_p: Option<f64>,
}

impl From<JohnsonSbParams> for FlatParams {
    fn from(p: JohnsonSbParams) -> Self {
        FlatParams {
            gamma: p.gamma,
            eta: p.eta,
            xi: p.xi,
            lambda: p.lambda,
            z: p.fit.map(|f| f.z),
            sw_p: p.fit.map(|f| f.sw_p),
        }
    }
}

impl TryFrom<FlatParams> for JohnsonSbParams {
    type Error = Error;

    fn try_from(f: FlatParams) -> Result<Self> {
        let mut p = JohnsonSbParams::new(f.gamma, f.eta, f.xi, f.lambda)?;
        if let (Some(z), Some(sw_p)) = (f.z, f.sw_p) {
            p.fit = Some(FitMeta { z, sw_p });
        }
        Ok(p)
    }
}

impl JohnsonSbParams {
    pub fn new(gamma: f64, eta: f64, xi: f64, lambda: f64) -> Result<Self> {
        if ![gamma, eta, xi, lambda].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("Johnson SB parameters must be finite".into()));
        }
        if eta <= 0.0 || lambda <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Johnson SB requires eta > 0 and lambda > 0, got eta = {eta}, lambda = {lambda}"
            )));
        }
        Ok(JohnsonSbParams {
            gamma,
            eta,
            xi,
            lambda,
            fit: None,
        })
    }

    pub fn lower(&self) -> f64 {
        self.xi
    }

    pub fn upper(&self) -> f64 {
        self.xi + self.lambda
    }

    pub fn in_support(&self, x: f64) -> bool {
        x > self.lower() && x < self.upper()
    }

    pub fn forward(&self, x: f64) -> Result<f64> {
        if !self.in_support(x) {
            return Err(Error::OutOfSupport {
                x,
                lower: self.lower(),
                upper: self.upper(),
            });
        }
        let below = x - self.xi;
        let above = self.lambda + self.xi - x;
        Ok(self.gamma + self.eta * (below / above).ln())
    }

    /// Inverse transform. Total on finite inputs; the result is kept
    /// strictly inside the open support even where the logistic saturates
    /// in floating point.
    pub fn inverse(&self, t: f64) -> f64 {
        let x = self.xi + self.lambda / (1.0 + ((self.gamma - t) / self.eta).exp());
        x.clamp(self.lower().next_up(), self.upper().next_down())
    }
}

/// Linear-interpolation sample quantile of sorted data (R type 7).
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Slifker-Shapiro percentile estimates for one z; `None` when the
/// percentiles do not indicate the bounded family or the fitted support
/// (after widening) does not contain every sample point.
fn percentile_candidate(sorted: &[f64], z: f64) -> Option<JohnsonSbParams> {
    let q = |zz: f64| quantile_sorted(sorted, norm_cdf(zz));
    let (x3, x1, xm1, xm3) = (q(3.0 * z), q(z), q(-z), q(-3.0 * z));
    let m = x3 - x1;
    let n = xm1 - xm3;
    let p = x1 - xm1;
    if !(m > 0.0 && n > 0.0 && p > 0.0) {
        return None;
    }
    let excess = p * p / (m * n) - 1.0;
    if excess <= 0.0 {
        return None;
    }
    let a = (1.0 + p / m) * (1.0 + p / n);
    let eta = z / (0.5 * a.sqrt()).acosh();
    let skew = p / n - p / m;
    let gamma = eta * (skew * (a - 4.0).sqrt() / (2.0 * excess)).asinh();
    let lambda = p * ((a - 2.0).powi(2) - 4.0).sqrt() / excess;
    let xi = 0.5 * (x1 + xm1) - 0.5 * lambda + p * skew / (2.0 * excess);

    let widened_xi = xi - SUPPORT_MARGIN * lambda;
    let widened_lambda = lambda * (1.0 + 2.0 * SUPPORT_MARGIN);
    let params = JohnsonSbParams::new(gamma, eta, widened_xi, widened_lambda).ok()?;
    let inside = params.in_support(sorted[0]) && params.in_support(sorted[sorted.len() - 1]);
    inside.then_some(params)
}

/// Grid of z values searched by [`fit_sb`]: 0.25, 0.26, ..., 1.25.
pub fn z_grid() -> Vec<f64> {
    (25..=125).map(|k| k as f64 / 100.0).collect()
}

pub fn fit_sb(sample: &[f64]) -> Result<JohnsonSbParams> {
    fit_sb_with(sample, Execution::default())
}

/// Percentile fit over the z grid, keeping the candidate whose transformed
/// sample has the largest Shapiro-Wilk p-value (smallest z on ties).
pub fn fit_sb_with(sample: &[f64], exec: Execution) -> Result<JohnsonSbParams> {
    if sample.len() < MIN_FIT_SAMPLE {
        return Err(Error::SampleTooSmall {
            required: MIN_FIT_SAMPLE,
            actual: sample.len(),
        });
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::DegenerateSample);
    }

    let grid = z_grid();
    let scored = map_indexed(exec, grid.len(), |i| {
        let z = grid[i];
        let params = percentile_candidate(&sorted, z)?;
        let transformed: Vec<f64> = sorted.iter().map(|&x| params.forward(x)).collect::<Result<_>>().ok()?;
        let sw = shapiro_wilk(&transformed).ok()?;
        Some((z, params, sw.p_value))
    });

    let mut best: Option<(f64, JohnsonSbParams, f64)> = None;
    for (z, params, p) in scored.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| p > b.2) {
            best = Some((z, params, p));
        }
    }
    let (z, mut params, sw_p) = best.ok_or(Error::NoValidFit)?;
    params.fit = Some(FitMeta { z, sw_p });
    Ok(params)
}

/// Expected standard-normal scores at Blom plotting positions, useful to
/// build an exactly SB-shaped sample.
pub fn blom_scores(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| norm_quantile((i as f64 - 0.375) / (n as f64 + 0.25)))
        .collect()
}
