//! Multicollinearity screening and stepwise backward elimination.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Indicator};
use crate::error::{Error, Result};
use crate::regress::{fit_ols, fit_spec, ModelSpec, TermId, TrainingSet};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_VIF_THRESHOLD: f64 = 10.0;
pub const CORRELATION_CUTOFF: f64 = 0.80;
/// p-values closer than this are treated as tied at drop time.
const P_TIE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationWarning {
    pub first: String,
    pub second: String,
    pub r: f64,
}

/// Pearson correlations of the ten indicators and `wcp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Pairs with |r| above the cutoff.
    pub warnings: Vec<CorrelationWarning>,
}

fn centered(col: &[f64]) -> Vec<f64> {
    let m = col.iter().sum::<f64>() / col.len() as f64;
    col.iter().map(|v| v - m).collect()
}

pub fn correlation_matrix(data: &Dataset) -> Result<CorrelationMatrix> {
    let mut labels: Vec<String> = Indicator::ALL.iter().map(|i| i.column().to_string()).collect();
    labels.push("wcp".into());
    let mut cols: Vec<Vec<f64>> = Indicator::ALL.iter().map(|&i| data.column(i)).collect();
    cols.push(data.wcp());
    let cols: Vec<Vec<f64>> = cols.iter().map(|c| centered(c)).collect();
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    if let Some(k) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ConstantColumn(labels[k].clone()));
    }

    let p = cols.len();
    let mut values = vec![vec![0.0; p]; p];
    let mut warnings = Vec::new();
    for i in 0..p {
        values[i][i] = 1.0;
        for j in (i + 1)..p {
            let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            values[i][j] = r;
            values[j][i] = r;
            if r.abs() > CORRELATION_CUTOFF {
                warnings.push(CorrelationWarning {
                    first: labels[i].clone(),
                    second: labels[j].clone(),
                    r,
                });
            }
        }
    }
    Ok(CorrelationMatrix {
        labels,
        values,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifEntry {
    pub label: String,
    pub vif: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifReport {
    pub entries: Vec<VifEntry>,
    pub threshold: f64,
}

/// VIF of each column against all the others (with intercept).
pub fn vif_columns(columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = columns.len();
    if k < 2 {
        return Err(Error::InvalidParameter("VIF needs at least two columns".into()));
    }
    let n = columns[0].len();
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::LengthMismatch { left: n, right: c.len() });
    }
    (0..k)
        .map(|j| {
            let others: Vec<usize> = (0..k).filter(|&c| c != j).collect();
            let x = nalgebra::DMatrix::from_fn(n, k, |r, c| if c == 0 { 1.0 } else { columns[others[c - 1]][r] });
            let fit = fit_ols(&x, &columns[j]).map_err(|e| match e {
                Error::RankDeficient { .. } | Error::ZeroTotalVariance => Error::RankDeficient {
                    column: format!("column {j}"),
                },
                other => other,
            })?;
            // Exact dependence among the columns leaves 1 - R² at rounding level.
            let tolerance = 1.0 - fit.r_squared;
            if tolerance <= 1e-10 {
                return Err(Error::RankDeficient {
                    column: format!("column {j}"),
                });
            }
            Ok(1.0 / tolerance)
        })
        .collect()
}

/// VIF for the ten indicators; the response is excluded.
pub fn vif(data: &Dataset) -> Result<VifReport> {
    if data.len() < 12 {
        return Err(Error::DatasetTooSmall {
            required: 12,
            actual: data.len(),
        });
    }
    let cols: Vec<Vec<f64>> = Indicator::ALL.iter().map(|&i| data.column(i)).collect();
    let values = vif_columns(&cols).map_err(|e| match e {
        Error::RankDeficient { column } => {
            let k: usize = column.trim_start_matches("column ").parse().unwrap_or(0);
            Error::RankDeficient {
                column: Indicator::ALL[k].column().to_string(),
            }
        }
        other => other,
    })?;
    Ok(VifReport {
        entries: Indicator::ALL
            .iter()
            .zip(values)
            .map(|(ind, v)| VifEntry {
                label: ind.column().to_string(),
                vif: v,
                flagged: v >= DEFAULT_VIF_THRESHOLD,
            })
            .collect(),
        threshold: DEFAULT_VIF_THRESHOLD,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EliminationOptions {
    pub alpha: f64,
    /// Weak heredity: a main stays while any interaction involving it
    /// remains.
    pub heredity: bool,
}

impl Default for EliminationOptions {
    fn default() -> Self {
        EliminationOptions {
            alpha: DEFAULT_ALPHA,
            heredity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationStep {
    pub step: usize,
    pub dropped: TermId,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationTrace {
    pub steps: Vec<EliminationStep>,
    pub final_spec: ModelSpec,
    pub alpha: f64,
    pub heredity: bool,
}

impl EliminationTrace {
    /// Fixed-width step table for terminal output.
    pub fn table(&self) -> String {
        let mut out = format!("{:>4}  {:<10}  {:>10}\n", "step", "dropped", "p-value");
        for s in &self.steps {
            out.push_str(&format!("{:>4}  {:<10}  {:>10.6}\n", s.step, s.dropped.to_string(), s.p_value));
        }
        out.push_str(&format!(
            "final: {} terms + intercept (alpha = {}, heredity = {})\n",
            self.final_spec.len(),
            self.alpha,
            if self.heredity { "on" } else { "off" }
        ));
        out
    }
}

fn protected_by_heredity(spec: &ModelSpec, term: TermId) -> bool {
    match term {
        TermId::Main(i) => spec.terms().any(|t| t.is_interaction() && t.involves(i as usize)),
        TermId::Interaction(..) => false,
    }
}

/// Refits and drops the eligible term with the largest p-value above
/// `alpha`, one term per refit, until none remains.
pub fn backward_eliminate(
    data: &TrainingSet,
    start: &ModelSpec,
    options: &EliminationOptions,
) -> Result<(ModelSpec, EliminationTrace)> {
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {}", options.alpha)));
    }
    if data.len() <= start.n_params() {
        return Err(Error::UnfittableStart {
            n_obs: data.len(),
            n_params: start.n_params(),
        });
    }
    let mut spec = start.clone();
    let mut steps = Vec::new();
    loop {
        let fit = fit_spec(data, &spec)?;
        let mut candidate: Option<(TermId, f64)> = None;
        for (k, term) in spec.terms().enumerate() {
            let p = fit.p_values[k + 1];
            let p = if p.is_nan() { 1.0 } else { p };
            if p <= options.alpha || (options.heredity && protected_by_heredity(&spec, term)) {
                continue;
            }
            // Terms arrive in increasing order, so `>=` within the tie band
            // keeps the latest one.
            let take = match candidate {
                None => true,
                Some((_, best)) => p > best + P_TIE || (p - best).abs() <= P_TIE,
            };
            if take {
                candidate = Some((term, p));
            }
        }
        match candidate {
            None => break,
            Some((term, p)) => {
                spec = spec.without(term);
                steps.push(EliminationStep {
                    step: steps.len() + 1,
                    dropped: term,
                    p_value: p,
                });
            }
        }
    }
    let trace = EliminationTrace {
        steps,
        final_spec: spec.clone(),
        alpha: options.alpha,
        heredity: options.heredity,
    };
    Ok((spec, trace))
}
