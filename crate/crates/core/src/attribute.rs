//! Percentage contribution of each model term to the response.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::regress::{fit_spec, ModelSpec, TermId, TrainingSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMethod {
    /// `|beta_j| / sum |beta|`.
    CoefShare,
    /// SSE increase when the term alone is dropped and the model refit.
    #[default]
    PartialSs,
}

impl fmt::Display for AttributionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttributionMethod::CoefShare => "coef_share",
            AttributionMethod::PartialSs => "partial_ss",
        })
    }
}

impl FromStr for AttributionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "coef_share" => Ok(AttributionMethod::CoefShare),
            "partial_ss" => Ok(AttributionMethod::PartialSs),
            other => Err(Error::InvalidParameter(format!("unknown attribution method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionEntry {
    pub rank: usize,
    pub term: TermId,
    pub label: String,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionRanking {
    pub method: AttributionMethod,
    pub entries: Vec<ContributionEntry>,
}

impl ContributionRanking {
    fn from_weights(method: AttributionMethod, weights: Vec<(TermId, f64)>) -> Result<Self> {
        let total: f64 = weights.iter().map(|w| w.1).sum();
        if !(total > 0.0) {
            return Err(Error::ZeroContributionTotal);
        }
        let mut shares: Vec<(TermId, f64)> = weights.into_iter().map(|(t, w)| (t, w / total * 100.0)).collect();
        // Stable sort keeps term order among equal shares.
        shares.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(ContributionRanking {
            method,
            entries: shares
                .into_iter()
                .enumerate()
                .map(|(i, (term, contribution))| ContributionEntry {
                    rank: i + 1,
                    term,
                    label: term.label(),
                    contribution,
                })
                .collect(),
        })
    }

    /// Rank / indicator / percent table.
    pub fn table(&self) -> String {
        let width = self.entries.iter().map(|e| e.label.chars().count()).max().unwrap_or(0).max(22);
        let mut out = format!("{:>4}  {:<width$}  {:>14}\n", "Rank", "Indicator/Interaction", "Contribution %");
        for e in &self.entries {
            out.push_str(&format!("{:>4}  {:<width$}  {:>14.2}\n", e.rank, e.label, e.contribution));
        }
        out
    }
}

pub fn coefficient_shares(terms: &[(TermId, f64)]) -> Result<ContributionRanking> {
    ContributionRanking::from_weights(
        AttributionMethod::CoefShare,
        terms.iter().map(|&(t, b)| (t, b.abs())).collect(),
    )
}

pub fn partial_ss_shares(data: &TrainingSet, spec: &ModelSpec, exec: Execution) -> Result<ContributionRanking> {
    let base = fit_spec(data, spec)?.sse;
    let terms: Vec<TermId> = spec.terms().collect();
    let deltas = map_indexed(exec, terms.len(), |k| -> Result<(TermId, f64)> {
        let reduced = fit_spec(data, &spec.without(terms[k]))?;
        Ok((terms[k], (reduced.sse - base).max(0.0)))
    });
    ContributionRanking::from_weights(
        AttributionMethod::PartialSs,
        deltas.into_iter().collect::<Result<Vec<_>>>()?,
    )
}

/// Ranks the terms of a model fitted on `data`. `coefficients` holds the
/// intercept first, as in [`crate::regress::FittedModel`].
pub fn rank_contributions(
    spec: &ModelSpec,
    coefficients: &[f64],
    data: &TrainingSet,
    method: AttributionMethod,
    exec: Execution,
) -> Result<ContributionRanking> {
    match method {
        AttributionMethod::CoefShare => {
            let pairs: Vec<(TermId, f64)> = spec.terms().zip(coefficients[1..].iter().copied()).collect();
            coefficient_shares(&pairs)
        }
        AttributionMethod::PartialSs => partial_ss_shares(data, spec, exec),
    }
}
