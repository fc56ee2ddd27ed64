//! Normality tests, Q-Q plot data and residual diagnostics.

use serde::{Deserialize, Serialize};

use crate::dist::{norm_cdf, norm_quantile, norm_sf};
use crate::error::{Error, Result};
use crate::regress::OlsEstimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityResult {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

fn sorted_copy(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    Ok(x)
}

fn poly(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Shapiro-Wilk W test using Royston's (1995) approximation for the
/// coefficients and the p-value, valid for 3 <= n <= 5000.
pub fn shapiro_wilk(sample: &[f64]) -> Result<NormalityResult> {
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
    const G: [f64; 2] = [-2.273, 0.459];

    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::SampleSizeOutOfRange { n, min: 3, max: 5000 });
    }
    let x = sorted_copy(sample)?;
    let range = x[n - 1] - x[0];
    if !(range > 0.0) {
        return Err(Error::DegenerateSample);
    }

    // Coefficients for the upper half, a[0] pairing x[n-1] with x[0].
    let half = n / 2;
    let an = n as f64;
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let m: Vec<f64> = (1..=half)
            .map(|i| norm_quantile((i as f64 - 0.375) / (an + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let a1 = poly(&C1, rsn) - m[0] / ssumm2;
        let (first_scaled, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            a[1] = a2;
            (2, fac)
        } else {
            let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
            (1, fac)
        };
        a[0] = a1;
        for i in first_scaled..half {
            a[i] = -m[i] / fac;
        }
    }

    // Work on centered, range-scaled data so W is location-scale invariant
    // to rounding.
    let mean = x.iter().sum::<f64>() / an;
    let xs: Vec<f64> = x.iter().map(|v| (v - mean) / range).collect();
    let ssq: f64 = xs.iter().map(|v| v * v).sum();
    let num: f64 = (0..half).map(|i| a[i] * (xs[n - 1 - i] - xs[i])).sum();
    let w = (num * num / ssq).min(1.0);

    let p_value = if n == 3 {
        let stqr = (0.75f64).sqrt().asin();
        (6.0 / std::f64::consts::PI * (w.sqrt().asin() - stqr)).clamp(0.0, 1.0)
    } else {
        let mut w1 = (1.0 - w).ln();
        let (mu, sigma);
        if n <= 11 {
            let gamma = poly(&G, an);
            if w1 >= gamma {
                return Ok(NormalityResult {
                    test_name: "shapiro_wilk".into(),
                    statistic: w,
                    p_value: 1e-99,
                    n,
                });
            }
            w1 = -(gamma - w1).ln();
            mu = poly(&C3, an);
            sigma = poly(&C4, an).exp();
        } else {
            let ln_n = an.ln();
            mu = poly(&C5, ln_n);
            sigma = poly(&C6, ln_n).exp();
        }
        if w >= 1.0 {
            1.0
        } else {
            norm_sf((w1 - mu) / sigma).clamp(0.0, 1.0)
        }
    };

    Ok(NormalityResult {
        test_name: "shapiro_wilk".into(),
        statistic: w,
        p_value,
        n,
    })
}

/// Anderson-Darling test for normality with estimated mean and variance.
/// The reported statistic is the small-sample adjusted
/// `A2 * (1 + 0.75/n + 2.25/n^2)`, from which the p-value is computed.
pub fn anderson_darling(sample: &[f64]) -> Result<NormalityResult> {
    let n = sample.len();
    if n < 8 {
        return Err(Error::SampleSizeOutOfRange {
            n,
            min: 8,
            max: usize::MAX,
        });
    }
    let x = sorted_copy(sample)?;
    if x[0] == x[n - 1] {
        return Err(Error::DegenerateSample);
    }
    let an = n as f64;
    let mean = x.iter().sum::<f64>() / an;
    let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (an - 1.0)).sqrt();
    let z: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();
    let s: f64 = (0..n)
        .map(|i| {
            let weight = (2 * i + 1) as f64;
            weight * (norm_cdf(z[i]).ln() + norm_sf(z[n - 1 - i]).ln())
        })
        .sum();
    let a2 = -an - s / an;
    let adjusted = a2 * (1.0 + 0.75 / an + 2.25 / (an * an));
    let p = if adjusted < 0.2 {
        1.0 - (-13.436 + 101.14 * adjusted - 223.73 * adjusted * adjusted).exp()
    } else if adjusted < 0.34 {
        1.0 - (-8.318 + 42.796 * adjusted - 59.938 * adjusted * adjusted).exp()
    } else if adjusted < 0.6 {
        (0.9177 - 4.279 * adjusted - 1.38 * adjusted * adjusted).exp()
    } else if adjusted <= 13.0 {
        (1.2937 - 5.709 * adjusted + 0.0186 * adjusted * adjusted).exp()
    } else {
        0.0
    };
    Ok(NormalityResult {
        test_name: "anderson_darling".into(),
        statistic: adjusted,
        p_value: p.clamp(0.0, 1.0),
        n,
    })
}

/// One point of a normal Q-Q plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub sample: f64,
}

/// Sorted sample against standard-normal quantiles at plotting positions
/// `(i - 3/8) / (n + 1/4)`.
pub fn qq_points(sample: &[f64]) -> Result<Vec<QqPoint>> {
    let n = sample.len();
    if n < 3 {
        return Err(Error::SampleSizeOutOfRange {
            n,
            min: 3,
            max: usize::MAX,
        });
    }
    let x = sorted_copy(sample)?;
    let an = n as f64;
    Ok(x.into_iter()
        .enumerate()
        .map(|(i, v)| QqPoint {
            theoretical: norm_quantile((i as f64 + 1.0 - 0.375) / (an + 0.25)),
            sample: v,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub fitted: f64,
    pub residual: f64,
    pub studentized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub mean_residual: f64,
    pub sum_residual: f64,
    pub shapiro: NormalityResult,
    pub anderson: NormalityResult,
    pub qq_points: Vec<QqPoint>,
    /// In fit order.
    pub residual_vs_fitted: Vec<ResidualPoint>,
}

/// Normality tests and plot data for the raw residuals of a fit.
/// Studentized residuals are internal: `e_i / (s * sqrt(1 - h_ii))`.
pub fn residual_diagnostics(fit: &OlsEstimate) -> Result<DiagnosticsReport> {
    let res = &fit.residuals;
    let n = res.len();
    let sum: f64 = res.iter().sum();
    let s = fit.sigma2.sqrt();
    let residual_vs_fitted = res
        .iter()
        .zip(&fit.fitted)
        .zip(&fit.leverage)
        .map(|((&e, &f), &h)| {
            let denom = s * (1.0 - h).max(0.0).sqrt();
            ResidualPoint {
                fitted: f,
                residual: e,
                studentized: if denom > 0.0 { e / denom } else { 0.0 },
            }
        })
        .collect();
    Ok(DiagnosticsReport {
        n,
        mean_residual: sum / n as f64,
        sum_residual: sum,
        shapiro: shapiro_wilk(res)?,
        anderson: anderson_darling(res)?,
        qq_points: qq_points(res)?,
        residual_vs_fitted,
    })
}

/// Two-column CSV export of Q-Q pairs.
pub fn qq_csv(points: &[QqPoint]) -> String {
    let mut out = String::from("theoretical,sample\n");
    for p in points {
        out.push_str(&format!("{},{}\n", p.theoretical, p.sample));
    }
    out
}

/// CSV export of residual-vs-fitted pairs (raw and studentized residuals).
pub fn residual_csv(points: &[ResidualPoint]) -> String {
    let mut out = String::from("fitted,residual,studentized\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.fitted, p.residual, p.studentized));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_scores_give_high_w() {
        let scores = crate::johnson::blom_scores(50);
        let r = shapiro_wilk(&scores).unwrap();
        assert!(r.statistic > 0.99, "{r:?}");
        assert!(r.p_value > 0.9);
    }

    #[test]
    fn small_n_paths() {
        let r = shapiro_wilk(&[1.0, 2.0, 3.0]).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-9);
        let r = shapiro_wilk(&[1.0, 2.0, 4.0, 8.0, 16.0]).unwrap();
        assert!(r.statistic < 1.0 && r.p_value > 0.0 && r.p_value < 1.0);
    }

    #[test]
    fn size_and_degenerate_errors() {
        assert!(matches!(shapiro_wilk(&[1.0, 2.0]), Err(Error::SampleSizeOutOfRange { .. })));
        assert!(matches!(shapiro_wilk(&vec![0.0; 5001]), Err(Error::SampleSizeOutOfRange { .. })));
        assert!(matches!(shapiro_wilk(&[2.0; 10]), Err(Error::DegenerateSample)));
        assert!(matches!(anderson_darling(&[1.0; 7]), Err(Error::SampleSizeOutOfRange { .. })));
        assert!(matches!(anderson_darling(&[1.0; 9]), Err(Error::DegenerateSample)));
        assert!(matches!(qq_points(&[1.0, 2.0]), Err(Error::SampleSizeOutOfRange { .. })));
    }

    #[test]
    fn two_point_sample_rejects_normality() {
        let s: Vec<f64> = (0..60).map(|i| if i % 2 == 0 { 1.0 } else { 5.0 }).collect();
        assert!(anderson_darling(&s).unwrap().p_value < 0.01);
        assert!(shapiro_wilk(&s).unwrap().p_value < 0.01);
    }

    #[test]
    fn qq_symmetry() {
        let q = qq_points(&[3.0, -3.0, 0.0]).unwrap();
        assert_eq!(q.len(), 3);
        assert!(q[1].theoretical.abs() < 1e-15);
        assert_eq!(q[1].sample, 0.0);
        assert!(q.windows(2).all(|w| w[0].theoretical < w[1].theoretical));
    }
}
