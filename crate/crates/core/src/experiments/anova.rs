//! Balanced two-way fixed-effects ANOVA with interaction.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaRow {
    pub name: String,
    pub df: usize,
    pub sum_sq: f64,
    pub mean_sq: f64,
    /// `NaN` on the residual row, or when the residual mean square is zero.
    pub f: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaTable {
    /// Factor A, factor B, interaction, residuals.
    pub rows: Vec<AnovaRow>,
}

impl AnovaTable {
    pub fn row(&self, name: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn df(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.df).collect()
    }

    pub fn total_sum_sq(&self) -> f64 {
        self.rows.iter().map(|r| r.sum_sq).sum()
    }

    pub fn with_names(mut self, a: &str, b: &str) -> Self {
        self.rows[0].name = a.into();
        self.rows[1].name = b.into();
        self.rows[2].name = format!("{a}:{b}");
        self
    }
}

fn levels_of<T: PartialEq>(labels: &[T]) -> (Vec<usize>, usize) {
    let mut seen: Vec<&T> = Vec::new();
    let idx = labels
        .iter()
        .map(|l| match seen.iter().position(|s| *s == l) {
            Some(k) => k,
            None => {
                seen.push(l);
                seen.len() - 1
            }
        })
        .collect();
    (idx, seen.len())
}

pub fn two_way_anova<A: PartialEq, B: PartialEq>(
    responses: &[f64],
    factor_a: &[A],
    factor_b: &[B],
) -> Result<AnovaTable> {
    let n = responses.len();
    if factor_a.len() != n || factor_b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} responses, {} A labels, {} B labels",
            factor_a.len(),
            factor_b.len()
        )));
    }
    if responses.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("responses must be finite".into()));
    }
    let (ai, a) = levels_of(factor_a);
    let (bi, b) = levels_of(factor_b);
    if a < 2 || b < 2 {
        return Err(Error::InvalidArgument(format!(
            "factors need >= 2 levels (got {a} and {b})"
        )));
    }
    let mut counts = vec![0usize; a * b];
    let mut sums = vec![0.0; a * b];
    for k in 0..n {
        counts[ai[k] * b + bi[k]] += 1;
        sums[ai[k] * b + bi[k]] += responses[k];
    }
    let r = counts[0];
    if counts.iter().any(|&c| c != r) {
        return Err(Error::UnbalancedDesign(format!("cell counts {counts:?}")));
    }
    let resid_df = n - a * b;
    if resid_df == 0 {
        return Err(Error::InvalidArgument("zero residual degrees of freedom".into()));
    }

    let grand = responses.iter().sum::<f64>() / n as f64;
    let cell: Vec<f64> = sums.iter().map(|s| s / r as f64).collect();
    let a_mean: Vec<f64> = (0..a)
        .map(|i| (0..b).map(|j| cell[i * b + j]).sum::<f64>() / b as f64)
        .collect();
    let b_mean: Vec<f64> = (0..b)
        .map(|j| (0..a).map(|i| cell[i * b + j]).sum::<f64>() / a as f64)
        .collect();

    let ss_a = (b * r) as f64 * a_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_b = (a * r) as f64 * b_mean.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_ab = 0.0;
    for i in 0..a {
        for j in 0..b {
            ss_ab += (cell[i * b + j] - a_mean[i] - b_mean[j] + grand).powi(2);
        }
    }
    ss_ab *= r as f64;
    let ss_res: f64 = (0..n).map(|k| (responses[k] - cell[ai[k] * b + bi[k]]).powi(2)).sum();

    let ms_res = ss_res / resid_df as f64;
    let effect = |name: &str, df: usize, ss: f64| {
        let ms = ss / df as f64;
        let (f, p) = if ms_res > 0.0 {
            let f = ms / ms_res;
            (f, f_upper_tail(f, df as f64, resid_df as f64))
        } else {
            (f64::NAN, f64::NAN)
        };
        AnovaRow {
            name: name.into(),
            df,
            sum_sq: ss,
            mean_sq: ms,
            f,
            p,
        }
    };
    Ok(AnovaTable {
        rows: vec![
            effect("A", a - 1, ss_a),
            effect("B", b - 1, ss_b),
            effect("A:B", (a - 1) * (b - 1), ss_ab),
            AnovaRow {
                name: "Residuals".into(),
                df: resid_df,
                sum_sq: ss_res,
                mean_sq: ms_res,
                f: f64::NAN,
                p: f64::NAN,
            },
        ],
    })
}

/// `P(F > f)` for an `F(d1, d2)` variable.
pub fn f_upper_tail(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// `I_x(a, b)` by Lentz's continued fraction.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    // The fraction converges fast only below the mean; reflect otherwise.
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
