//! Outlier rejection and smoothing for coefficient sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale factor turning a median absolute deviation into a Gaussian sigma.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub outlier_window: usize,
    /// Rejection threshold in units of the scaled MAD.
    pub outlier_k: f64,
    pub smooth_window: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            outlier_window: 9,
            outlier_k: 3.0,
            smooth_window: 7,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outlier_window < 3 || self.outlier_window.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "outlier_window must be odd and >= 3, got {}",
                self.outlier_window
            )));
        }
        if self.smooth_window == 0 || self.smooth_window.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "smooth_window must be odd and >= 1, got {}",
                self.smooth_window
            )));
        }
        if !(self.outlier_k > 0.0) || !self.outlier_k.is_finite() {
            return Err(Error::InvalidArgument(format!("outlier_k must be positive, got {}", self.outlier_k)));
        }
        Ok(())
    }
}

fn median(buf: &mut [f64]) -> f64 {
    buf.sort_by(|a, b| a.total_cmp(b));
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    }
}

/// Upper limit on rejection passes in [`remove_outliers`].
pub const MAX_OUTLIER_PASSES: usize = 64;

/// Sliding-median outlier rejection.
///
/// Each point is compared against the median of the window centred on it
/// (shifted inwards near the ends so it always holds `outlier_window` points).
/// Points further than `outlier_k · 1.4826 · MAD` from that median are replaced
/// by it. A zero MAD flags only points that differ from the median at all.
///
/// Passes are repeated on the cleaned series until one flags nothing, so the
/// output is a fixed point of the filter. The returned indices are the union
/// over all passes, sorted.
pub fn remove_outliers(series: &[f64], cfg: &FilterConfig) -> Result<(Vec<f64>, Vec<usize>)> {
    cfg.validate()?;
    let n = series.len();
    let w = cfg.outlier_window;
    if n < w {
        return Err(Error::InvalidArgument(format!("series of length {n} is shorter than outlier_window {w}")));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series contains non-finite values".into()));
    }
    let mut current = series.to_vec();
    let mut flagged = Vec::new();
    for _ in 0..MAX_OUTLIER_PASSES {
        let (next, hits) = rejection_pass(&current, cfg);
        if hits.is_empty() {
            flagged.sort_unstable();
            flagged.dedup();
            return Ok((current, flagged));
        }
        flagged.extend(hits);
        current = next;
    }
    Err(Error::NoConvergence(format!(
        "outlier rejection still flagging points after {MAX_OUTLIER_PASSES} passes"
    )))
}

fn rejection_pass(series: &[f64], cfg: &FilterConfig) -> (Vec<f64>, Vec<usize>) {
    let n = series.len();
    let w = cfg.outlier_window;
    let half = w / 2;
    let mut cleaned = series.to_vec();
    let mut flagged = Vec::new();
    let mut buf = vec![0.0; w];
    for i in 0..n {
        let start = i.saturating_sub(half).min(n - w);
        buf.copy_from_slice(&series[start..start + w]);
        let med = median(&mut buf);
        for v in buf.iter_mut() {
            *v = (*v - med).abs();
        }
        let mad = median(&mut buf);
        let dev = (series[i] - med).abs();
        let outlier = if mad == 0.0 {
            dev > 0.0
        } else {
            dev > cfg.outlier_k * MAD_SCALE * mad
        };
        if outlier {
            cleaned[i] = med;
            flagged.push(i);
        }
    }
    (cleaned, flagged)
}

/// Centred moving average. Near the ends the window shrinks symmetrically so
/// every output stays centred on its input.
pub fn smooth(series: &[f64], cfg: &FilterConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = series.len();
    if n < cfg.smooth_window {
        return Err(Error::InvalidArgument(format!(
            "series of length {n} is shorter than smooth_window {}",
            cfg.smooth_window
        )));
    }
    let half = cfg.smooth_window / 2;
    Ok((0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            if h == 0 {
                return series[i];
            }
            let window = &series[i - h..=i + h];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect())
}
