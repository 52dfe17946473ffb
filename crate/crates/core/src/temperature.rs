//! Circle toy model comparing the instance loss of a uniform spread against a
//! compact k-cluster arrangement, and the `exp(cos θ / τ)` concentration curve.
//!
//! Both losses are evaluated in shifted form, e.g.
//! `L_uniform = log Σ_m exp((cos(2πm/n) − 1)/τ)`, which is the same quantity
//! without overflow at small `τ`. Sums are pairwise.

use std::f64::consts::TAU as TWO_PI;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{IdfdError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyModelConfig {
    /// Points on the circle.
    pub n: usize,
    /// Clusters in the compact arrangement.
    pub k: usize,
    pub tau: f64,
}

impl ToyModelConfig {
    pub fn new(n: usize, k: usize, tau: f64) -> Result<Self> {
        if n == 0 || k == 0 || k > n {
            return Err(IdfdError::DomainError(format!("need 1 <= k <= n, got n={n} k={k}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(IdfdError::DomainError(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { n, k, tau })
    }
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// `log Σ_{m<count} exp((cos(2πm/count) − 1)/τ)`.
fn shifted_log_sum(count: usize, tau: f64) -> f64 {
    let terms: Vec<f64> = (0..count)
        .map(|m| ((TWO_PI * m as f64 / count as f64).cos() - 1.0) / tau)
        .map(f64::exp)
        .collect();
    pairwise_sum(&terms).ln()
}

/// Per-sample instance loss with `n` points evenly spaced on the circle.
pub fn uniform_loss(cfg: &ToyModelConfig) -> f64 {
    shifted_log_sum(cfg.n, cfg.tau)
}

/// Per-sample instance loss with `n/k` points stacked on each of `k` evenly
/// spaced positions.
pub fn compact_loss(cfg: &ToyModelConfig) -> Result<f64> {
    if !cfg.n.is_multiple_of(cfg.k) {
        return Err(IdfdError::DivisibilityError { n: cfg.n, k: cfg.k });
    }
    Ok(((cfg.n as f64).ln() - (cfg.k as f64).ln()) + shifted_log_sum(cfg.k, cfg.tau))
}

/// `|L_uniform − L_compact| / L_uniform`. Differences within a few ulps of
/// the losses are reported as zero.
pub fn tau_gap(n: usize, k: usize, tau: f64) -> Result<f64> {
    let cfg = ToyModelConfig::new(n, k, tau)?;
    if n < 2 {
        return Err(IdfdError::DomainError("relative gap needs n >= 2".into()));
    }
    let u = uniform_loss(&cfg);
    let c = compact_loss(&cfg)?;
    let diff = (u - c).abs();
    if diff <= 4.0 * f64::EPSILON * u.abs().max(c.abs()) {
        return Ok(0.0);
    }
    Ok(diff / u)
}

/// One row of the temperature table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TemperatureRow {
    pub tau: f64,
    pub uniform: f64,
    pub compact: f64,
    pub gap: f64,
}

pub fn temperature_table(n: usize, k: usize, taus: &[f64]) -> Result<Vec<TemperatureRow>> {
    taus.iter()
        .map(|&tau| {
            let cfg = ToyModelConfig::new(n, k, tau)?;
            Ok(TemperatureRow {
                tau,
                uniform: uniform_loss(&cfg),
                compact: compact_loss(&cfg)?,
                gap: tau_gap(n, k, tau)?,
            })
        })
        .collect()
}

/// Sampled `exp(cos θ / τ)` over `[0, 2π]`.
#[derive(Debug, Clone)]
pub struct ConcentrationProfile {
    pub tau: f64,
    pub points: Vec<(f64, f64)>,
    /// Largest sample over smallest sample.
    pub flatness: f64,
}

pub fn concentration_profile(tau: f64, grid: usize) -> Result<ConcentrationProfile> {
    if grid < 2 {
        return Err(IdfdError::DomainError(format!("grid needs at least 2 points, got {grid}")));
    }
    if !(tau > 0.0) {
        return Err(IdfdError::DomainError(format!("tau must be positive, got {tau}")));
    }
    let points: Vec<(f64, f64)> = (0..grid)
        .map(|i| {
            let theta = TWO_PI * i as f64 / (grid - 1) as f64;
            (theta, (theta.cos() / tau).exp())
        })
        .collect();
    let max = points.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    let min = points.iter().map(|p| p.1).fold(f64::MAX, f64::min);
    Ok(ConcentrationProfile {
        tau,
        points,
        flatness: max / min,
    })
}

/// `tau,uniform,compact,gap` with a header row.
pub fn write_table_csv(rows: &[TemperatureRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["tau", "uniform", "compact", "gap"])?;
    for r in rows {
        w.write_record([
            r.tau.to_string(),
            r.uniform.to_string(),
            r.compact.to_string(),
            r.gap.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `tau,theta,value` rows for every profile.
pub fn write_profiles_csv(profiles: &[ConcentrationProfile], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "tau,theta,value")?;
    for p in profiles {
        for (theta, value) in &p.points {
            writeln!(out, "{},{},{}", p.tau, theta, value)?;
        }
    }
    out.flush()?;
    Ok(())
}
