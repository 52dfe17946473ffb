//! Instance-discrimination and feature-constraint losses with analytic
//! gradients.
//!
//! All losses are sums over the batch (instance term) or over the feature
//! vectors (feature terms). Feature vectors are the columns of the batch
//! matrix, each scaled to unit length before use, so gradients include the
//! column-normalization Jacobian.
//!
//! Every softmax is evaluated as `logit - max` before exponentiation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::bank::MemoryBank;
use crate::error::{IdfdError, Result};
use crate::linalg::{dot, norm, Matrix, ZERO_NORM};

pub const INSTANCE: &str = "L_I";
pub const DECORRELATION: &str = "L_F";
pub const ORTHOGONALITY: &str = "L_FO";

/// Which objective a run optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum LossMode {
    /// Instance discrimination only.
    #[serde(rename = "ID")]
    Id,
    /// Instance discrimination plus the strict orthogonality penalty.
    #[serde(rename = "IDFO")]
    Idfo,
    /// Instance discrimination plus softmax feature decorrelation.
    #[serde(rename = "IDFD")]
    Idfd,
}

impl LossMode {
    /// Name of the feature component, if the mode has one.
    pub fn feature_term(self) -> Option<&'static str> {
        match self {
            LossMode::Id => None,
            LossMode::Idfo => Some(ORTHOGONALITY),
            LossMode::Idfd => Some(DECORRELATION),
        }
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossMode::Id => "ID",
            LossMode::Idfo => "IDFO",
            LossMode::Idfd => "IDFD",
        })
    }
}

impl FromStr for LossMode {
    type Err = IdfdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ID" => Ok(LossMode::Id),
            "IDFO" => Ok(LossMode::Idfo),
            "IDFD" => Ok(LossMode::Idfd),
            other => Err(IdfdError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceLossConfig {
    pub tau: f64,
}

impl InstanceLossConfig {
    pub fn new(tau: f64) -> Result<Self> {
        check_temperature("tau", tau)?;
        Ok(Self { tau })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureLossConfig {
    pub tau2: f64,
    pub alpha: f64,
}

impl FeatureLossConfig {
    pub fn new(tau2: f64, alpha: f64) -> Result<Self> {
        check_temperature("tau2", tau2)?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(IdfdError::DomainError(format!("alpha must be >= 0, got {alpha}")));
        }
        Ok(Self { tau2, alpha })
    }
}

fn check_temperature(name: &str, t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(IdfdError::DomainError(format!("{name} must be positive, got {t}")))
    }
}

/// Loss value, gradient with respect to the batch rows and the unweighted
/// component values.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub value: f64,
    pub grad: Matrix,
    pub components: BTreeMap<&'static str, f64>,
}

impl LossReport {
    pub fn component(&self, name: &str) -> Option<f64> {
        self.components.get(name).copied()
    }
}

/// `log Σ exp(x)` and the softmax of `x`, shifted by the maximum.
fn log_sum_exp_softmax(logits: &[f64], probs: &mut Vec<f64>) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    probs.clear();
    probs.extend(logits.iter().map(|&x| (x - max).exp()));
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    max + sum.ln()
}

/// Probability that `v` is assigned to instance `i` under the bank softmax
/// with temperature `tau`.
pub fn instance_prob(v: &[f64], bank: &MemoryBank, i: usize, tau: f64) -> Result<f64> {
    check_temperature("tau", tau)?;
    if i >= bank.len() {
        return Err(IdfdError::IndexOutOfRange {
            index: i,
            len: bank.len(),
        });
    }
    if v.len() != bank.dim() {
        return Err(IdfdError::ShapeMismatch(format!(
            "vector has dim {}, bank has dim {}",
            v.len(),
            bank.dim()
        )));
    }
    let logits: Vec<f64> = bank
        .rows()
        .iter_rows()
        .map(|row| dot(row, v) / tau)
        .collect();
    let mut probs = Vec::with_capacity(logits.len());
    log_sum_exp_softmax(&logits, &mut probs);
    Ok(probs[i])
}

fn check_batch_indices(batch_v: &Matrix, bank: &MemoryBank, indices: &[usize]) -> Result<()> {
    if indices.len() != batch_v.rows() {
        return Err(IdfdError::LengthMismatch {
            left: indices.len(),
            right: batch_v.rows(),
        });
    }
    if batch_v.cols() != bank.dim() {
        return Err(IdfdError::ShapeMismatch(format!(
            "batch has dim {}, bank has dim {}",
            batch_v.cols(),
            bank.dim()
        )));
    }
    let mut seen = vec![false; bank.len()];
    for &i in indices {
        if i >= bank.len() {
            return Err(IdfdError::IndexOutOfRange {
                index: i,
                len: bank.len(),
            });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(IdfdError::DomainError(format!("duplicate batch index {i}")));
        }
    }
    Ok(())
}

/// Instance-discrimination loss `−Σ_b log P(i_b | v_b)`.
///
/// Row `b` of the batch is scored against every bank row; its own class weight
/// is the bank row `indices[b]`. Bank rows are constants, so the gradient is
/// `(Σ_j p_j w_j − w_{i_b}) / τ` per row.
pub fn loss_id(batch_v: &Matrix, bank: &MemoryBank, indices: &[usize], tau: f64) -> Result<LossReport> {
    check_temperature("tau", tau)?;
    check_batch_indices(batch_v, bank, indices)?;
    let weights = bank.rows();
    let d = batch_v.cols();
    let mut grad = Matrix::zeros(batch_v.rows(), d);
    let mut value = 0.0;
    let mut logits = Vec::with_capacity(bank.len());
    let mut probs = Vec::with_capacity(bank.len());
    for (b, &own) in indices.iter().enumerate() {
        let v = batch_v.row(b);
        logits.clear();
        logits.extend(weights.iter_rows().map(|w| dot(w, v) / tau));
        let lse = log_sum_exp_softmax(&logits, &mut probs);
        value += lse - logits[own];

        let g = grad.row_mut(b);
        for (w, &p) in weights.iter_rows().zip(&probs) {
            for (gk, &wk) in g.iter_mut().zip(w) {
                *gk += p * wk;
            }
        }
        for (gk, &wk) in g.iter_mut().zip(weights.row(own)) {
            *gk = (*gk - wk) / tau;
        }
    }
    Ok(LossReport {
        value,
        grad,
        components: BTreeMap::from([(INSTANCE, value)]),
    })
}

/// Unit-length feature vectors taken from the columns of a batch.
#[derive(Debug, Clone)]
pub struct FeatureVectors {
    /// `d × B`; row `l` is the normalized column `l` of the batch.
    pub features: Matrix,
    /// Original column norms.
    pub norms: Vec<f64>,
}

impl FeatureVectors {
    pub fn from_batch(batch_v: &Matrix) -> Result<Self> {
        let mut features = batch_v.transpose();
        let mut norms = Vec::with_capacity(features.rows());
        for l in 0..features.rows() {
            let row = features.row_mut(l);
            let n = norm(row);
            if n < ZERO_NORM {
                return Err(IdfdError::DegenerateFeature { column: l });
            }
            row.iter_mut().for_each(|x| *x /= n);
            norms.push(n);
        }
        Ok(Self { features, norms })
    }

    /// Similarities `z_jl = f_jᵀ f_l`.
    pub fn similarities(&self) -> Matrix {
        crate::linalg::gram(&self.features)
    }

    /// Maps a cotangent on the similarity matrix back to the batch rows.
    ///
    /// `dz[(j, l)]` is `∂L/∂z_jl` with every entry treated as an independent
    /// variable.
    fn backward(&self, dz: &Matrix) -> Matrix {
        let d = self.features.rows();
        let sym = Matrix::from_fn(d, d, |l, j| dz[(j, l)] + dz[(l, j)]);
        let grad_f = sym
            .matmul(&self.features)
            .expect("feature cotangent shape is d x d");
        let b = self.features.cols();
        let mut out = Matrix::zeros(b, d);
        for l in 0..d {
            let f = self.features.row(l);
            let g = grad_f.row(l);
            let along = dot(f, g);
            let rho = self.norms[l];
            for s in 0..b {
                out[(s, l)] = (g[s] - f[s] * along) / rho;
            }
        }
        out
    }
}

/// Orthogonality penalty `‖F Fᵀ − I‖²` over the normalized feature vectors.
pub fn loss_fo(batch_v: &Matrix) -> Result<LossReport> {
    let fv = FeatureVectors::from_batch(batch_v)?;
    let z = fv.similarities();
    let d = z.rows();
    let mut value = 0.0;
    let dz = Matrix::from_fn(d, d, |j, l| {
        let e = z[(j, l)] - if j == l { 1.0 } else { 0.0 };
        value += e * e;
        2.0 * e
    });
    Ok(LossReport {
        value,
        grad: fv.backward(&dz),
        components: BTreeMap::from([(ORTHOGONALITY, value)]),
    })
}

/// Softmax probability `Q(l | f)` over the feature vectors (rows of
/// `features`).
pub fn feature_prob(f: &[f64], features: &Matrix, l: usize, tau2: f64) -> Result<f64> {
    check_temperature("tau2", tau2)?;
    if l >= features.rows() {
        return Err(IdfdError::IndexOutOfRange {
            index: l,
            len: features.rows(),
        });
    }
    if f.len() != features.cols() {
        return Err(IdfdError::ShapeMismatch(format!(
            "feature has length {}, expected {}",
            f.len(),
            features.cols()
        )));
    }
    let logits: Vec<f64> = features.iter_rows().map(|fm| dot(fm, f) / tau2).collect();
    let mut probs = Vec::new();
    log_sum_exp_softmax(&logits, &mut probs);
    Ok(probs[l])
}

/// Softmax feature decorrelation `Σ_l −log Q(l | f_l)`, computed within the
/// batch.
pub fn loss_fd(batch_v: &Matrix, tau2: f64) -> Result<LossReport> {
    check_temperature("tau2", tau2)?;
    let fv = FeatureVectors::from_batch(batch_v)?;
    let z = fv.similarities();
    let d = z.rows();
    let mut dz = Matrix::zeros(d, d);
    let mut value = 0.0;
    let mut logits = Vec::with_capacity(d);
    let mut probs = Vec::with_capacity(d);
    for l in 0..d {
        logits.clear();
        logits.extend((0..d).map(|j| z[(j, l)] / tau2));
        let lse = log_sum_exp_softmax(&logits, &mut probs);
        value += lse - logits[l];
        for j in 0..d {
            let delta = if j == l { 1.0 } else { 0.0 };
            dz[(j, l)] = (probs[j] - delta) / tau2;
        }
    }
    Ok(LossReport {
        value,
        grad: fv.backward(&dz),
        components: BTreeMap::from([(DECORRELATION, value)]),
    })
}

/// `L_I`, `L_I + α·L_FO` or `L_I + α·L_F` depending on `mode`.
///
/// `components` holds the unweighted addends.
pub fn combined_loss(
    batch_v: &Matrix,
    bank: &MemoryBank,
    indices: &[usize],
    cfg_i: &InstanceLossConfig,
    cfg_f: &FeatureLossConfig,
    mode: LossMode,
) -> Result<LossReport> {
    let mut report = loss_id(batch_v, bank, indices, cfg_i.tau)?;
    let feature = match mode {
        LossMode::Id => return Ok(report),
        LossMode::Idfo => loss_fo(batch_v)?,
        LossMode::Idfd => loss_fd(batch_v, cfg_f.tau2)?,
    };
    let alpha = cfg_f.alpha;
    report.value += alpha * feature.value;
    if alpha != 0.0 {
        for (g, &h) in report
            .grad
            .as_mut_slice()
            .iter_mut()
            .zip(feature.grad.as_slice())
        {
            *g += alpha * h;
        }
    }
    report.components.extend(feature.components);
    Ok(report)
}

fn check_similarity(z: f64) -> Result<()> {
    if z.is_finite() && z.abs() <= 1.0 + 1e-9 {
        Ok(())
    } else {
        Err(IdfdError::DomainError(format!("similarity {z} outside [-1, 1]")))
    }
}

/// `∂L_F/∂z_jl` for the similarity column `column = (z_1l, …, z_dl)`.
pub fn dlf_dz_column(column: &[f64], j: usize, l: usize, tau2: f64) -> Result<f64> {
    check_temperature("tau2", tau2)?;
    let d = column.len();
    if j >= d || l >= d {
        return Err(IdfdError::IndexOutOfRange {
            index: j.max(l),
            len: d,
        });
    }
    let logits: Vec<f64> = column.iter().map(|z| z / tau2).collect();
    let mut probs = Vec::new();
    log_sum_exp_softmax(&logits, &mut probs);
    let delta = if j == l { 1.0 } else { 0.0 };
    Ok((probs[j] - delta) / tau2)
}

/// `∂L_F/∂z` for a representative two-feature column.
///
/// Off-diagonal: the column is `(z_ll = 1, z_jl = z)` and the result is
/// `softmax / τ₂` for the `z` entry. Diagonal: the column is `(z_ll = z,
/// z_jl = 0)` and the result includes the `−1/τ₂` term.
pub fn dlf_dz(z: f64, diagonal: bool, tau2: f64) -> Result<f64> {
    check_similarity(z)?;
    if diagonal {
        dlf_dz_column(&[z, 0.0], 0, 0, tau2)
    } else {
        dlf_dz_column(&[1.0, z], 1, 0, tau2)
    }
}

/// `∂L_FO/∂z = −2δ + 2z`.
pub fn dlfo_dz(z: f64, diagonal: bool) -> Result<f64> {
    check_similarity(z)?;
    Ok(if diagonal { -2.0 + 2.0 * z } else { 2.0 * z })
}
