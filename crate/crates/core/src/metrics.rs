//! Partition comparison metrics (ACC, NMI, ARI) and feature correlations.
//!
//! NMI is normalized by the arithmetic mean of the two entropies. ACC uses
//! an optimal one-to-one matching of cluster ids to label ids on the
//! contingency table (Kuhn-Munkres).

use pathfinding::prelude::{kuhn_munkres, Matrix as WeightMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{IdfdError, Result};
use crate::linalg::Matrix;

/// Hard assignment of `n` items to clusters `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignments: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(assignments: Vec<usize>, k: usize) -> Result<Self> {
        if assignments.is_empty() {
            return Err(IdfdError::EmptyInput("partition of zero items".into()));
        }
        if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
            return Err(IdfdError::IndexOutOfRange { index: bad, len: k });
        }
        Ok(Self { assignments, k })
    }

    /// Uses `max(label) + 1` as the cluster count.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(labels.to_vec(), k)
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Number of distinct ids actually used.
    pub fn occupied(&self) -> usize {
        let mut seen = vec![false; self.k];
        self.assignments.iter().for_each(|&a| seen[a] = true);
        seen.into_iter().filter(|&s| s).count()
    }
}

/// `counts[i][j]` = number of items with `y = i` and `p = j`.
fn contingency(y: &Partition, p: &Partition) -> Result<Vec<Vec<u64>>> {
    if y.len() != p.len() {
        return Err(IdfdError::LengthMismatch {
            left: y.len(),
            right: p.len(),
        });
    }
    let mut table = vec![vec![0u64; p.k]; y.k];
    for (&a, &b) in y.assignments.iter().zip(&p.assignments) {
        table[a][b] += 1;
    }
    Ok(table)
}

/// Fraction of items matched under the best one-to-one relabeling.
pub fn acc(y: &Partition, p: &Partition) -> Result<f64> {
    let table = contingency(y, p)?;
    let size = y.k.max(p.k);
    let weights = WeightMatrix::from_fn(size, size, |(i, j)| {
        if i < y.k && j < p.k {
            table[i][j] as i64
        } else {
            0
        }
    });
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / y.len() as f64)
}

fn entropy(counts: impl Iterator<Item = u64>, n: f64) -> f64 {
    let mut terms: Vec<f64> = counts
        .filter(|&c| c > 0)
        .map(|c| {
            let q = c as f64 / n;
            -q * q.ln()
        })
        .collect();
    sorted_sum(&mut terms)
}

/// Order-independent sum, so that swapping the arguments of a metric cannot
/// change the result.
fn sorted_sum(terms: &mut [f64]) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Mutual information normalized by the mean entropy, in `[0, 1]`.
///
/// Two single-cluster partitions score 1.
pub fn nmi(y: &Partition, p: &Partition) -> Result<f64> {
    let table = contingency(y, p)?;
    let n = y.len() as f64;
    let rows: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<u64> = (0..p.k).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let hy = entropy(rows.iter().copied(), n);
    let hp = entropy(cols.iter().copied(), n);
    if hy == 0.0 && hp == 0.0 {
        return Ok(1.0);
    }
    let mut terms = Vec::new();
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                terms.push(c / n * (c * n / (rows[i] as f64 * cols[j] as f64)).ln());
            }
        }
    }
    let mi = sorted_sum(&mut terms).max(0.0);
    Ok((mi / (0.5 * (hy + hp))).clamp(0.0, 1.0))
}

fn pairs(c: u64) -> u128 {
    let c = c as u128;
    c * c.saturating_sub(1) / 2
}

/// Adjusted Rand index from pair counts.
///
/// When the expected index equals its maximum (both partitions trivial) the
/// result is 1.
pub fn ari(y: &Partition, p: &Partition) -> Result<f64> {
    let table = contingency(y, p)?;
    let index: u128 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let sum_rows: u128 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let sum_cols: u128 = (0..p.k)
        .map(|j| pairs(table.iter().map(|r| r[j]).sum()))
        .sum();
    let total = pairs(y.len() as u64);
    if total == 0 {
        return Ok(1.0);
    }
    // Scaled by 2·total so numerator and denominator stay integral.
    let (index, a, b, total) = (index as i128, sum_rows as i128, sum_cols as i128, total as i128);
    let numerator = 2 * (index * total - a * b);
    let denominator = (a + b) * total - 2 * a * b;
    if denominator == 0 {
        return Ok(1.0);
    }
    Ok(numerator as f64 / denominator as f64)
}

/// The three clustering scores against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterScores {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
}

pub fn score(truth: &Partition, predicted: &Partition) -> Result<ClusterScores> {
    Ok(ClusterScores {
        acc: acc(truth, predicted)?,
        nmi: nmi(truth, predicted)?,
        ari: ari(truth, predicted)?,
    })
}

/// Serializable metrics summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub k: usize,
    pub n: usize,
    pub seed: u64,
}

impl MetricsReport {
    pub fn new(scores: ClusterScores, k: usize, n: usize, seed: u64) -> Self {
        Self {
            acc: scores.acc,
            nmi: scores.nmi,
            ari: scores.ari,
            k,
            n,
            seed,
        }
    }
}

/// Pearson correlations between feature columns.
#[derive(Debug, Clone)]
pub struct FeatureCorrelation {
    /// `d × d`, unit diagonal.
    pub matrix: Matrix,
    /// Columns with zero variance; their off-diagonal entries are reported as 0.
    pub constant_features: usize,
}

impl FeatureCorrelation {
    pub fn mean_abs_off_diagonal(&self) -> f64 {
        let d = self.matrix.rows();
        if d < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    total += self.matrix[(i, j)].abs();
                }
            }
        }
        total / (d * (d - 1)) as f64
    }
}

pub fn feature_correlation(v: &Matrix) -> Result<FeatureCorrelation> {
    let (n, d) = v.shape();
    if n < 2 {
        return Err(IdfdError::DomainError(format!(
            "correlation needs at least 2 samples, got {n}"
        )));
    }
    let mut centred = v.transpose();
    let mut scale = vec![0.0; d];
    let mut constant_features = 0;
    for (l, s) in scale.iter_mut().enumerate() {
        let col = centred.row_mut(l);
        let mean = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|x| *x -= mean);
        let ss = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if ss <= 1e-12 * (1.0 + mean.abs()) * (n as f64).sqrt() {
            constant_features += 1;
        } else {
            *s = ss;
        }
    }
    let matrix = Matrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else if scale[i] == 0.0 || scale[j] == 0.0 {
            0.0
        } else {
            crate::linalg::dot(centred.row(i), centred.row(j)) / (scale[i] * scale[j])
        }
    });
    Ok(FeatureCorrelation {
        matrix,
        constant_features,
    })
}
