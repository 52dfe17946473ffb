//! Spectral clustering on the exponential-similarity graph of unit
//! representations.
//!
//! The graph is fully connected with `W_ij = exp(v_iᵀ v_j / τ)`, degrees
//! `D_ii = Σ_m W_im` (self-similarity included) and the unnormalized Laplacian
//! `L = D − W`. Embedding rows are clustered as they are, without row
//! normalization.

use std::io::Write;
use std::path::Path;

use crate::error::{IdfdError, Result};
use crate::kmeans::kmeans;
use crate::linalg::{dot, symmetric_eigen, Matrix};
use crate::metrics::Partition;
use crate::rng::SeededRng;

#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    pub weights: Matrix,
    pub degrees: Vec<f64>,
    pub laplacian: Matrix,
}

impl SimilarityGraph {
    /// Graph from an explicit symmetric, entrywise non-negative weight matrix.
    pub fn from_weights(weights: Matrix) -> Result<Self> {
        let n = weights.rows();
        if n != weights.cols() {
            return Err(IdfdError::ShapeMismatch(format!(
                "weights must be square, got {:?}",
                weights.shape()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                if weights[(i, j)] < 0.0 {
                    return Err(IdfdError::DomainError(format!("negative weight at ({i}, {j})")));
                }
                if weights[(i, j)] != weights[(j, i)] {
                    return Err(IdfdError::NotSymmetric {
                        i,
                        j,
                        diff: (weights[(i, j)] - weights[(j, i)]).abs(),
                    });
                }
            }
        }
        let degrees: Vec<f64> = weights.iter_rows().map(|r| r.iter().sum()).collect();
        let laplacian = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                degrees[i] - weights[(i, i)]
            } else {
                -weights[(i, j)]
            }
        });
        Ok(Self {
            weights,
            degrees,
            laplacian,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.rows() == 0
    }
}

/// Fully connected graph over the rows of `v`.
pub fn build_graph(v: &Matrix, tau: f64) -> Result<SimilarityGraph> {
    if !(tau > 0.0) {
        return Err(IdfdError::DomainError(format!("tau must be positive, got {tau}")));
    }
    let weights = Matrix::from_fn(v.rows(), v.rows(), |i, j| (dot(v.row(i), v.row(j)) / tau).exp());
    SimilarityGraph::from_weights(weights)
}

fn check_embedding(graph: &SimilarityGraph, f: &Matrix) -> Result<()> {
    if f.rows() != graph.len() {
        return Err(IdfdError::ShapeMismatch(format!(
            "embedding has {} rows, graph has {} nodes",
            f.rows(),
            graph.len()
        )));
    }
    Ok(())
}

/// Spectral objective `Tr(Fᵀ L F)`.
pub fn loss_sp(graph: &SimilarityGraph, f: &Matrix) -> Result<f64> {
    check_embedding(graph, f)?;
    let lf = graph.laplacian.matmul(f)?;
    Ok(f.as_slice().iter().zip(lf.as_slice()).map(|(a, b)| a * b).sum())
}

/// The same objective as `½ Σ_k Σ_ij w_ij (f_ik − f_jk)²`.
pub fn loss_sp_pairwise(graph: &SimilarityGraph, f: &Matrix) -> Result<f64> {
    check_embedding(graph, f)?;
    let n = graph.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let diff: f64 = f
                .row(i)
                .iter()
                .zip(f.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += graph.weights[(i, j)] * diff;
        }
    }
    Ok(0.5 * total)
}

/// `Σ_ij exp(cos θ_ij / τ) · sin²(θ_ij / 2)` over all ordered pairs of unit rows.
///
/// With `F = V` this is exactly half of [`loss_sp`], because
/// `‖v_i − v_j‖² = 4 sin²(θ/2)`.
pub fn cosine_form_loss(v: &Matrix, tau: f64) -> f64 {
    let n = v.rows();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let c = dot(v.row(i), v.row(j)).clamp(-1.0, 1.0);
            let half_sin_sq = 0.5 * (1.0 - c);
            total += (c / tau).exp() * half_sin_sq;
        }
    }
    total
}

/// The `k` Laplacian eigenvectors with the smallest eigenvalues, as columns,
/// together with those eigenvalues.
pub fn spectral_embed_with_values(graph: &SimilarityGraph, k: usize) -> Result<(Matrix, Vec<f64>)> {
    if k == 0 || k >= graph.len() {
        return Err(IdfdError::DomainError(format!(
            "embedding dimension {k} must be in 1..{}",
            graph.len()
        )));
    }
    let eig = symmetric_eigen(&graph.laplacian, k)?;
    Ok((eig.vectors, eig.values))
}

pub fn spectral_embed(graph: &SimilarityGraph, k: usize) -> Result<Matrix> {
    spectral_embed_with_values(graph, k).map(|(v, _)| v)
}

/// k-means on the spectral embedding of an existing graph.
pub fn spectral_cluster_graph(
    graph: &SimilarityGraph,
    k: usize,
    rng: &mut SeededRng,
    restarts: usize,
) -> Result<Partition> {
    if k == 1 {
        return Partition::new(vec![0; graph.len()], 1);
    }
    let embedding = spectral_embed(graph, k)?;
    Ok(kmeans(&embedding, k, rng, restarts)?.partition)
}

/// Spectral clustering of unit representations.
pub fn spectral_cluster(
    v: &Matrix,
    tau: f64,
    k: usize,
    rng: &mut SeededRng,
    restarts: usize,
) -> Result<Partition> {
    spectral_cluster_graph(&build_graph(v, tau)?, k, rng, restarts)
}

/// `∂L_SP/∂θ = (1/τ)·sin θ·(τ − 1 + cos θ)·exp(cos θ / τ)` for one pair at
/// angle `θ ∈ [0, π]`.
pub fn dlsp_dtheta(theta: f64, tau: f64) -> Result<f64> {
    if !(-1e-12..=std::f64::consts::PI + 1e-12).contains(&theta) {
        return Err(IdfdError::DomainError(format!("theta {theta} outside [0, pi]")));
    }
    if !(tau > 0.0) {
        return Err(IdfdError::DomainError(format!("tau must be positive, got {tau}")));
    }
    let (s, c) = theta.sin_cos();
    Ok(s * (tau - 1.0 + c) * (c / tau).exp() / tau)
}

/// Writes `W`, `L` and the eigenvalues as three CSV files next to `prefix`
/// (`<prefix>_weights.csv`, `<prefix>_laplacian.csv`, `<prefix>_eigenvalues.csv`).
pub fn dump_csv(graph: &SimilarityGraph, eigenvalues: &[f64], prefix: &Path) -> Result<()> {
    let with_suffix = |s: &str| {
        let mut name = prefix.file_name().unwrap_or_default().to_os_string();
        name.push(s);
        prefix.with_file_name(name)
    };
    write_matrix_csv(&graph.weights, &with_suffix("_weights.csv"))?;
    write_matrix_csv(&graph.laplacian, &with_suffix("_laplacian.csv"))?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(with_suffix("_eigenvalues.csv"))?);
    writeln!(out, "index,eigenvalue")?;
    for (i, v) in eigenvalues.iter().enumerate() {
        writeln!(out, "{i},{v}")?;
    }
    out.flush()?;
    Ok(())
}

/// Headerless CSV, one matrix row per line.
pub fn write_matrix_csv(m: &Matrix, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for row in m.iter_rows() {
        let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}
