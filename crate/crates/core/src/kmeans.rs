//! Lloyd's k-means with k-means++ seeding and best-of-restarts selection.

use crate::error::{IdfdError, Result};
use crate::linalg::Matrix;
use crate::metrics::Partition;
use crate::rng::SeededRng;

/// Iteration cap for a single Lloyd run.
pub const MAX_ITERATIONS: usize = 300;

/// Restarts used when the caller has no preference.
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub partition: Partition,
    /// `k × d`.
    pub centroids: Matrix,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each assignment step of the returned run.
    pub history: Vec<f64>,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid (lowest index on ties).
fn nearest(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.iter_rows().enumerate() {
        let d = sq_dist(x, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn check_input(x: &Matrix, k: usize) -> Result<()> {
    if x.rows() == 0 {
        return Err(IdfdError::EmptyInput("k-means on zero points".into()));
    }
    if k == 0 || k > x.rows() {
        return Err(IdfdError::DomainError(format!(
            "k = {k} clusters for {} points",
            x.rows()
        )));
    }
    Ok(())
}

/// k-means++ seeding: first centre uniform, the rest by squared-distance
/// sampling.
pub fn plus_plus_init(x: &Matrix, k: usize, rng: &mut SeededRng) -> Result<Matrix> {
    check_input(x, k)?;
    let n = x.rows();
    let mut chosen = vec![rng.below_inclusive(n - 1)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Round-off can leave `target` past the final sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            rng.below_inclusive(n - 1)
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    x.select_rows(&chosen)
}

/// Lloyd iterations from the given centroids until the assignment stops
/// changing or [`MAX_ITERATIONS`] is hit.
///
/// A centroid that loses all its points is moved onto the point farthest from
/// its current centroid.
pub fn lloyd(x: &Matrix, initial: Matrix) -> Result<KMeansResult> {
    let k = initial.rows();
    check_input(x, k)?;
    if initial.cols() != x.cols() {
        return Err(IdfdError::ShapeMismatch(format!(
            "centroids have dim {}, data has dim {}",
            initial.cols(),
            x.cols()
        )));
    }
    let n = x.rows();
    let d = x.cols();
    let mut centroids = initial;
    let mut assign = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        let mut changed = false;
        for i in 0..n {
            let (c, d2) = nearest(x.row(i), &centroids);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
            dist[i] = d2;
        }
        history.push(dist.iter().sum());
        if !changed || iterations >= MAX_ITERATIONS {
            break;
        }
        iterations += 1;

        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for (s, &v) in sums.row_mut(assign[i]).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            } else {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dist[b] >= dist[i] => Some(b),
                        _ => Some(i),
                    })
                    .expect("k <= n leaves a free point");
                taken[far] = true;
                centroids.row_mut(c).copy_from_slice(x.row(far));
            }
        }
    }

    let inertia = (0..n).map(|i| sq_dist(x.row(i), centroids.row(assign[i]))).sum();
    Ok(KMeansResult {
        partition: Partition::new(assign, k)?,
        centroids,
        inertia,
        iterations,
        history,
    })
}

/// Best of `restarts` seeded Lloyd runs.
///
/// Restart `r` runs on a stream derived from one draw of `rng`, so results do
/// not depend on evaluation order. Ties in inertia go to the lower restart.
pub fn kmeans(x: &Matrix, k: usize, rng: &mut SeededRng, restarts: usize) -> Result<KMeansResult> {
    check_input(x, k)?;
    let base = SeededRng::new(rand::RngCore::next_u64(rng));
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts.max(1) {
        let mut stream = base.derive(r as u64);
        let init = plus_plus_init(x, k, &mut stream)?;
        let run = lloyd(x, init)?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}
