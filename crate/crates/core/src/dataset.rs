//! Datasets: the synthetic sphere mixture, CSV tables and the binary image
//! container.
//!
//! Image container layout (little-endian):
//!
//! | field   | type            |
//! |---------|-----------------|
//! | magic   | `b"IDFD"`       |
//! | version | `u16` (= 1)     |
//! | n       | `u32`           |
//! | h, w    | `u16`, `u16`    |
//! | c       | `u8`            |
//! | pixels  | `n·h·w·c` bytes, each image `h × w × c` row-major |
//! | labels  | optional, `n` bytes |
//!
//! Pixels are exposed as samples in `[0, 1]` (byte / 255).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::augment::SampleShape;
use crate::error::{IdfdError, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::rng::{shuffled_indices, SeededRng};

const MAGIC: &[u8; 4] = b"IDFD";
const CONTAINER_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 2 + 2 + 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// One sample per row.
    pub samples: Matrix,
    pub shape: SampleShape,
    pub labels: Option<Vec<usize>>,
    pub name: String,
    pub source: Option<PathBuf>,
}

impl Dataset {
    pub fn new(samples: Matrix, shape: SampleShape, labels: Option<Vec<usize>>, name: impl Into<String>) -> Result<Self> {
        if samples.cols() != shape.len() {
            return Err(IdfdError::DimensionMismatch(format!(
                "{} values per sample, shape {:?} needs {}",
                samples.cols(),
                shape,
                shape.len()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != samples.rows() {
                return Err(IdfdError::LengthMismatch {
                    left: samples.rows(),
                    right: l.len(),
                });
            }
        }
        Ok(Self {
            samples,
            shape,
            labels,
            name: name.into(),
            source: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    /// Distinct ground-truth labels, if labelled.
    pub fn k_true(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().collect::<BTreeSet<_>>().len())
    }
}

/// Orthonormal rows from Gram-Schmidt on Gaussian draws.
fn random_rotation(dim: usize, rng: &mut SeededRng) -> Matrix {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let len = norm(&v);
        if len > 1e-6 {
            basis.push(v.into_iter().map(|x| x / len).collect());
        }
    }
    Matrix::from_rows(&basis).expect("finite basis")
}

/// Vertices of a regular simplex with `k` unit vertices in `k − 1`
/// dimensions; pairwise cosine `−1/(k−1)`.
fn simplex(k: usize) -> Vec<Vec<f64>> {
    if k == 1 {
        return vec![vec![]];
    }
    let centred: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| f64::from(u8::from(i == j)) - 1.0 / k as f64).collect())
        .collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for s in &centred {
        if basis.len() == k - 1 {
            break;
        }
        let mut v = s.clone();
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let len = norm(&v);
        basis.push(v.into_iter().map(|x| x / len).collect());
    }
    centred
        .iter()
        .map(|s| {
            let c: Vec<f64> = basis.iter().map(|b| dot(s, b)).collect();
            let len = norm(&c);
            c.into_iter().map(|x| x / len).collect()
        })
        .collect()
}

/// Largest angle achievable between every pair of `k` unit vectors in `dim`
/// dimensions, when it is known in closed form.
fn max_separation(k: usize, dim: usize) -> Option<f64> {
    match k {
        0 | 1 => Some(std::f64::consts::PI),
        _ if k <= dim + 1 => Some((-1.0 / (k - 1) as f64).acos()),
        _ => None,
    }
}

/// `k` cluster directions on the unit sphere with pairwise angle at least
/// `separation`, `n` samples (balanced, shuffled) each equal to its
/// direction plus `N(0, noise²)` per coordinate.
///
/// When `k ≤ dim + 1` the directions are a randomly rotated regular simplex;
/// otherwise they are drawn at random and rejected until the bound holds.
pub fn gen_sphere_mixture(
    k: usize,
    n: usize,
    dim: usize,
    separation: f64,
    noise: f64,
    rng: &mut SeededRng,
) -> Result<Dataset> {
    if k == 0 || dim == 0 || n < k {
        return Err(IdfdError::DomainError(format!(
            "need k >= 1, dim >= 1 and n >= k, got k={k} n={n} dim={dim}"
        )));
    }
    if !(separation >= 0.0) || !(noise >= 0.0 && noise.is_finite()) {
        return Err(IdfdError::DomainError("separation and noise must be >= 0".into()));
    }
    let infeasible = IdfdError::InfeasibleSeparation { k, dim, separation };
    let directions: Vec<Vec<f64>> = match max_separation(k, dim) {
        Some(best) if separation > best + 1e-12 => return Err(infeasible),
        Some(_) => {
            let rot = random_rotation(dim, rng);
            simplex(k)
                .into_iter()
                .map(|c| {
                    let mut padded = c;
                    if k == 1 {
                        padded.push(1.0);
                    }
                    padded.resize(dim, 0.0);
                    rot.t_matmul(&Matrix::new(dim, 1, padded).expect("finite"))
                        .expect("square rotation")
                        .into_vec()
                })
                .collect()
        }
        None => {
            let min_cos = separation.cos();
            let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(k);
            let mut attempts = 0usize;
            while chosen.len() < k {
                attempts += 1;
                if attempts > 100_000 {
                    return Err(infeasible);
                }
                let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
                let len = norm(&v);
                if len < 1e-9 {
                    continue;
                }
                let v: Vec<f64> = v.into_iter().map(|x| x / len).collect();
                if chosen.iter().all(|c| dot(c, &v) <= min_cos + 1e-12) {
                    chosen.push(v);
                }
            }
            chosen
        }
    };
    let order = shuffled_indices(n, rng);
    let labels: Vec<usize> = order.iter().map(|&i| i % k).collect();
    let mut data = Vec::with_capacity(n * dim);
    for &label in &labels {
        for &c in &directions[label] {
            data.push(if noise > 0.0 { c + noise * rng.normal() } else { c });
        }
    }
    Dataset::new(
        Matrix::new(n, dim, data)?,
        SampleShape::Vector(dim),
        Some(labels),
        format!("sphere-k{k}-n{n}-d{dim}"),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Numeric rows; a header row is skipped, and a last header field named
    /// `label` marks a label column.
    Csv,
    /// Numeric rows whose last column is an integer label.
    CsvLabeled,
    Image,
}

impl DataFormat {
    /// `.idfd`/`.bin` are images, everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("idfd") | Some("bin") => DataFormat::Image,
            _ => DataFormat::Csv,
        }
    }
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset> {
    std::fs::metadata(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let mut ds = match format {
        DataFormat::Csv => load_csv(path, false)?,
        DataFormat::CsvLabeled => load_csv(path, true)?,
        DataFormat::Image => load_image(path)?,
    };
    ds.source = Some(path.to_path_buf());
    Ok(ds)
}

pub fn save_dataset(ds: &Dataset, path: &Path, format: DataFormat) -> Result<()> {
    match format {
        DataFormat::Csv | DataFormat::CsvLabeled => save_csv(ds, path),
        DataFormat::Image => save_image(ds, path),
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string()
}

fn load_csv(path: &Path, labeled: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut has_labels = labeled;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if line == 0 && record.iter().any(|f| f.parse::<f64>().is_err()) {
            has_labels |= record.iter().next_back() == Some("label");
            continue;
        }
        let fields: Vec<&str> = record.iter().collect();
        let (features, label) = if has_labels {
            let (last, rest) = fields
                .split_last()
                .ok_or_else(|| IdfdError::Parse(format!("row {} is empty", line + 1)))?;
            (rest, Some(*last))
        } else {
            (&fields[..], None)
        };
        let values = features
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| IdfdError::Parse(format!("row {}: {f:?} is not a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != values.len() {
                return Err(IdfdError::DimensionMismatch(format!(
                    "row {} has {} features, expected {}",
                    line + 1,
                    values.len(),
                    first.len()
                )));
            }
        }
        if let Some(l) = label {
            labels.push(l.parse().map_err(|_| {
                IdfdError::Parse(format!("row {}: label {l:?} is not a non-negative integer", line + 1))
            })?);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(IdfdError::EmptyInput(format!("{} has no rows", path.display())));
    }
    let p = rows[0].len();
    let samples = Matrix::from_rows(&rows)?;
    Dataset::new(
        samples,
        SampleShape::Vector(p),
        has_labels.then_some(labels),
        dataset_name(path),
    )
}

/// Header `x0,…,x{p−1}[,label]`, then one row per sample. Values use the
/// shortest representation that parses back to the same `f64`.
fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..ds.samples.cols()).map(|j| format!("x{j}")).collect();
    if ds.labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (i, row) in ds.samples.iter_rows().enumerate() {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        if let Some(l) = &ds.labels {
            record.push(l[i].to_string());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn load_image(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < MAGIC.len() || &bytes[..4] != MAGIC {
        return Err(IdfdError::BadMagic(path.to_path_buf()));
    }
    let truncated = |expected: usize, found: usize| IdfdError::TruncatedFile {
        path: path.to_path_buf(),
        expected,
        found,
    };
    if bytes.len() < HEADER_LEN {
        return Err(truncated(HEADER_LEN, bytes.len()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CONTAINER_VERSION {
        return Err(IdfdError::Parse(format!("unsupported container version {version}")));
    }
    let n = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    let h = u16::from_le_bytes([bytes[10], bytes[11]]) as usize;
    let w = u16::from_le_bytes([bytes[12], bytes[13]]) as usize;
    let c = bytes[14] as usize;
    if h == 0 || w == 0 || c == 0 {
        return Err(IdfdError::DimensionMismatch(format!("image dims {h}×{w}×{c}")));
    }
    let per = h * w * c;
    let pixel_end = HEADER_LEN + n * per;
    if bytes.len() < pixel_end {
        return Err(truncated(pixel_end, bytes.len()));
    }
    let rest = bytes.len() - pixel_end;
    let labels = match rest {
        0 => None,
        r if r == n => Some(bytes[pixel_end..].iter().map(|&b| b as usize).collect()),
        r if r < n => return Err(truncated(pixel_end + n, bytes.len())),
        r => {
            return Err(IdfdError::DimensionMismatch(format!(
                "{r} trailing bytes after {n} images"
            )))
        }
    };
    let data = bytes[HEADER_LEN..pixel_end]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    Dataset::new(
        Matrix::new(n, per, data)?,
        SampleShape::Image {
            height: h,
            width: w,
            channels: c,
        },
        labels,
        dataset_name(path),
    )
}

fn save_image(ds: &Dataset, path: &Path) -> Result<()> {
    let SampleShape::Image {
        height,
        width,
        channels,
    } = ds.shape
    else {
        return Err(IdfdError::DimensionMismatch("only image datasets fit the container".into()));
    };
    let fits = |v: usize, max: usize| v <= max;
    if !fits(height, u16::MAX as usize) || !fits(width, u16::MAX as usize) || !fits(channels, 255) || !fits(ds.len(), u32::MAX as usize) {
        return Err(IdfdError::DimensionMismatch("image dimensions overflow the header".into()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + ds.samples.as_slice().len() + ds.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.len() as u32).to_le_bytes());
    out.extend_from_slice(&(height as u16).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.push(channels as u8);
    for &v in ds.samples.as_slice() {
        if !(0.0..=1.0).contains(&v) {
            return Err(IdfdError::DomainError(format!("pixel value {v} outside [0, 1]")));
        }
        out.push((v * 255.0).round() as u8);
    }
    if let Some(labels) = &ds.labels {
        for &l in labels {
            out.push(u8::try_from(l).map_err(|_| IdfdError::DomainError(format!("label {l} exceeds 255")))?);
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::kmeans;
    use crate::metrics::{acc, Partition};
    use std::f64::consts::PI;

    fn fixture(name: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
    }

    #[test]
    fn noiseless_clusters_are_points() {
        let ds = gen_sphere_mixture(3, 30, 5, 0.0, 0.0, &mut SeededRng::new(1)).unwrap();
        let labels = ds.labels.as_ref().unwrap();
        for i in 0..30 {
            for j in 0..30 {
                if labels[i] == labels[j] {
                    assert_eq!(ds.samples.row(i), ds.samples.row(j));
                }
            }
            assert!((norm(ds.samples.row(i)) - 1.0).abs() < 1e-12);
        }
        assert_eq!(ds.k_true(), Some(3));
    }

    #[test]
    fn antipodal_pair_is_separable() {
        let ds = gen_sphere_mixture(2, 40, 2, PI, 0.2, &mut SeededRng::new(2)).unwrap();
        let noiseless = gen_sphere_mixture(2, 4, 2, PI, 0.0, &mut SeededRng::new(2)).unwrap();
        let a = noiseless.samples.row(0);
        let b = noiseless
            .samples
            .iter_rows()
            .find(|r| *r != a)
            .unwrap();
        assert!((dot(a, b) + 1.0).abs() < 1e-12);
        let y = Partition::from_labels(ds.labels.as_ref().unwrap()).unwrap();
        let p = kmeans(&ds.samples, 2, &mut SeededRng::new(0), 10).unwrap().partition;
        assert_eq!(acc(&y, &p).unwrap(), 1.0);
    }

    #[test]
    fn separation_bound_holds_and_is_checked() {
        for &(k, dim, sep) in &[(4, 32, 1.9), (5, 3, 1.5), (12, 3, 0.6)] {
            let ds = gen_sphere_mixture(k, 10 * k, dim, sep, 0.0, &mut SeededRng::new(3)).unwrap();
            let labels = ds.labels.as_ref().unwrap();
            let mut centres = vec![None; k];
            for (i, &l) in labels.iter().enumerate() {
                centres[l] = Some(ds.samples.row(i).to_vec());
            }
            let centres: Vec<Vec<f64>> = centres.into_iter().map(Option::unwrap).collect();
            for a in 0..k {
                for b in a + 1..k {
                    let angle = dot(&centres[a], &centres[b]).clamp(-1.0, 1.0).acos();
                    assert!(angle >= sep - 1e-9, "k={k} angle={angle}");
                }
            }
        }
        assert!(matches!(
            gen_sphere_mixture(3, 9, 2, 2.2, 0.0, &mut SeededRng::new(0)),
            Err(IdfdError::InfeasibleSeparation { .. })
        ));
        assert!(matches!(
            gen_sphere_mixture(40, 80, 2, 1.0, 0.0, &mut SeededRng::new(0)),
            Err(IdfdError::InfeasibleSeparation { .. })
        ));
    }

    #[test]
    fn generation_is_seeded() {
        let a = gen_sphere_mixture(4, 50, 8, 1.0, 0.3, &mut SeededRng::new(7)).unwrap();
        let b = gen_sphere_mixture(4, 50, 8, 1.0, 0.3, &mut SeededRng::new(7)).unwrap();
        let c = gen_sphere_mixture(4, 50, 8, 1.0, 0.3, &mut SeededRng::new(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.samples, c.samples);
        let labels = a.labels.unwrap();
        assert!((0..4).all(|l| labels.iter().filter(|&&x| x == l).count() == 12 || labels.iter().filter(|&&x| x == l).count() == 13));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = gen_sphere_mixture(3, 20, 4, 1.0, 0.37, &mut SeededRng::new(4)).unwrap();
        let path = dir.path().join("d.csv");
        save_dataset(&ds, &path, DataFormat::Csv).unwrap();
        let back = load_dataset(&path, DataFormat::Csv).unwrap();
        assert_eq!(back.samples, ds.samples);
        assert_eq!(back.labels, ds.labels);

        let unlabeled = Dataset { labels: None, ..ds };
        save_dataset(&unlabeled, &path, DataFormat::Csv).unwrap();
        assert_eq!(load_dataset(&path, DataFormat::Csv).unwrap().labels, None);
    }

    #[test]
    fn labeled_fixture() {
        let ds = load_dataset(&fixture("labeled.csv"), DataFormat::CsvLabeled).unwrap();
        assert_eq!(ds.len(), 6);
        assert_eq!(ds.shape, SampleShape::Vector(3));
        assert_eq!(ds.labels, Some(vec![0, 0, 1, 1, 2, 2]));
        assert_eq!(ds.k_true(), Some(3));
        assert_eq!(ds.samples.row(2), &[0.0, 1.0, 0.1]);
        assert_eq!(ds.name, "labeled");
    }

    fn image_dataset(labels: bool) -> Dataset {
        let shape = SampleShape::Image {
            height: 2,
            width: 3,
            channels: 2,
        };
        let samples = Matrix::from_fn(4, 12, |i, j| ((i * 37 + j * 11) % 256) as f64 / 255.0);
        Dataset::new(samples, shape, labels.then(|| vec![0, 1, 1, 3]), "img").unwrap()
    }

    #[test]
    fn image_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.idfd");
        for labelled in [true, false] {
            let ds = image_dataset(labelled);
            save_dataset(&ds, &path, DataFormat::Image).unwrap();
            let back = load_dataset(&path, DataFormat::from_path(&path)).unwrap();
            assert_eq!(back.samples, ds.samples);
            assert_eq!(back.labels, ds.labels);
            assert_eq!(back.shape, ds.shape);
        }
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_dataset(&path, DataFormat::Image), Err(IdfdError::TruncatedFile { .. })));
        std::fs::write(&path, &bytes[..10]).unwrap();
        assert!(matches!(load_dataset(&path, DataFormat::Image), Err(IdfdError::TruncatedFile { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(matches!(load_dataset(&path, DataFormat::Image), Err(IdfdError::BadMagic(_))));
        let mut extra = bytes.clone();
        extra.extend([0u8; 9]);
        std::fs::write(&path, &extra).unwrap();
        assert!(matches!(load_dataset(&path, DataFormat::Image), Err(IdfdError::DimensionMismatch(_))));
    }

    #[test]
    fn ragged_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "1,2,3\n4,5\n").unwrap();
        assert!(load_dataset(&path, DataFormat::Csv).is_err());
    }
}
