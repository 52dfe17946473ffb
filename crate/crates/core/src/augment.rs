//! Generic stochastic data augmentation for vector and image samples.
//!
//! Images are stored channel-last (`h × w × c`, row-major) with intensities
//! in `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use crate::error::{IdfdError, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleShape {
    Vector(usize),
    Image {
        height: usize,
        width: usize,
        channels: usize,
    },
}

impl SampleShape {
    pub fn len(self) -> usize {
        match self {
            SampleShape::Vector(p) => p,
            SampleShape::Image {
                height,
                width,
                channels,
            } => height * width * channels,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    /// Mirror the image left-right with probability `p`.
    HorizontalFlip { p: f64 },
    /// Zero-pad by `padding` pixels, then crop a random window of the
    /// original size.
    PadCrop { padding: usize },
    /// Multiply intensities by a factor drawn from `[1 − a, 1 + a]`.
    Jitter { amplitude: f64 },
    /// Replace every channel by the channel mean with probability `p`.
    Grayscale { p: f64 },
    /// Add independent `N(0, σ²)` noise to every entry.
    GaussianNoise { sigma: f64 },
}

impl Transform {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Transform::HorizontalFlip { p } | Transform::Grayscale { p } => (0.0..=1.0).contains(&p),
            Transform::PadCrop { .. } => true,
            Transform::Jitter { amplitude } => (0.0..1.0).contains(&amplitude),
            Transform::GaussianNoise { sigma } => sigma >= 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(IdfdError::Config(format!("transform parameter out of range: {self}")))
        }
    }

    fn needs_image(&self) -> bool {
        matches!(
            self,
            Transform::HorizontalFlip { .. } | Transform::PadCrop { .. } | Transform::Grayscale { .. }
        )
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Transform::HorizontalFlip { p } => write!(f, "flip:{p}"),
            Transform::PadCrop { padding } => write!(f, "crop:{padding}"),
            Transform::Jitter { amplitude } => write!(f, "jitter:{amplitude}"),
            Transform::Grayscale { p } => write!(f, "gray:{p}"),
            Transform::GaussianNoise { sigma } => write!(f, "noise:{sigma}"),
        }
    }
}

impl FromStr for Transform {
    type Err = IdfdError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, value) = s
            .split_once(':')
            .ok_or_else(|| IdfdError::Config(format!("transform {s:?} is not name:value")))?;
        let bad = || IdfdError::Config(format!("bad value in transform {s:?}"));
        let t = match name.trim() {
            "flip" => Transform::HorizontalFlip {
                p: value.trim().parse().map_err(|_| bad())?,
            },
            "crop" => Transform::PadCrop {
                padding: value.trim().parse().map_err(|_| bad())?,
            },
            "jitter" => Transform::Jitter {
                amplitude: value.trim().parse().map_err(|_| bad())?,
            },
            "gray" => Transform::Grayscale {
                p: value.trim().parse().map_err(|_| bad())?,
            },
            "noise" => Transform::GaussianNoise {
                sigma: value.trim().parse().map_err(|_| bad())?,
            },
            other => return Err(IdfdError::Config(format!("unknown transform {other:?}"))),
        };
        t.validate()?;
        Ok(t)
    }
}

/// Ordered list of transforms applied to every training view.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AugmentationSpec {
    pub transforms: Vec<Transform>,
}

impl AugmentationSpec {
    pub fn new(transforms: Vec<Transform>) -> Result<Self> {
        transforms.iter().try_for_each(Transform::validate)?;
        Ok(Self { transforms })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        self.transforms.is_empty()
    }
}

impl fmt::Display for AugmentationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.transforms.is_empty() {
            return f.write_str("none");
        }
        let parts: Vec<String> = self.transforms.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for AugmentationSpec {
    type Err = IdfdError;

    /// Comma-separated `name:value` list, or `none`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Self::none());
        }
        let transforms = s.split(',').map(str::parse).collect::<Result<Vec<_>>>()?;
        Self::new(transforms)
    }
}

/// Applies `spec` to one sample.
pub fn augment(
    sample: &[f64],
    shape: SampleShape,
    spec: &AugmentationSpec,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    if sample.len() != shape.len() {
        return Err(IdfdError::ShapeMismatch(format!(
            "sample has {} values, shape {:?} needs {}",
            sample.len(),
            shape,
            shape.len()
        )));
    }
    let mut out = sample.to_vec();
    for t in &spec.transforms {
        if t.needs_image() && matches!(shape, SampleShape::Vector(_)) {
            return Err(IdfdError::ShapeMismatch(format!(
                "transform {t} needs image samples"
            )));
        }
        match (*t, shape) {
            (Transform::HorizontalFlip { p }, SampleShape::Image { height, width, channels }) => {
                if rng.bernoulli(p) {
                    flip(&mut out, height, width, channels);
                }
            }
            (Transform::PadCrop { padding }, SampleShape::Image { height, width, channels }) => {
                if padding > 0 {
                    let dy = rng.below_inclusive(2 * padding) as isize - padding as isize;
                    let dx = rng.below_inclusive(2 * padding) as isize - padding as isize;
                    out = shift(&out, height, width, channels, dy, dx);
                }
            }
            (Transform::Grayscale { p }, SampleShape::Image { channels, .. }) => {
                if rng.bernoulli(p) {
                    for px in out.chunks_exact_mut(channels) {
                        let mean = px.iter().sum::<f64>() / channels as f64;
                        px.iter_mut().for_each(|v| *v = mean);
                    }
                }
            }
            (Transform::Jitter { amplitude }, _) => {
                if amplitude > 0.0 {
                    let factor = 1.0 + amplitude * (2.0 * rng.uniform() - 1.0);
                    let clamp = matches!(shape, SampleShape::Image { .. });
                    for v in &mut out {
                        *v *= factor;
                        if clamp {
                            *v = v.clamp(0.0, 1.0);
                        }
                    }
                }
            }
            (Transform::GaussianNoise { sigma }, _) => {
                if sigma > 0.0 {
                    for v in &mut out {
                        *v += sigma * rng.normal();
                    }
                }
            }
            _ => unreachable!("image transforms on vectors are rejected above"),
        }
    }
    Ok(out)
}

fn flip(img: &mut [f64], height: usize, width: usize, channels: usize) {
    for y in 0..height {
        for x in 0..width / 2 {
            let a = (y * width + x) * channels;
            let b = (y * width + (width - 1 - x)) * channels;
            for c in 0..channels {
                img.swap(a + c, b + c);
            }
        }
    }
}

/// Window of the zero-padded image offset by `(dy, dx)`.
fn shift(img: &[f64], height: usize, width: usize, channels: usize, dy: isize, dx: isize) -> Vec<f64> {
    let mut out = vec![0.0; img.len()];
    for y in 0..height {
        let sy = y as isize + dy;
        if sy < 0 || sy >= height as isize {
            continue;
        }
        for x in 0..width {
            let sx = x as isize + dx;
            if sx < 0 || sx >= width as isize {
                continue;
            }
            let dst = (y * width + x) * channels;
            let src = (sy as usize * width + sx as usize) * channels;
            out[dst..dst + channels].copy_from_slice(&img[src..src + channels]);
        }
    }
    out
}
