//! Text checkpoint of a training state.
//!
//! ```text
//! idfd-checkpoint 1
//! epoch <completed epochs>
//! rng <seed> <stream> <word position>
//! params <layer count>
//! layer <in> <out>
//! <in·out weight words, row-major>
//! <out bias words>
//! velocity <layer count>
//! ...same layout as params...
//! bank <rows> <dim> <momentum word>
//! <one line of dim words per row>
//! ```
//!
//! Every real is written as the 16-digit hex of its IEEE-754 bit pattern, so
//! loading reproduces the saved state exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::bank::MemoryBank;
use crate::encoder::{EncoderParams, Layer};
use crate::error::{IdfdError, Result};
use crate::linalg::Matrix;
use crate::rng::{RngState, SeededRng};
use crate::train::TrainState;

const HEADER: &str = "idfd-checkpoint";
const VERSION: u32 = 1;

fn push_words(out: &mut String, values: &[f64]) {
    let words: Vec<String> = values.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
    out.push_str(&words.join(" "));
    out.push('\n');
}

fn push_params(out: &mut String, tag: &str, params: &EncoderParams) {
    let _ = writeln!(out, "{tag} {}", params.layers().len());
    for layer in params.layers() {
        let _ = writeln!(out, "layer {} {}", layer.input_dim(), layer.output_dim());
        push_words(out, layer.weight.as_slice());
        push_words(out, &layer.bias);
    }
}

pub fn to_text(state: &TrainState) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER} {VERSION}");
    let _ = writeln!(out, "epoch {}", state.epoch);
    let rng = state.rng.state();
    let _ = writeln!(out, "rng {} {} {}", rng.seed, rng.stream, rng.word_pos);
    push_params(&mut out, "params", &state.params);
    push_params(&mut out, "velocity", &state.velocity);
    let bank = &state.bank;
    let _ = writeln!(
        out,
        "bank {} {} {:016x}",
        bank.len(),
        bank.dim(),
        bank.momentum().to_bits()
    );
    for row in bank.rows().iter_rows() {
        push_words(&mut out, row);
    }
    out
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn line(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| IdfdError::Parse("checkpoint ends early".into()))
    }

    /// Next line, which must start with `tag`; returns the remaining fields.
    fn tagged(&mut self, tag: &str) -> Result<Vec<&'a str>> {
        let (no, line) = self.line()?;
        let mut fields = line.split_whitespace();
        if fields.next() != Some(tag) {
            return Err(IdfdError::Parse(format!("line {no}: expected {tag:?}")));
        }
        Ok(fields.collect())
    }

    fn words(&mut self, expected: usize) -> Result<Vec<f64>> {
        let (no, line) = self.line()?;
        let values = line
            .split_whitespace()
            .map(|w| {
                u64::from_str_radix(w, 16)
                    .map(f64::from_bits)
                    .map_err(|_| IdfdError::Parse(format!("line {no}: bad word {w:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != expected {
            return Err(IdfdError::Parse(format!(
                "line {no}: expected {expected} values, found {}",
                values.len()
            )));
        }
        Ok(values)
    }

    fn params(&mut self, tag: &str) -> Result<EncoderParams> {
        let count: usize = parse_field(&self.tagged(tag)?, 0)?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let dims = self.tagged("layer")?;
            let (input, output): (usize, usize) = (parse_field(&dims, 0)?, parse_field(&dims, 1)?);
            let weight = Matrix::new(input, output, self.words(input * output)?)?;
            let bias = self.words(output)?;
            layers.push(Layer { weight, bias });
        }
        EncoderParams::new(layers)
    }
}

fn parse_field<T: std::str::FromStr>(fields: &[&str], i: usize) -> Result<T> {
    fields
        .get(i)
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| IdfdError::Parse(format!("missing or invalid field {i} in {fields:?}")))
}

pub fn from_text(text: &str) -> Result<TrainState> {
    let mut r = Reader {
        lines: text.lines().enumerate(),
    };
    let version: u32 = parse_field(&r.tagged(HEADER)?, 0)?;
    if version != VERSION {
        return Err(IdfdError::Parse(format!("unsupported checkpoint version {version}")));
    }
    let epoch = parse_field(&r.tagged("epoch")?, 0)?;
    let rng = r.tagged("rng")?;
    let rng = SeededRng::from_state(RngState {
        seed: parse_field(&rng, 0)?,
        stream: parse_field(&rng, 1)?,
        word_pos: parse_field(&rng, 2)?,
    });
    let params = r.params("params")?;
    let velocity = r.params("velocity")?;
    if velocity.dims() != params.dims() {
        return Err(IdfdError::Parse("velocity shape differs from params".into()));
    }
    let bank = r.tagged("bank")?;
    let (n, d): (usize, usize) = (parse_field(&bank, 0)?, parse_field(&bank, 1)?);
    let momentum = bank
        .get(2)
        .and_then(|w| u64::from_str_radix(w, 16).ok())
        .map(f64::from_bits)
        .ok_or_else(|| IdfdError::Parse("bad bank momentum".into()))?;
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        data.extend(r.words(d)?);
    }
    let bank = MemoryBank::from_rows(Matrix::new(n, d, data)?, momentum)?;
    Ok(TrainState {
        params,
        velocity,
        bank,
        rng,
        epoch,
    })
}

pub fn save(state: &TrainState, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(state))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<TrainState> {
    from_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::{AugmentationSpec, SampleShape};
    use crate::losses::LossMode;
    use crate::train::{resume, train, TrainConfig};

    fn cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 6,
            epochs: 4,
            hidden: vec![7],
            dim: 3,
            ..TrainConfig::new(21)
        }
    }

    fn data() -> Matrix {
        let mut rng = SeededRng::new(5);
        Matrix::from_fn(15, 4, |_, _| rng.normal())
    }

    #[test]
    fn round_trip_is_exact() {
        let out = train(&data(), SampleShape::Vector(4), &cfg(), &AugmentationSpec::none(), LossMode::Idfd).unwrap();
        let text = to_text(&out.state);
        let back = from_text(&text).unwrap();
        assert_eq!(back, out.state);
        assert_eq!(to_text(&back), text);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.txt");
        save(&out.state, &path).unwrap();
        assert_eq!(load(&path).unwrap(), out.state);
    }

    #[test]
    fn resumed_run_matches_uninterrupted_run() {
        let x = data();
        let spec: AugmentationSpec = "noise:0.1".parse().unwrap();
        let full = train(&x, SampleShape::Vector(4), &cfg(), &spec, LossMode::Idfd).unwrap();
        let half_cfg = TrainConfig { epochs: 2, ..cfg() };
        let half = train(&x, SampleShape::Vector(4), &half_cfg, &spec, LossMode::Idfd).unwrap();
        let restored = from_text(&to_text(&half.state)).unwrap();
        let rest = resume(&x, SampleShape::Vector(4), &cfg(), &spec, LossMode::Idfd, restored, &mut |_, _| Ok(())).unwrap();
        assert_eq!(rest.state, full.state);
        assert_eq!(rest.history, full.history[2..]);
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(from_text("").is_err());
        assert!(from_text("idfd-checkpoint 9\n").is_err());
        let out = train(&data(), SampleShape::Vector(4), &TrainConfig { epochs: 1, ..cfg() }, &AugmentationSpec::none(), LossMode::Id).unwrap();
        let text = to_text(&out.state);
        let truncated = &text[..text.len() / 2];
        assert!(matches!(from_text(truncated), Err(IdfdError::Parse(_))));
    }
}
