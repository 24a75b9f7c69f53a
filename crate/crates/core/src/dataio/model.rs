//! Model file: quantizer, classifier and the SOM training config.
//!
//! ```text
//! "SAMM" | version u32 | header_len u32 | header | som weights | omega | crc32
//!
//! header: mode u8 (0 binary, 1 integer) | decay u8 (0 linear, 1 exponential)
//!         | k u32 | n u32 | subdim u32 | grid_rows u32 | grid_cols u32
//!         | epochs u32 | alpha f64 | theta f64 | seed u64
//!         | classes u32 | samples_per_class u64 x classes
//! som weights: k blocks of n x subdim f32, neuron-major
//! omega: binary  -> classes x ceil(k*n/64) u64 words, column c at bit c%64
//!        integer -> classes x k*n u32 counters
//! crc32: IEEE CRC-32 of every preceding byte
//! ```
//!
//! All integers and floats little-endian.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, FormatKind, Result};
use crate::pq::ProductQuantizer;
use crate::sam::{AssociativeClassifier, Mode};
use crate::som::{Decay, GridTopology, Som, SomTrainConfig};

pub const MODEL_MAGIC: [u8; 4] = *b"SAMM";
pub const MODEL_VERSION: u32 = 1;

/// A trained quantizer and classifier, plus the config the quantizer was
/// trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: SomTrainConfig,
    pq: ProductQuantizer,
    clf: AssociativeClassifier,
}

impl Model {
    pub fn new(
        config: SomTrainConfig,
        pq: ProductQuantizer,
        clf: AssociativeClassifier,
    ) -> Result<Self> {
        if pq.k() != clf.k() || pq.n_per_som() != clf.n_per_som() {
            return Err(Error::Shape(format!(
                "quantizer is {}x{}, classifier is {}x{}",
                pq.k(),
                pq.n_per_som(),
                clf.k(),
                clf.n_per_som()
            )));
        }
        let grid = *pq.soms()[0].grid();
        if pq.soms().iter().any(|s| *s.grid() != grid) {
            return Err(Error::Shape("soms use different grids".into()));
        }
        Ok(Model { config, pq, clf })
    }

    pub fn config(&self) -> &SomTrainConfig {
        &self.config
    }

    pub fn quantizer(&self) -> &ProductQuantizer {
        &self.pq
    }

    pub fn classifier(&self) -> &AssociativeClassifier {
        &self.clf
    }

    pub fn classifier_mut(&mut self) -> &mut AssociativeClassifier {
        &mut self.clf
    }

    pub fn into_parts(self) -> (SomTrainConfig, ProductQuantizer, AssociativeClassifier) {
        (self.config, self.pq, self.clf)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v =
        u32::try_from(v).map_err(|_| Error::Contract(format!("{v} does not fit a u32 field")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn save_model<W: Write>(model: &Model, mut out: W) -> Result<()> {
    let (cfg, pq, clf) = (&model.config, &model.pq, &model.clf);
    let grid = pq.soms()[0].grid();

    let mut header = Vec::new();
    header.push(match clf.mode() {
        Mode::Binary => 0,
        Mode::Integer => 1,
    });
    header.push(match cfg.decay {
        Decay::Linear => 0,
        Decay::Exponential => 1,
    });
    for v in [
        pq.k(),
        pq.n_per_som(),
        pq.subdim(),
        grid.rows(),
        grid.cols(),
    ] {
        put_u32(&mut header, v)?;
    }
    put_u32(&mut header, cfg.epochs as usize)?;
    header.extend_from_slice(&cfg.alpha.to_le_bytes());
    header.extend_from_slice(&cfg.theta.to_le_bytes());
    header.extend_from_slice(&cfg.seed.to_le_bytes());
    put_u32(&mut header, clf.num_classes())?;
    for &s in clf.samples_per_class() {
        header.extend_from_slice(&s.to_le_bytes());
    }

    let mut bytes = Vec::new();
    bytes.extend_from_slice(&MODEL_MAGIC);
    bytes.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    put_u32(&mut bytes, header.len())?;
    bytes.extend_from_slice(&header);
    for som in pq.soms() {
        for w in som.weights() {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
    }
    match (clf.bits(), clf.counts()) {
        (Some(words), _) => words
            .iter()
            .for_each(|w| bytes.extend_from_slice(&w.to_le_bytes())),
        (_, Some(counts)) => counts
            .iter()
            .for_each(|c| bytes.extend_from_slice(&c.to_le_bytes())),
        _ => unreachable!("classifier is binary or integer"),
    }
    let crc = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

pub fn save_model_file(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    save_model(model, BufWriter::new(File::create(path)?))
}

pub fn load_model<R: Read>(mut source: R) -> Result<Model> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    parse(&bytes)
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<Model> {
    load_model(File::open(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(FormatKind::Truncated, self.bytes.len() as u64))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn invalid(&self) -> Error {
        Error::format(FormatKind::Invalid, self.pos as u64)
    }
}

fn parse(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 4 || bytes[..4] != MODEL_MAGIC {
        return Err(Error::format(FormatKind::BadMagic, 0));
    }
    if bytes.len() < 16 {
        return Err(Error::format(FormatKind::Truncated, bytes.len() as u64));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != MODEL_VERSION {
        return Err(Error::format(FormatKind::BadVersion(version), 4));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(Error::format(FormatKind::Checksum, body.len() as u64));
    }

    let mut cur = Cursor {
        bytes: body,
        pos: 8,
    };
    let header_len = cur.u32()? as usize;
    let header_end = cur.pos + header_len;
    let mode = match cur.u8()? {
        0 => Mode::Binary,
        1 => Mode::Integer,
        _ => return Err(cur.invalid()),
    };
    let decay = match cur.u8()? {
        0 => Decay::Linear,
        1 => Decay::Exponential,
        _ => return Err(cur.invalid()),
    };
    let k = cur.u32()? as usize;
    let n = cur.u32()? as usize;
    let subdim = cur.u32()? as usize;
    let grid = GridTopology::new(cur.u32()? as usize, cur.u32()? as usize)?;
    if grid.len() != n || k == 0 || subdim == 0 {
        return Err(Error::Shape(format!(
            "header declares k = {k}, n = {n}, subdim = {subdim} on a {}x{} grid",
            grid.rows(),
            grid.cols()
        )));
    }
    let config = SomTrainConfig {
        epochs: cur.u32()?,
        alpha: cur.f64()?,
        theta: cur.f64()?,
        decay,
        seed: cur.u64()?,
    };
    let classes = cur.u32()? as usize;
    let samples_per_class = (0..classes)
        .map(|_| cur.u64())
        .collect::<Result<Vec<_>>>()?;
    if cur.pos != header_end {
        return Err(cur.invalid());
    }

    let mut soms = Vec::with_capacity(k);
    for _ in 0..k {
        let raw = cur.take(n * subdim * 4)?;
        let weights = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        soms.push(Som::from_weights(subdim, grid, weights)?);
    }
    let pq = ProductQuantizer::from_soms(soms)?;

    let clf = match mode {
        Mode::Binary => {
            let words_per_row = (k * n).div_ceil(64);
            let raw = cur.take(classes * words_per_row * 8)?;
            let words = raw
                .chunks_exact(8)
                .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
                .collect();
            AssociativeClassifier::from_bits(k, n, words, samples_per_class)?
        }
        Mode::Integer => {
            let raw = cur.take(classes * k * n * 4)?;
            let counts = raw
                .chunks_exact(4)
                .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            AssociativeClassifier::from_counts(k, n, counts, samples_per_class)?
        }
    };
    if cur.pos != body.len() {
        return Err(cur.invalid());
    }
    Model::new(config, pq, clf)
}
