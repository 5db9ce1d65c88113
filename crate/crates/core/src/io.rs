//! Tensor files and JSON records.
//!
//! The binary `OTNS` layout is the magic bytes `OTNS`, the order as a
//! little-endian `u32`, one little-endian `u64` per mode size, and then the
//! entries as little-endian `f64` in column-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::factors::FactorSet;
use crate::synth::GroundTruth;
use crate::tensor::{DenseMatrix, DenseTensor, MAX_ORDER};

pub const MAGIC: &[u8; 4] = b"OTNS";

pub fn write_otns<W: Write>(mut w: W, a: &DenseTensor) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(a.order() as u32).to_le_bytes())?;
    for &n in a.shape() {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for x in a.data() {
        w.write_all(&x.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_otns<R: Read>(mut r: R) -> Result<DenseTensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("file too short for header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)
        .map_err(|_| Error::Format("missing order".into()))?;
    let order = u32::from_le_bytes(word) as usize;
    if order > MAX_ORDER {
        return Err(Error::Format(format!("order {order} exceeds {MAX_ORDER}")));
    }
    let mut shape = Vec::with_capacity(order);
    let mut dword = [0u8; 8];
    for _ in 0..order {
        r.read_exact(&mut dword)
            .map_err(|_| Error::Format("truncated shape".into()))?;
        let n = u64::from_le_bytes(dword);
        shape.push(usize::try_from(n).map_err(|_| Error::Format(format!("mode size {n} too large")))?);
    }
    let len = shape
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| Error::Format("shape product overflows".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(Error::DataLength {
            expected: len,
            found: bytes.len() / 8,
        });
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    DenseTensor::new(shape, data)
}

pub fn save_otns(path: &Path, a: &DenseTensor) -> Result<()> {
    write_otns(BufWriter::new(File::create(path)?), a)
}

pub fn load_otns(path: &Path) -> Result<DenseTensor> {
    read_otns(BufReader::new(File::open(path)?))
}

/// Parses nested arrays; the outermost level indexes mode 0.
pub fn tensor_from_json(value: &Value) -> Result<DenseTensor> {
    let mut shape = Vec::new();
    let mut probe = value;
    while let Value::Array(items) = probe {
        if items.is_empty() {
            return Err(Error::Format("empty array in tensor".into()));
        }
        shape.push(items.len());
        probe = &items[0];
    }
    if shape.is_empty() {
        return Err(Error::Format("tensor must be a nested array".into()));
    }
    if shape.len() > MAX_ORDER {
        return Err(Error::InvalidShape(shape));
    }
    let mut flat = Vec::new();
    collect_row_major(value, &shape, 0, &mut flat)?;
    DenseTensor::from_fn(&shape, |idx| {
        let mut k = 0;
        for (i, n) in idx.iter().zip(&shape) {
            k = k * n + i;
        }
        flat[k]
    })
}

fn collect_row_major(value: &Value, shape: &[usize], depth: usize, out: &mut Vec<f64>) -> Result<()> {
    match value {
        Value::Array(items) => {
            if depth >= shape.len() || items.len() != shape[depth] {
                return Err(Error::Format(format!("ragged array at depth {depth}")));
            }
            items
                .iter()
                .try_for_each(|v| collect_row_major(v, shape, depth + 1, out))
        }
        Value::Number(n) if depth == shape.len() => {
            out.push(n.as_f64().ok_or_else(|| Error::Format(format!("bad number {n}")))?);
            Ok(())
        }
        other => Err(Error::Format(format!("unexpected value {other} at depth {depth}"))),
    }
}

pub fn tensor_to_json(a: &DenseTensor) -> Value {
    fn build(a: &DenseTensor, idx: &mut Vec<usize>) -> Value {
        let depth = idx.len();
        if depth == a.order() {
            return serde_json::json!(a.get(idx));
        }
        let items = (0..a.shape()[depth])
            .map(|i| {
                idx.push(i);
                let v = build(a, idx);
                idx.pop();
                v
            })
            .collect();
        Value::Array(items)
    }
    build(a, &mut Vec::new())
}

pub fn load_tensor_json(path: &Path) -> Result<DenseTensor> {
    let value: Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    tensor_from_json(&value)
}

/// Loads by extension: `.json` as nested arrays, anything else as `OTNS`.
pub fn load_tensor(path: &Path) -> Result<DenseTensor> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => load_tensor_json(path),
        _ => load_otns(path),
    }
}

/// Serializable form of a [`FactorSet`]; factors are stored column by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRecord {
    pub shape: Vec<usize>,
    pub rank: usize,
    pub num_orthonormal: usize,
    pub sigmas: Vec<f64>,
    pub factors: Vec<Vec<Vec<f64>>>,
}

impl From<&FactorSet> for FactorRecord {
    fn from(fs: &FactorSet) -> Self {
        Self {
            shape: fs.shape(),
            rank: fs.rank(),
            num_orthonormal: fs.num_orthonormal(),
            sigmas: fs.sigmas().to_vec(),
            factors: fs
                .factors()
                .iter()
                .map(|f| f.column_iter().map(|c| c.iter().copied().collect()).collect())
                .collect(),
        }
    }
}

impl TryFrom<&FactorRecord> for FactorSet {
    type Error = Error;

    fn try_from(rec: &FactorRecord) -> Result<Self> {
        if rec.factors.len() != rec.shape.len() {
            return Err(Error::DimensionMismatch {
                expected: rec.shape.len(),
                found: rec.factors.len(),
            });
        }
        let mut factors = Vec::with_capacity(rec.shape.len());
        for (cols, &n) in rec.factors.iter().zip(&rec.shape) {
            if cols.len() != rec.rank || cols.iter().any(|c| c.len() != n) {
                return Err(Error::Format("factor columns do not match shape and rank".into()));
            }
            let flat: Vec<f64> = cols.iter().flatten().copied().collect();
            factors.push(DenseMatrix::from_column_slice(n, rec.rank, &flat));
        }
        FactorSet::new(factors, rec.sigmas.clone(), rec.num_orthonormal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    #[serde(flatten)]
    pub factors: FactorRecord,
    pub noise_level: f64,
    pub incoherence: Option<f64>,
    pub exact_mode: bool,
}

impl From<&GroundTruth> for GroundTruthRecord {
    fn from(g: &GroundTruth) -> Self {
        Self {
            factors: FactorRecord::from(&g.factors),
            noise_level: g.noise_level,
            incoherence: g.incoherence,
            exact_mode: g.exact_mode,
        }
    }
}

impl TryFrom<&GroundTruthRecord> for GroundTruth {
    type Error = Error;

    fn try_from(rec: &GroundTruthRecord) -> Result<Self> {
        Ok(Self {
            factors: FactorSet::try_from(&rec.factors)?,
            noise_level: rec.noise_level,
            incoherence: rec.incoherence,
            exact_mode: rec.exact_mode,
        })
    }
}

pub fn save_ground_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &GroundTruthRecord::from(truth))?;
    w.flush()?;
    Ok(())
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    let rec: GroundTruthRecord = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    GroundTruth::try_from(&rec)
}
