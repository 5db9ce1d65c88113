use anyhow::{bail, Context, Result};
use orthocp::io::load_tensor;
use orthocp::synth::{gaussian_tensor, structured_tensor, GroundTruth, StructuredSpec};
use orthocp::DenseTensor;
use serde::Serialize;

use crate::args::{Generator, SourceArgs};

#[derive(Debug, Clone, Serialize)]
pub struct SourceRecord {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub shape: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub incoherence: Option<f64>,
}

pub struct Loaded {
    pub tensor: DenseTensor,
    pub truth: Option<GroundTruth>,
    pub record: SourceRecord,
}

/// Reads or generates the input tensor. Structured instances need the rank
/// and the number of orthonormal factors up front.
pub fn load(src: &SourceArgs, rank: usize, t: Option<usize>, seed: u64) -> Result<Loaded> {
    match (&src.input, src.gen) {
        (Some(path), None) => {
            let tensor = load_tensor(path).with_context(|| format!("reading {}", path.display()))?;
            let record = SourceRecord {
                kind: "file",
                path: Some(path.display().to_string()),
                shape: tensor.shape().to_vec(),
                beta: None,
                exact: None,
                incoherence: None,
            };
            Ok(Loaded {
                tensor,
                truth: None,
                record,
            })
        }
        (None, Some(gen)) => {
            let shape = src.shape.clone().context("--shape is required with --gen")?;
            match gen {
                Generator::Gaussian => {
                    let tensor = gaussian_tensor(&shape, seed)?;
                    Ok(Loaded {
                        tensor,
                        truth: None,
                        record: SourceRecord {
                            kind: "gaussian",
                            path: None,
                            shape,
                            beta: None,
                            exact: None,
                            incoherence: None,
                        },
                    })
                }
                Generator::Structured => {
                    let spec = structured_spec(
                        &shape,
                        rank,
                        t.unwrap_or(shape.len()),
                        src.beta,
                        seed,
                        src.exact,
                        src.incoherence,
                    );
                    let (tensor, truth) = structured_tensor(&spec)?;
                    Ok(Loaded {
                        tensor,
                        truth: Some(truth),
                        record: SourceRecord {
                            kind: "structured",
                            path: None,
                            shape,
                            beta: Some(spec.beta),
                            exact: Some(spec.exact_mode),
                            incoherence: spec.incoherence,
                        },
                    })
                }
            }
        }
        (None, None) => bail!("a tensor source is required: --input FILE or --gen {{gaussian|structured}}"),
        (Some(_), Some(_)) => bail!("--input and --gen are mutually exclusive"),
    }
}

pub fn structured_spec(
    shape: &[usize],
    rank: usize,
    t: usize,
    beta: f64,
    seed: u64,
    exact: bool,
    incoherence: Option<f64>,
) -> StructuredSpec {
    let mut spec = StructuredSpec::new(shape, rank, t, beta, seed);
    if exact {
        spec = spec.exact();
    }
    if let Some(delta) = incoherence {
        spec = spec.with_incoherence(delta);
    }
    spec
}
