//! Binary parameter checkpoints.
//!
//! Layout: magic, u32 length + UTF-8 header of `key=value` lines, u64 parameter count,
//! little-endian parameter values.

use std::io::{Read, Write};

use super::real::Real;
use super::{GeneratorConfig, GeneratorState, Normalization, OutputActivation, UpsampleMode};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SDIPCKP1";

fn join(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn header<T: Real>(config: &GeneratorConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("scalar={}\n", T::NAME));
    out.push_str(&format!("depth={}\n", config.depth));
    out.push_str(&format!("channels={}\n", join(&config.channels)));
    out.push_str(&format!("skip_channels={}\n", join(&config.skip_channels)));
    out.push_str(&format!("input_channels={}\n", config.input_channels));
    out.push_str(&format!("output_channels={}\n", config.output_channels));
    let up = match config.upsample {
        UpsampleMode::Bilinear => "bilinear",
        UpsampleMode::Nearest => "nearest",
    };
    out.push_str(&format!("upsample={up}\n"));
    let norm = match config.normalization {
        Normalization::PerLayer => "per_layer",
        Normalization::None => "none",
    };
    out.push_str(&format!("normalization={norm}\n"));
    let act = match config.output_activation {
        OutputActivation::Sigmoid => "sigmoid",
        OutputActivation::None => "none",
    };
    out.push_str(&format!("output_activation={act}\n"));
    out.push_str(&format!("seed={}\n", config.seed));
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(format!("checkpoint: {}", msg.into()))
}

fn parse_list(v: &str) -> Result<Vec<usize>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad(format!("bad integer list {v:?}"))))
        .collect()
}

fn parse_header<T: Real>(text: &str) -> Result<GeneratorConfig> {
    let mut config = GeneratorConfig::default();
    config.precision = T::PRECISION;
    let mut scalar = None;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("bad line {line:?}")))?;
        let int = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("bad value for {k}")));
        match k {
            "scalar" => scalar = Some(v.to_string()),
            "depth" => config.depth = int(v)?,
            "channels" => config.channels = parse_list(v)?,
            "skip_channels" => config.skip_channels = parse_list(v)?,
            "input_channels" => config.input_channels = int(v)?,
            "output_channels" => config.output_channels = int(v)?,
            "upsample" => {
                config.upsample = match v {
                    "bilinear" => UpsampleMode::Bilinear,
                    "nearest" => UpsampleMode::Nearest,
                    _ => return Err(bad(format!("unknown upsample mode {v}"))),
                }
            }
            "normalization" => {
                config.normalization = match v {
                    "per_layer" => Normalization::PerLayer,
                    "none" => Normalization::None,
                    _ => return Err(bad(format!("unknown normalization {v}"))),
                }
            }
            "output_activation" => {
                config.output_activation = match v {
                    "sigmoid" => OutputActivation::Sigmoid,
                    "none" => OutputActivation::None,
                    _ => return Err(bad(format!("unknown output activation {v}"))),
                }
            }
            "seed" => config.seed = v.parse().map_err(|_| bad("bad seed"))?,
            _ => return Err(bad(format!("unknown key {k}"))),
        }
    }
    match scalar.as_deref() {
        Some(s) if s == T::NAME => Ok(config),
        Some(s) => Err(bad(format!("stored as {s}, requested {}", T::NAME))),
        None => Err(bad("missing scalar type")),
    }
}

pub fn write_checkpoint<T: Real, W: Write>(state: &GeneratorState<T>, mut out: W) -> Result<()> {
    let text = header::<T>(state.config());
    out.write_all(MAGIC)?;
    out.write_all(&(text.len() as u32).to_le_bytes())?;
    out.write_all(text.as_bytes())?;
    out.write_all(&(state.theta().len() as u64).to_le_bytes())?;
    out.write_all(&T::to_le_bytes_vec(state.theta()))?;
    Ok(())
}

pub fn read_checkpoint<T: Real, R: Read>(mut input: R) -> Result<GeneratorState<T>> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a generator checkpoint"));
    }
    let mut len = [0u8; 4];
    input.read_exact(&mut len)?;
    let mut text = vec![0u8; u32::from_le_bytes(len) as usize];
    input.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|_| bad("header is not UTF-8"))?;
    let config = parse_header::<T>(&text)?;
    let mut count = [0u8; 8];
    input.read_exact(&mut count)?;
    let count = u64::from_le_bytes(count) as usize;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != count * T::BYTES {
        return Err(bad(format!(
            "expected {} parameter bytes, found {}",
            count * T::BYTES,
            bytes.len()
        )));
    }
    let theta = bytes.chunks_exact(T::BYTES).map(T::from_le_chunk).collect();
    GeneratorState::from_parts(config, theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bitwise() {
        let cfg = GeneratorConfig {
            depth: 3,
            channels: vec![4, 8, 8],
            skip_channels: vec![2, 0, 2],
            upsample: UpsampleMode::Nearest,
            seed: 5,
            ..GeneratorConfig::default()
        };
        let g = GeneratorState::<f32>::init(&cfg).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&g, &mut buf).unwrap();
        let back: GeneratorState<f32> = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn rejects_wrong_scalar_and_truncation() {
        let g = GeneratorState::<f64>::init(&GeneratorConfig {
            depth: 1,
            channels: vec![2],
            skip_channels: vec![1],
            ..GeneratorConfig::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&g, &mut buf).unwrap();
        assert!(read_checkpoint::<f32, _>(buf.as_slice()).is_err());
        buf.pop();
        assert!(read_checkpoint::<f64, _>(buf.as_slice()).is_err());
        assert!(read_checkpoint::<f64, _>(&b"garbage!"[..]).is_err());
    }
}
