//! Binary parameter checkpoints.
//!
//! Layout (all integers and reals little-endian):
//!
//! ```text
//! magic      8 bytes  "DCLOTHNN"
//! version    u32      = 1
//! n_sizes    u32
//! sizes      n_sizes x u32
//! hidden     u8       activation tag (0 identity, 1 relu, 2 tanh)
//! output     u8       activation tag
//! per layer  weights (out x in, row-major) as f64, then bias (out) as f64
//! ```

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::{Activation, Dense, ParamSet};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DCLOTHNN";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_params<W: Write>(mut out: W, params: &ParamSet) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let sizes = params.layer_sizes();
    out.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for &s in sizes {
        out.write_all(&(s as u32).to_le_bytes())?;
    }
    out.write_all(&[params.hidden_activation().tag(), params.output_activation().tag()])?;
    for layer in &params.layers {
        for v in layer.weights.iter().chain(layer.bias.iter()) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    input.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_params<R: Read>(mut input: R) -> Result<ParamSet> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a parameter checkpoint".into()));
    }
    let version = read_u32(&mut input)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n = read_u32(&mut input)? as usize;
    if !(2..=64).contains(&n) {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    let sizes = (0..n)
        .map(|_| read_u32(&mut input).map(|s| s as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut tags = [0u8; 2];
    input.read_exact(&mut tags)?;
    let hidden = Activation::from_tag(tags[0])
        .ok_or_else(|| Error::Format(format!("unknown activation tag {}", tags[0])))?;
    let output = Activation::from_tag(tags[1])
        .ok_or_else(|| Error::Format(format!("unknown activation tag {}", tags[1])))?;
    let mut layers = Vec::with_capacity(n - 1);
    for w in sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let weights = Array2::from_shape_vec((fan_out, fan_in), read_f64s(&mut input, fan_in * fan_out)?)
            .map_err(|e| Error::Format(e.to_string()))?;
        let bias = Array1::from(read_f64s(&mut input, fan_out)?);
        layers.push(Dense { weights, bias });
    }
    let params = ParamSet::from_layers(layers, hidden, output)?;
    if params.layer_sizes() != sizes.as_slice() {
        return Err(Error::Format("layer sizes do not chain".into()));
    }
    if !params.all_finite() {
        return Err(Error::Format("checkpoint contains non-finite parameters".into()));
    }
    Ok(params)
}
