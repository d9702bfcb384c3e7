//! Inference snapshot: observation normalizer plus actor.
//!
//! Layout (little-endian): magic `DCLOTHPL`, u32 version, u32 feature count
//! `dim`, f64 clip, f64 reserved (zero), `dim` f64 means, `dim` f64 stds,
//! then an actor parameter checkpoint.

use std::io::{Read, Write};

use super::{AgentNets, Normalizer};
use crate::error::{Error, Result};
use crate::numerics::{read_params, write_params, ParamSet};

const POLICY_MAGIC: &[u8; 8] = b"DCLOTHPL";
const POLICY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub clip: f64,
    pub actor: ParamSet,
}

impl Policy {
    pub fn from_nets(nets: &AgentNets) -> Self {
        Self::from_parts(&nets.normalizer, &nets.actor)
    }

    pub fn from_parts(normalizer: &Normalizer, actor: &ParamSet) -> Self {
        Self {
            mean: normalizer.mean().to_vec(),
            std: normalizer.std().to_vec(),
            clip: normalizer.clip,
            actor: actor.clone(),
        }
    }

    /// Noise-free action, clipped to `[-1, 1]`.
    pub fn act(&self, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.mean.len() {
            return Err(Error::Shape(format!(
                "observation has {} reals, policy expects {}",
                obs.len(),
                self.mean.len()
            )));
        }
        let x: Vec<f64> = obs
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| ((v - m) / s).clamp(-self.clip, self.clip))
            .collect();
        let (a, _) = self.actor.forward(&x)?;
        Ok(a.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect())
    }
}

pub fn write_policy<W: Write>(mut out: W, policy: &Policy) -> Result<()> {
    out.write_all(POLICY_MAGIC)?;
    out.write_all(&POLICY_VERSION.to_le_bytes())?;
    out.write_all(&(policy.mean.len() as u32).to_le_bytes())?;
    out.write_all(&policy.clip.to_le_bytes())?;
    out.write_all(&0f64.to_le_bytes())?;
    for v in policy.mean.iter().chain(&policy.std) {
        out.write_all(&v.to_le_bytes())?;
    }
    write_params(out, &policy.actor)
}

pub fn read_policy<R: Read>(mut input: R) -> Result<Policy> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != POLICY_MAGIC {
        return Err(Error::Format("not a policy file".into()));
    }
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != POLICY_VERSION {
        return Err(Error::Format(format!("unsupported policy version {version}")));
    }
    input.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    let mut f = |n: usize| -> Result<Vec<f64>> {
        let mut buf = vec![0u8; 8 * n];
        input.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let head = f(2)?;
    let mean = f(dim)?;
    let std = f(dim)?;
    let actor = read_params(input)?;
    if actor.input_dim() != dim {
        return Err(Error::Format("normalizer and actor widths differ".into()));
    }
    if std.iter().any(|s| !(*s > 0.0)) || mean.iter().any(|m| !m.is_finite()) {
        return Err(Error::Format("invalid normalizer statistics".into()));
    }
    Ok(Policy {
        mean,
        std,
        clip: head[0],
        actor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_and_act_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut nets = AgentNets::new(4, 2, &[8], &mut rng).unwrap();
        for i in 0..20 {
            let f = i as f64;
            nets.normalizer.update(&[f, 2.0 * f, -f, 1.0]).unwrap();
        }
        nets.normalizer.recompute();
        let p = Policy::from_nets(&nets);
        let mut buf = Vec::new();
        write_policy(&mut buf, &p).unwrap();
        let back = read_policy(buf.as_slice()).unwrap();
        assert_eq!(back, p);
        let obs = [3.0, 1.0, -2.0, 1.0];
        let direct = super::super::select_action(&nets, &obs, 0.0, &mut rng, false).unwrap();
        assert_eq!(back.act(&obs).unwrap(), direct);
    }

    #[test]
    fn rejects_other_files() {
        assert!(matches!(read_policy(&b"DCLOTHNN...."[..]), Err(Error::Format(_))));
    }
}
