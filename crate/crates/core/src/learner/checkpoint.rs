//! Versioned binary checkpoints.
//!
//! Layout (little endian): magic `LGR2CKPT`, `u32` schema version, env id
//! string, `u32` agent count, then per agent its name, `u64` obs / goal /
//! action dims, `u32` tensor count and each tensor as `u32` rank, `u64`
//! dims and row-major `f64` values (actor, critic 1, critic 2, target 1,
//! target 2), followed by the observation and goal normalizers (`f64`
//! count, `u64` dim, mean, sum of squared deviations). Strings are a `u32`
//! byte length followed by UTF-8.

use std::io::{Read, Write};

use super::normalizer::Normalizer;
use super::sac::SacAgent;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LGR2CKPT";
pub const CHECKPOINT_SCHEMA: u32 = 1;

fn ck(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

struct Out<W: Write>(W);

impl<W: Write> Out<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64s(&mut self, vs: &[f64]) -> Result<()> {
        for v in vs {
            self.0.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
    fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len() as u32)?;
        Ok(self.0.write_all(s.as_bytes())?)
    }
}

struct In<R: Read>(R);

impl<R: Read> In<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0
            .read_exact(&mut b)
            .map_err(|e| ck(format!("truncated checkpoint: {e}")))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        if n > 1 << 16 {
            return Err(ck("string field too long"));
        }
        let mut b = vec![0u8; n];
        self.0
            .read_exact(&mut b)
            .map_err(|e| ck(format!("truncated checkpoint: {e}")))?;
        String::from_utf8(b).map_err(|_| ck("string field is not UTF-8"))
    }
}

fn nets(agent: &SacAgent) -> [&super::Mlp; 5] {
    [
        &agent.actor,
        &agent.critic1,
        &agent.critic2,
        &agent.target1,
        &agent.target2,
    ]
}

pub fn save_checkpoint(w: impl Write, env_id: &str, agents: &[(&str, &SacAgent)]) -> Result<()> {
    let mut o = Out(w);
    o.0.write_all(CHECKPOINT_MAGIC)?;
    o.u32(CHECKPOINT_SCHEMA)?;
    o.str(env_id)?;
    o.u32(agents.len() as u32)?;
    for (name, agent) in agents {
        o.str(name)?;
        o.u64(agent.obs_dim as u64)?;
        o.u64(agent.goal_dim as u64)?;
        o.u64(agent.act_dim() as u64)?;
        let nets = nets(agent);
        let count: usize = nets.iter().map(|n| n.tensors().len()).sum();
        o.u32(count as u32)?;
        for net in nets {
            for (shape, values) in net.shapes().iter().zip(net.tensors()) {
                o.u32(shape.len() as u32)?;
                for d in shape {
                    o.u64(*d as u64)?;
                }
                o.f64s(values)?;
            }
        }
        for norm in [&agent.obs_norm, &agent.goal_norm] {
            o.0.write_all(&norm.count.to_le_bytes())?;
            o.u64(norm.dim() as u64)?;
            o.f64s(&norm.mean)?;
            o.f64s(&norm.m2)?;
        }
    }
    o.0.flush()?;
    Ok(())
}

/// Loads parameters into `agents`, which must match the stored names and
/// shapes. Nothing is modified unless the whole checkpoint validates.
pub fn load_checkpoint(
    r: impl Read,
    env_id: &str,
    agents: &mut [(&str, &mut SacAgent)],
) -> Result<()> {
    let mut i = In(r);
    if &i.bytes::<8>()? != CHECKPOINT_MAGIC {
        return Err(ck("not a checkpoint (bad magic)"));
    }
    let schema = i.u32()?;
    if schema != CHECKPOINT_SCHEMA {
        return Err(ck(format!(
            "schema {schema} is not the supported {CHECKPOINT_SCHEMA}"
        )));
    }
    let env = i.str()?;
    if env != env_id {
        return Err(ck(format!(
            "checkpoint is for env `{env}`, expected `{env_id}`"
        )));
    }
    let n = i.u32()? as usize;
    if n != agents.len() {
        return Err(ck(format!(
            "checkpoint holds {n} agents, expected {}",
            agents.len()
        )));
    }
    let mut staged = Vec::with_capacity(n);
    for (name, agent) in agents.iter() {
        let stored = i.str()?;
        if stored != *name {
            return Err(ck(format!("agent `{stored}` where `{name}` was expected")));
        }
        let dims = [i.u64()?, i.u64()?, i.u64()?];
        let want = [
            agent.obs_dim as u64,
            agent.goal_dim as u64,
            agent.act_dim() as u64,
        ];
        if dims != want {
            return Err(ck(format!(
                "agent `{name}` dims {dims:?}, expected {want:?}"
            )));
        }
        let shapes: Vec<Vec<usize>> = nets(agent).iter().flat_map(|n| n.shapes()).collect();
        let count = i.u32()? as usize;
        if count != shapes.len() {
            return Err(ck(format!(
                "agent `{name}` has {count} tensors, expected {}",
                shapes.len()
            )));
        }
        let mut tensors = Vec::with_capacity(count);
        for shape in &shapes {
            let rank = i.u32()? as usize;
            if rank != shape.len() {
                return Err(ck(format!("tensor rank {rank}, expected {}", shape.len())));
            }
            let stored: Vec<usize> = (0..rank)
                .map(|_| i.u64().map(|d| d as usize))
                .collect::<Result<_>>()?;
            if &stored != shape {
                return Err(ck(format!("tensor shape {stored:?}, expected {shape:?}")));
            }
            tensors.push(i.f64s(shape.iter().product())?);
        }
        let mut norms = Vec::with_capacity(2);
        for norm in [&agent.obs_norm, &agent.goal_norm] {
            let count = i.f64()?;
            let dim = i.u64()? as usize;
            if dim != norm.dim() {
                return Err(ck(format!("normalizer dim {dim}, expected {}", norm.dim())));
            }
            let mut fresh = Normalizer::new(dim);
            fresh.count = count;
            fresh.mean = i.f64s(dim)?;
            fresh.m2 = i.f64s(dim)?;
            norms.push(fresh);
        }
        staged.push((tensors, norms));
    }
    let mut rest = Vec::new();
    if i.0.read_to_end(&mut rest).map_err(|e| ck(e.to_string()))? != 0 {
        return Err(ck("trailing bytes after checkpoint"));
    }
    for ((_, agent), (tensors, mut norms)) in agents.iter_mut().zip(staged) {
        let mut src = tensors.into_iter();
        for net in [
            &mut agent.actor,
            &mut agent.critic1,
            &mut agent.critic2,
            &mut agent.target1,
            &mut agent.target2,
        ] {
            for t in net.tensors_mut() {
                t.copy_from_slice(&src.next().expect("validated count"));
            }
        }
        agent.goal_norm = norms.pop().expect("two normalizers");
        agent.obs_norm = norms.pop().expect("two normalizers");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::{ActionBox, SacConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent(seed: u64, hidden: usize) -> SacAgent {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = SacConfig {
            hidden,
            ..SacConfig::default()
        };
        let mut a = SacAgent::new(
            &cfg,
            4,
            3,
            ActionBox::new(vec![0.0; 2], vec![1.0; 2]),
            &mut rng,
        );
        a.obs_norm.update(&[1.0, 2.0, 3.0, 4.0]);
        a
    }

    #[test]
    fn round_trip() {
        let a = agent(1, 6);
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, "maze", &[("lower", &a)]).unwrap();
        let mut b = agent(2, 6);
        load_checkpoint(buf.as_slice(), "maze", &mut [("lower", &mut b)]).unwrap();
        assert_eq!(a.actor, b.actor);
        assert_eq!(a.target2, b.target2);
        assert_eq!(a.obs_norm, b.obs_norm);
    }

    #[test]
    fn mismatches_are_rejected() {
        let a = agent(1, 6);
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, "maze", &[("lower", &a)]).unwrap();
        let mut wrong_width = agent(2, 8);
        let before = wrong_width.actor.clone();
        assert!(matches!(
            load_checkpoint(buf.as_slice(), "maze", &mut [("lower", &mut wrong_width)]),
            Err(Error::Checkpoint(_))
        ));
        assert_eq!(wrong_width.actor, before);
        let mut b = agent(2, 6);
        assert!(load_checkpoint(buf.as_slice(), "bin", &mut [("lower", &mut b)]).is_err());
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(load_checkpoint(bad.as_slice(), "maze", &mut [("lower", &mut b)]).is_err());
    }
}
