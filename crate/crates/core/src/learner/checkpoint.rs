//! Binary checkpoint format.
//!
//! All integers are little-endian `u64` and all reals little-endian `f64`,
//! except the `u32` version after the magic:
//!
//! ```text
//! magic   8 bytes  "AERSWRM\0"
//! version u32
//! next_episode, seed
//! actor:  n_dims, dims[n_dims], n_params, params[n_params]
//! critic: same layout
//! actor Adam:  t, lr, beta1, beta2, eps, m[n_params], v[n_params]
//! critic Adam: same layout
//! normalizer: warmup_min, epsilon, then 5 x (count, mean, m2)
//! histories: 3 x (len, values[len])   gmappo, kmeans, random
//! ```

use std::path::Path;

use super::adam::AdamState;
use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::reward::{NormalizerState, RunningMoments, N_COMPONENTS};

pub const MAGIC: &[u8; 8] = b"AERSWRM\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub next_episode: u64,
    pub seed: u64,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub normalizer: NormalizerState,
    /// Episode totals used for the rolling reward variance, one per policy.
    pub reward_history: [Vec<f64>; 3],
}

struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|&v| self.f64(v));
    }
    fn net(&mut self, net: &Mlp) {
        self.u64(net.dims().len() as u64);
        net.dims().iter().for_each(|&d| self.u64(d as u64));
        self.u64(net.params.len() as u64);
        self.f64s(&net.params);
    }
    fn adam(&mut self, a: &AdamState) {
        self.u64(a.t);
        self.f64s(&[a.lr, a.beta1, a.beta2, a.eps]);
        self.f64s(&a.m);
        self.f64s(&a.v);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        // every counted item is at least 8 bytes
        if n > (self.buf.len() / 8) as u64 {
            return Err(Error::Checkpoint(format!("implausible length {n}")));
        }
        Ok(n as usize)
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn net(&mut self) -> Result<Mlp> {
        let nd = self.len()?;
        let dims = (0..nd).map(|_| self.len()).collect::<Result<Vec<_>>>()?;
        let np = self.len()?;
        let params = self.f64s(np)?;
        Mlp::from_params(&dims, params).map_err(|e| Error::Checkpoint(e.to_string()))
    }
    fn adam(&mut self, n: usize) -> Result<AdamState> {
        let t = self.u64()?;
        let h = self.f64s(4)?;
        Ok(AdamState {
            t,
            lr: h[0],
            beta1: h[1],
            beta2: h[2],
            eps: h[3],
            m: self.f64s(n)?,
            v: self.f64s(n)?,
        })
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(MAGIC.to_vec());
        w.0.extend_from_slice(&VERSION.to_le_bytes());
        w.u64(self.next_episode);
        w.u64(self.seed);
        w.net(&self.actor);
        w.net(&self.critic);
        w.adam(&self.actor_opt);
        w.adam(&self.critic_opt);
        w.u64(self.normalizer.warmup_min);
        w.f64(self.normalizer.epsilon);
        for m in &self.normalizer.moments {
            w.u64(m.count);
            w.f64(m.mean);
            w.f64(m.m2);
        }
        for h in &self.reward_history {
            w.u64(h.len() as u64);
            w.f64s(h);
        }
        w.0
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::CheckpointVersion { found: version, expected: VERSION });
        }
        let next_episode = r.u64()?;
        let seed = r.u64()?;
        let actor = r.net()?;
        let critic = r.net()?;
        let actor_opt = r.adam(actor.params.len())?;
        let critic_opt = r.adam(critic.params.len())?;
        let warmup_min = r.u64()?;
        let epsilon = r.f64()?;
        let mut moments = [RunningMoments::default(); N_COMPONENTS];
        for m in &mut moments {
            *m = RunningMoments { count: r.u64()?, mean: r.f64()?, m2: r.f64()? };
        }
        let mut reward_history: [Vec<f64>; 3] = Default::default();
        for h in &mut reward_history {
            let n = r.len()?;
            *h = r.f64s(n)?;
        }
        if r.pos != buf.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(Checkpoint {
            next_episode,
            seed,
            actor,
            critic,
            actor_opt,
            critic_opt,
            normalizer: NormalizerState { moments, warmup_min, epsilon },
            reward_history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        // write-then-rename so an interrupted save never leaves a torn file
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.encode()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&buf)
    }
}
