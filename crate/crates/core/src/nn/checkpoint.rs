//! Binary checkpoint format.
//!
//! ```text
//! magic      8 bytes  "IRHCKPT\0"
//! version    u32
//! meta       u32 length + UTF-8 JSON (network config, input dim, window
//!            spec, feature config, task, epoch)
//! tensors    u32 count, then per tensor:
//!              u32 length + name, u8 rank, rank × u32 dims, f32 data
//! optimizer  u8 present flag; if 1: u64 step, f64 lr,
//!            u32 length + JSON schedule, u32 count,
//!            count × (first moment tensor, second moment tensor)
//! scaler     u32 dim, dim × f32 mean, dim × f32 std
//! checksum   u32 CRC-32 of every preceding byte
//! ```
//!
//! All numbers are little-endian. Tensors are written in the network's
//! visit order; names must match exactly on load.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{HarRng, LrSchedule, Network, NetworkConfig, OptimizerState, Slot, SlotRef, Visit};
use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureScaler, WindowSpec};
use crate::sensor::Task;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"IRHCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub network: NetworkConfig,
    pub input_dim: usize,
    pub window: WindowSpec,
    pub features: FeatureConfig,
    pub task: Task,
    /// Epoch the weights were taken from.
    pub epoch: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub network: Network<f32>,
    pub optimizer: Option<OptimizerState<f32>>,
    pub scaler: FeatureScaler,
}

fn write_tensor(w: &mut ByteWriter, name: &str, t: &ArrayD<f32>) {
    w.blob(name.as_bytes());
    w.u8(t.ndim() as u8);
    for &d in t.shape() {
        w.u32(d as u32);
    }
    w.f32s(&t.iter().copied().collect::<Vec<_>>());
}

fn read_tensor(r: &mut ByteReader<'_>) -> Result<(String, ArrayD<f32>), String> {
    let name = String::from_utf8(r.blob()?.to_vec()).map_err(|_| "tensor name is not UTF-8")?;
    let rank = r.u8()? as usize;
    let dims = (0..rank)
        .map(|_| r.u32().map(|d| d as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let len = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or("tensor too large")?;
    let data = r.f32s(len)?;
    let t = ArrayD::from_shape_vec(IxDyn(&dims), data).map_err(|e| e.to_string())?;
    Ok((name, t))
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.blob(&serde_json::to_vec(&self.meta).expect("meta serializes"));

        let mut tensors: Vec<(String, ArrayD<f32>)> = Vec::new();
        self.network.visit("", &mut |name, slot| {
            let t = match slot {
                SlotRef::Param(p) => p.value.clone(),
                SlotRef::Buffer(b) => b.clone(),
            };
            tensors.push((name.to_string(), t));
        });
        w.u32(tensors.len() as u32);
        for (name, t) in &tensors {
            write_tensor(&mut w, name, t);
        }

        match &self.optimizer {
            None => w.u8(0),
            Some(opt) => {
                w.u8(1);
                w.u64(opt.step);
                w.f64(opt.lr);
                w.blob(&serde_json::to_vec(&opt.schedule).expect("schedule serializes"));
                w.u32(opt.first_moment.len() as u32);
                for (i, (m, v)) in opt.first_moment.iter().zip(&opt.second_moment).enumerate() {
                    write_tensor(&mut w, &format!("m{i}"), m);
                    write_tensor(&mut w, &format!("v{i}"), v);
                }
            }
        }

        w.u32(self.scaler.dim() as u32);
        w.f32s(&self.scaler.mean);
        w.f32s(&self.scaler.std);

        let crc = crc32fast::hash(&w.buf);
        w.u32(crc);
        w.buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        Self::decode_inner(bytes).map_err(Error::CorruptCheckpoint)
    }

    fn decode_inner(bytes: &[u8]) -> Result<Self, String> {
        if bytes.len() < 16 {
            return Err(format!("file is only {} bytes", bytes.len()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if &body[..8] != CHECKPOINT_MAGIC {
            return Err("bad magic".into());
        }
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err("checksum mismatch (truncated or modified file)".into());
        }
        let mut r = ByteReader::new(body);
        r.take(8)?;
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let meta: CheckpointMeta =
            serde_json::from_slice(r.blob()?).map_err(|e| format!("metadata: {e}"))?;

        let n = r.u32()? as usize;
        let mut stored: BTreeMap<String, ArrayD<f32>> = BTreeMap::new();
        for _ in 0..n {
            let (name, t) = read_tensor(&mut r)?;
            if stored.insert(name.clone(), t).is_some() {
                return Err(format!("duplicate tensor {name}"));
            }
        }

        let mut network =
            Network::new(&meta.network, meta.input_dim, &mut HarRng::seed_from_u64(0))
                .map_err(|e| format!("metadata: {e}"))?;
        let mut problem: Option<String> = None;
        network.visit_mut("", &mut |name, slot| {
            let target = match slot {
                Slot::Param(p) => &mut p.value,
                Slot::Buffer(b) => b,
            };
            match stored.remove(name) {
                Some(t) if t.shape() == target.shape() => *target = t,
                Some(t) => {
                    problem.get_or_insert(format!(
                        "tensor {name} has shape {:?}, network expects {:?}",
                        t.shape(),
                        target.shape()
                    ));
                }
                None => {
                    problem.get_or_insert(format!("missing tensor {name}"));
                }
            }
        });
        if let Some(p) = problem {
            return Err(p);
        }
        if let Some(extra) = stored.keys().next() {
            return Err(format!("unexpected tensor {extra}"));
        }

        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let step = r.u64()?;
                let lr = r.f64()?;
                let schedule: LrSchedule =
                    serde_json::from_slice(r.blob()?).map_err(|e| format!("schedule: {e}"))?;
                let count = r.u32()? as usize;
                let mut first_moment = Vec::with_capacity(count);
                let mut second_moment = Vec::with_capacity(count);
                for _ in 0..count {
                    first_moment.push(read_tensor(&mut r)?.1);
                    second_moment.push(read_tensor(&mut r)?.1);
                }
                Some(OptimizerState {
                    first_moment,
                    second_moment,
                    step,
                    lr,
                    schedule,
                })
            }
            f => return Err(format!("bad optimizer flag {f}")),
        };

        let dim = r.u32()? as usize;
        let scaler = FeatureScaler {
            mean: r.f32s(dim)?,
            std: r.f32s(dim)?,
        };
        if r.remaining() != 0 {
            return Err(format!("{} trailing bytes", r.remaining()));
        }
        Ok(Self {
            meta,
            network,
            optimizer,
            scaler,
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, ckpt.encode())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Checkpoint::decode(&bytes)
}

/// Loads a checkpoint and rejects it unless it was built from `expected`.
pub fn load_checkpoint_expecting(path: &Path, expected: &NetworkConfig) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    let diff = config_diff(expected, &ckpt.meta.network);
    if !diff.is_empty() {
        return Err(Error::CorruptCheckpoint(format!(
            "architecture differs: {}",
            diff.join(", ")
        )));
    }
    Ok(ckpt)
}

/// `field: expected -> found` for every differing top-level field.
pub(crate) fn config_diff(expected: &NetworkConfig, found: &NetworkConfig) -> Vec<String> {
    let (a, b) = (
        serde_json::to_value(expected).expect("config serializes"),
        serde_json::to_value(found).expect("config serializes"),
    );
    let (Some(a), Some(b)) = (a.as_object(), b.as_object()) else {
        return vec!["config is not an object".into()];
    };
    a.iter()
        .filter(|(k, v)| b.get(*k) != Some(v))
        .map(|(k, v)| {
            format!(
                "{k}: {v} -> {}",
                b.get(k).map_or("missing".into(), |x| x.to_string())
            )
        })
        .collect()
}
