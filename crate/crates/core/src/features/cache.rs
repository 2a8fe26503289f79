//! Flat binary cache of featurized samples.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes   "IRHFEAT\0"
//! version   u32       1
//! n_samples u32
//! steps     u32
//! dim       u32
//! labels    n_samples × 3 bytes: activity code (1..=8),
//!                                location code (0 = unknown, 1..=4),
//!                                user id (0 = unknown)
//! body      n_samples × steps × dim f32, sample-major then step-major
//! ```

use std::path::Path;

use super::extract::FeatureSequence;
use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::sensor::{Activity, Location};

pub const FEATURE_FILE_MAGIC: &[u8; 8] = b"IRHFEAT\0";
pub const FEATURE_FILE_VERSION: u32 = 1;

pub fn encode_features(samples: &[FeatureSequence]) -> Result<Vec<u8>> {
    let (steps, dim) = samples.first().map_or((0, 0), |s| (s.steps, s.dim));
    let mut w = ByteWriter::new();
    w.bytes(FEATURE_FILE_MAGIC);
    w.u32(FEATURE_FILE_VERSION);
    w.u32(samples.len() as u32);
    w.u32(steps as u32);
    w.u32(dim as u32);
    for s in samples {
        if (s.steps, s.dim) != (steps, dim) {
            return Err(Error::ShapeMismatch(format!(
                "sample is {}×{}, file is {steps}×{dim}",
                s.steps, s.dim
            )));
        }
        w.u8(s.activity.code());
        w.u8(s.location.map_or(0, Location::code));
        w.u8(s.user.unwrap_or(0));
    }
    for s in samples {
        w.f32s(&s.values);
    }
    Ok(w.buf)
}

pub fn decode_features(bytes: &[u8]) -> Result<Vec<FeatureSequence>> {
    decode(bytes).map_err(Error::CorruptFeatures)
}

fn decode(bytes: &[u8]) -> Result<Vec<FeatureSequence>, String> {
    let mut r = ByteReader::new(bytes);
    if r.take(8)? != FEATURE_FILE_MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != FEATURE_FILE_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let n = r.u32()? as usize;
    let steps = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let expected = n * 3 + n * steps * dim * 4;
    if r.remaining() != expected {
        return Err(format!(
            "body is {} bytes, header implies {expected}",
            r.remaining()
        ));
    }
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let a = r.u8()?;
        let activity = Activity::from_code(a).ok_or(format!("sample {i}: activity code {a}"))?;
        let l = r.u8()?;
        let location = match l {
            0 => None,
            c => Some(Location::from_code(c).ok_or(format!("sample {i}: location code {c}"))?),
        };
        let user = Some(r.u8()?).filter(|&u| u != 0);
        labels.push((activity, location, user));
    }
    labels
        .into_iter()
        .map(|(activity, location, user)| {
            Ok(FeatureSequence {
                steps,
                dim,
                values: r.f32s(steps * dim)?,
                activity,
                location,
                user,
            })
        })
        .collect()
}

pub fn write_feature_file(path: &Path, samples: &[FeatureSequence]) -> Result<()> {
    let bytes = encode_features(samples)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_feature_file(path: &Path) -> Result<Vec<FeatureSequence>> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_features(&bytes)
}
