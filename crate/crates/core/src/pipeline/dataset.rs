//! Directory-of-text-matrices dataset format.
//!
//! A dataset directory holds one whitespace-separated matrix per raw channel
//! (rows = samples, 500 columns = frames):
//!
//! ```text
//! Acc_x.txt Acc_y.txt Acc_z.txt     accelerometer, m/s²
//! Gyr_x.txt Gyr_y.txt Gyr_z.txt     gyroscope, rad/s
//! Mag_x.txt Mag_y.txt Mag_z.txt     magnetometer, µT
//! Pressure.txt                      hPa
//! Ori_w.txt Ori_x.txt Ori_y.txt Ori_z.txt   orientation quaternion
//! Label.txt                         per-frame activity codes 1..8
//! Location.txt (optional)           location codes 1..4, one or more per row
//! User.txt (optional)               user id, one per row
//! ```
//!
//! Multi-column label files are reduced to one label per row by majority
//! vote, ties going to the smallest code.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::{Activity, Location, RawFrame, RawSample, SAMPLE_FRAMES};

pub const CHANNEL_FILES: [&str; 14] = [
    "Acc_x.txt",
    "Acc_y.txt",
    "Acc_z.txt",
    "Gyr_x.txt",
    "Gyr_y.txt",
    "Gyr_z.txt",
    "Mag_x.txt",
    "Mag_y.txt",
    "Mag_z.txt",
    "Pressure.txt",
    "Ori_w.txt",
    "Ori_x.txt",
    "Ori_y.txt",
    "Ori_z.txt",
];
pub const LABEL_FILE: &str = "Label.txt";
pub const LOCATION_FILE: &str = "Location.txt";
pub const USER_FILE: &str = "User.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Validation,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub role: Role,
    pub samples: Vec<RawSample>,
}

impl Dataset {
    pub fn new(role: Role, samples: Vec<RawSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset(format!("{role:?} set has no samples")));
        }
        Ok(Self { role, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Parses a whitespace matrix; every row must have `cols` entries when given.
pub fn read_matrix<T: std::str::FromStr>(path: &Path, cols: Option<usize>) -> Result<Vec<Vec<T>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut rows = Vec::new();
    for (row, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split_whitespace()
            .enumerate()
            .map(|(col, tok)| {
                tok.parse::<T>().map_err(|_| Error::BadNumber {
                    path: path.to_path_buf(),
                    row,
                    col,
                    token: tok.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let expected = cols
            .or_else(|| rows.first().map(Vec::len))
            .unwrap_or(values.len());
        if values.len() != expected {
            return Err(Error::RaggedMatrix {
                path: path.to_path_buf(),
                row,
                found: values.len(),
                expected,
            });
        }
        rows.push(values);
    }
    Ok(rows)
}

/// Most frequent value; ties go to the smallest.
pub fn majority_vote<T: Ord + Copy>(values: &[T]) -> Option<T> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mut best: Option<(T, usize)> = None;
    for run in sorted.chunk_by(|a, b| a == b) {
        if best.is_none_or(|(_, n)| run.len() > n) {
            best = Some((run[0], run.len()));
        }
    }
    best.map(|(v, _)| v)
}

fn as_code(path: &Path, row: usize, v: f64) -> Result<u8> {
    if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
        Ok(v as u8)
    } else {
        Err(Error::UnknownLabel {
            path: path.to_path_buf(),
            row,
            label: v.to_string(),
        })
    }
}

fn vote_labels<L>(
    path: &Path,
    rows: &[Vec<f64>],
    decode: impl Fn(u8) -> Option<L>,
) -> Result<Vec<L>> {
    rows.iter()
        .enumerate()
        .map(|(row, vals)| {
            let codes = vals
                .iter()
                .map(|&v| as_code(path, row, v))
                .collect::<Result<Vec<_>>>()?;
            let code = majority_vote(&codes).ok_or_else(|| Error::RaggedMatrix {
                path: path.to_path_buf(),
                row,
                found: 0,
                expected: 1,
            })?;
            decode(code).ok_or_else(|| Error::UnknownLabel {
                path: path.to_path_buf(),
                row,
                label: code.to_string(),
            })
        })
        .collect()
}

fn require(dir: &Path, name: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::ChannelCountMismatch(format!(
            "{} is missing",
            path.display()
        )))
    }
}

pub fn ingest(dir: &Path, role: Role) -> Result<Dataset> {
    let mut channels = Vec::with_capacity(CHANNEL_FILES.len());
    for name in CHANNEL_FILES {
        channels.push(read_matrix::<f32>(
            &require(dir, name)?,
            Some(SAMPLE_FRAMES),
        )?);
    }
    let label_path = require(dir, LABEL_FILE)?;
    let labels = vote_labels(
        &label_path,
        &read_matrix(&label_path, Some(SAMPLE_FRAMES))?,
        Activity::from_code,
    )?;
    let n = labels.len();

    let optional = |name: &str| {
        let path = dir.join(name);
        path.is_file().then_some(path)
    };
    let locations = match optional(LOCATION_FILE) {
        Some(p) => vote_labels(&p, &read_matrix(&p, None)?, Location::from_code)?
            .into_iter()
            .map(Some)
            .collect(),
        None => vec![None; n],
    };
    let users = match optional(USER_FILE) {
        Some(p) => vote_labels(&p, &read_matrix(&p, Some(1))?, Some)?
            .into_iter()
            .map(Some)
            .collect(),
        None => vec![None; n],
    };

    for (name, m) in CHANNEL_FILES.iter().zip(&channels) {
        if m.len() != n {
            return Err(Error::ChannelCountMismatch(format!(
                "{name} has {} rows, {LABEL_FILE} has {n}",
                m.len()
            )));
        }
    }
    for (name, len) in [(LOCATION_FILE, locations.len()), (USER_FILE, users.len())] {
        if len != n {
            return Err(Error::ChannelCountMismatch(format!(
                "{name} has {len} rows, {LABEL_FILE} has {n}"
            )));
        }
    }

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let frames = (0..SAMPLE_FRAMES)
            .map(|f| {
                let v = |c: usize| channels[c][i][f];
                RawFrame {
                    accelerometer: [v(0), v(1), v(2)],
                    gyroscope: [v(3), v(4), v(5)],
                    magnetometer: [v(6), v(7), v(8)],
                    pressure: v(9),
                    orientation: [v(10), v(11), v(12), v(13)],
                }
            })
            .collect();
        samples.push(RawSample::new(frames, labels[i], locations[i], users[i])?);
    }
    Dataset::new(role, samples)
}

fn write_rows(path: &Path, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn join_values<V: std::fmt::Display>(vals: impl Iterator<Item = V>) -> String {
    let mut s = String::new();
    for (k, v) in vals.enumerate() {
        if k > 0 {
            s.push(' ');
        }
        write!(s, "{v}").expect("writing to a String");
    }
    s
}

/// Writes `samples` in the ingestion layout. Optional label files are only
/// written when every sample carries that label.
pub fn write_dataset(dir: &Path, samples: &[RawSample]) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let value = |f: &RawFrame, c: usize| -> f32 {
        match c {
            0..=2 => f.accelerometer[c],
            3..=5 => f.gyroscope[c - 3],
            6..=8 => f.magnetometer[c - 6],
            9 => f.pressure,
            _ => f.orientation[c - 10],
        }
    };
    for (c, name) in CHANNEL_FILES.iter().enumerate() {
        write_rows(
            &dir.join(name),
            samples
                .iter()
                .map(|s| join_values(s.frames().iter().map(|f| value(f, c)))),
        )?;
    }
    write_rows(
        &dir.join(LABEL_FILE),
        samples
            .iter()
            .map(|s| join_values(std::iter::repeat_n(s.activity.code(), SAMPLE_FRAMES))),
    )?;
    if let Some(locs) = samples
        .iter()
        .map(|s| s.location)
        .collect::<Option<Vec<_>>>()
    {
        write_rows(
            &dir.join(LOCATION_FILE),
            locs.iter().map(|l| l.code().to_string()),
        )?;
    }
    if let Some(users) = samples.iter().map(|s| s.user).collect::<Option<Vec<_>>>() {
        write_rows(&dir.join(USER_FILE), users.iter().map(|u| u.to_string()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(activity: Activity, k: f32) -> RawSample {
        let frames = (0..SAMPLE_FRAMES)
            .map(|f| RawFrame {
                accelerometer: [k, f as f32 * 0.5, -1.25],
                gyroscope: [0.1, 0.2, k],
                magnetometer: [20.0, 0.0, 40.0 + k],
                pressure: 1013.25,
                orientation: [1.0, 0.0, 0.0, 0.0],
            })
            .collect();
        RawSample::new(frames, activity, Some(Location::Torso), Some(2)).unwrap()
    }

    fn written() -> (tempfile::TempDir, Vec<RawSample>) {
        let dir = tempfile::tempdir().unwrap();
        let samples = vec![
            sample(Activity::Walk, 1.0),
            sample(Activity::Bus, 2.5),
            sample(Activity::Still, -3.0),
        ];
        write_dataset(dir.path(), &samples).unwrap();
        (dir, samples)
    }

    #[test]
    fn write_then_ingest_round_trips() {
        let (dir, samples) = written();
        let ds = ingest(dir.path(), Role::Train).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.samples, samples);
    }

    #[test]
    fn short_row_is_ragged() {
        let (dir, _) = written();
        let path = dir.path().join("Gyr_y.txt");
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        lines[1] = lines[1].rsplit_once(' ').unwrap().0.to_string();
        std::fs::write(&path, lines.join("\n")).unwrap();
        match ingest(dir.path(), Role::Train) {
            Err(Error::RaggedMatrix {
                row: 1,
                found: 499,
                expected: 500,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_channel_file() {
        let (dir, _) = written();
        std::fs::remove_file(dir.path().join("Mag_z.txt")).unwrap();
        assert!(matches!(
            ingest(dir.path(), Role::Train),
            Err(Error::ChannelCountMismatch(_))
        ));
    }

    #[test]
    fn row_count_disagreement() {
        let (dir, _) = written();
        let path = dir.path().join("Pressure.txt");
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.lines().take(2).collect::<Vec<_>>().join("\n")).unwrap();
        assert!(matches!(
            ingest(dir.path(), Role::Train),
            Err(Error::ChannelCountMismatch(_))
        ));
    }

    #[test]
    fn frame_labels_majority() {
        let (dir, _) = written();
        let row = |a: u8, na: usize, b: u8, nb: usize| {
            join_values(std::iter::repeat_n(a, na).chain(std::iter::repeat_n(b, nb)))
        };
        let text = [row(1, 300, 2, 200), row(2, 250, 1, 250), row(8, 1, 3, 499)].join("\n");
        std::fs::write(dir.path().join(LABEL_FILE), text).unwrap();
        let ds = ingest(dir.path(), Role::Test).unwrap();
        let got: Vec<_> = ds.samples.iter().map(|s| s.activity).collect();
        assert_eq!(got, [Activity::Still, Activity::Still, Activity::Run]);
    }

    #[test]
    fn unknown_label_code() {
        let (dir, _) = written();
        let text = vec![join_values(std::iter::repeat_n(9, 500)); 3].join("\n");
        std::fs::write(dir.path().join(LABEL_FILE), text).unwrap();
        assert!(matches!(
            ingest(dir.path(), Role::Test),
            Err(Error::UnknownLabel { row: 0, .. })
        ));
    }

    #[test]
    fn bad_number() {
        let (dir, _) = written();
        std::fs::write(dir.path().join(USER_FILE), "1\nx\n3\n").unwrap();
        assert!(matches!(
            ingest(dir.path(), Role::Test),
            Err(Error::BadNumber { row: 1, col: 0, .. })
        ));
    }

    #[test]
    fn vote_ties_go_low() {
        assert_eq!(majority_vote(&[3, 1, 3, 1]), Some(1));
        assert_eq!(majority_vote(&[2, 2, 5]), Some(2));
        assert_eq!(majority_vote::<u8>(&[]), None);
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(
            Dataset::new(Role::Train, vec![]),
            Err(Error::EmptyDataset(_))
        ));
    }
}
