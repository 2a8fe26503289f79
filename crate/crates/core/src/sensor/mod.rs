//! Raw phone sensor samples and their derotation into the NED world frame.
//!
//! Channel values are stored as `f32`; all rotation arithmetic runs in `f64`.

mod rotation;

pub use rotation::{derotate, quaternion_to_rotation, Quaternion, RotationMatrix, Vec3};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frames per recording (5 s at 100 Hz).
pub const SAMPLE_FRAMES: usize = 500;

/// Sampling rate of every channel, in Hz.
pub const SAMPLE_RATE_HZ: f64 = 100.0;

/// Scalar channels kept after preprocessing.
pub const N_CHANNELS: usize = 10;

/// Channel names in feature order.
pub const CHANNEL_NAMES: [&str; N_CHANNELS] = [
    "gyro_x",
    "gyro_y",
    "gyro_z",
    "acc_ned_x",
    "acc_ned_y",
    "acc_ned_z",
    "mag_ned_x",
    "mag_ned_y",
    "mag_ned_z",
    "pressure",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Activity {
    Still,
    Walk,
    Run,
    Bike,
    Car,
    Bus,
    Train,
    Subway,
}

impl Activity {
    pub const ALL: [Activity; 8] = [
        Activity::Still,
        Activity::Walk,
        Activity::Run,
        Activity::Bike,
        Activity::Car,
        Activity::Bus,
        Activity::Train,
        Activity::Subway,
    ];

    /// Zero-based class index.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Label code used in dataset files (1-based).
    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        code.checked_sub(1)
            .and_then(|i| Self::from_index(i as usize))
    }

    pub fn name(self) -> &'static str {
        match self {
            Activity::Still => "Still",
            Activity::Walk => "Walk",
            Activity::Run => "Run",
            Activity::Bike => "Bike",
            Activity::Car => "Car",
            Activity::Bus => "Bus",
            Activity::Train => "Train",
            Activity::Subway => "Subway",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Location {
    Bag,
    Hips,
    Torso,
    Hand,
}

impl Location {
    pub const ALL: [Location; 4] = [
        Location::Bag,
        Location::Hips,
        Location::Torso,
        Location::Hand,
    ];

    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        code.checked_sub(1)
            .and_then(|i| Self::ALL.get(i as usize).copied())
    }

    pub fn group(self) -> LocationGroup {
        match self {
            Location::Bag | Location::Hand => LocationGroup::BagHand,
            Location::Hips | Location::Torso => LocationGroup::HipsTorso,
        }
    }
}

/// Coarse placement used before activity classification.
///
/// The derived ordering is the documented tie-break order for majority votes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LocationGroup {
    BagHand,
    HipsTorso,
}

impl LocationGroup {
    pub const ALL: [LocationGroup; 2] = [LocationGroup::BagHand, LocationGroup::HipsTorso];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LocationGroup::BagHand => "BagHand",
            LocationGroup::HipsTorso => "HipsTorso",
        }
    }
}

/// Which label a classifier predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Activity,
    LocationGroup,
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::Activity => Activity::ALL.len(),
            Task::LocationGroup => LocationGroup::ALL.len(),
        }
    }

    /// Class index of a labelled sample; `None` when a location group is
    /// requested but the location is unknown.
    pub fn class_of(self, activity: Activity, location: Option<Location>) -> Option<usize> {
        match self {
            Task::Activity => Some(activity.index()),
            Task::LocationGroup => location.map(|l| l.group().index()),
        }
    }

    pub fn class_name(self, class: usize) -> &'static str {
        match self {
            Task::Activity => Activity::from_index(class).map_or("?", Activity::name),
            Task::LocationGroup => {
                LocationGroup::from_index(class).map_or("?", LocationGroup::name)
            }
        }
    }
}

/// One 100 Hz frame of the sensors this toolkit consumes.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RawFrame {
    /// m/s², body frame.
    pub accelerometer: [f32; 3],
    /// rad/s, body frame.
    pub gyroscope: [f32; 3],
    /// µT, body frame.
    pub magnetometer: [f32; 3],
    /// hPa.
    pub pressure: f32,
    /// Orientation quaternion as (w, x, y, z).
    pub orientation: [f32; 4],
}

impl RawFrame {
    fn is_finite(&self) -> bool {
        self.accelerometer
            .iter()
            .chain(&self.gyroscope)
            .chain(&self.magnetometer)
            .chain(&self.orientation)
            .chain(std::iter::once(&self.pressure))
            .all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawSample {
    frames: Vec<RawFrame>,
    pub activity: Activity,
    pub location: Option<Location>,
    pub user: Option<u8>,
}

impl RawSample {
    pub fn new(
        frames: Vec<RawFrame>,
        activity: Activity,
        location: Option<Location>,
        user: Option<u8>,
    ) -> Result<Self> {
        if frames.len() != SAMPLE_FRAMES {
            return Err(Error::ShapeMismatch(format!(
                "sample has {} frames, expected {SAMPLE_FRAMES}",
                frames.len()
            )));
        }
        if let Some(i) = frames.iter().position(|f| !f.is_finite()) {
            return Err(Error::ShapeMismatch(format!(
                "frame {i} has a non-finite value"
            )));
        }
        Ok(Self {
            frames,
            activity,
            location,
            user,
        })
    }

    pub fn frames(&self) -> &[RawFrame] {
        &self.frames
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct DerotatedFrame {
    pub accel_ned: [f32; 3],
    pub gyro: [f32; 3],
    pub mag_ned: [f32; 3],
    pub pressure: f32,
}

impl DerotatedFrame {
    /// Value of channel `c` in [`CHANNEL_NAMES`] order.
    pub fn channel(&self, c: usize) -> f32 {
        match c {
            0..=2 => self.gyro[c],
            3..=5 => self.accel_ned[c - 3],
            6..=8 => self.mag_ned[c - 6],
            9 => self.pressure,
            _ => panic!("channel index {c} out of range"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerotatedSample {
    pub frames: Vec<DerotatedFrame>,
    pub activity: Activity,
    pub location: Option<Location>,
    pub user: Option<u8>,
}

impl DerotatedSample {
    /// One channel across all frames, widened to `f64`.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.channel(c) as f64).collect()
    }
}

fn derotate_f32(v: [f32; 3], r: &RotationMatrix) -> [f32; 3] {
    let out = derotate(Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64), r);
    [out.x as f32, out.y as f32, out.z as f32]
}

/// Derotates accelerometer and magnetometer with each frame's own
/// orientation. Gyroscope and pressure pass through untouched.
pub fn preprocess_sample(sample: &RawSample) -> Result<DerotatedSample> {
    let frames = sample
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let q = Quaternion::from_wxyz_f32(f.orientation);
            let r = quaternion_to_rotation(q).map_err(|e| Error::AtFrame {
                frame: i,
                source: Box::new(e),
            })?;
            Ok(DerotatedFrame {
                accel_ned: derotate_f32(f.accelerometer, &r),
                gyro: f.gyroscope,
                mag_ned: derotate_f32(f.magnetometer, &r),
                pressure: f.pressure,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DerotatedSample {
        frames,
        activity: sample.activity,
        location: sample.location,
        user: sample.user,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_with(accel: [f32; 3], q: [f32; 4]) -> RawSample {
        let frame = RawFrame {
            accelerometer: accel,
            gyroscope: [0.1, -0.2, 0.3],
            magnetometer: [20.0, 0.0, -40.0],
            pressure: 1013.25,
            orientation: q,
        };
        RawSample::new(
            vec![frame; SAMPLE_FRAMES],
            Activity::Walk,
            Some(Location::Hips),
            None,
        )
        .unwrap()
    }

    #[test]
    fn identity_orientation_leaves_accel_unchanged() {
        let s = sample_with([1.5, -2.0, 9.0], [1.0, 0.0, 0.0, 0.0]);
        let d = preprocess_sample(&s).unwrap();
        assert_eq!(d.frames.len(), SAMPLE_FRAMES);
        for f in &d.frames {
            assert_eq!(f.accel_ned, [1.5, -2.0, 9.0]);
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn quarter_turn_about_x_moves_gravity_onto_y() {
        let s = sample_with([0.0, 0.0, 9.81], [0.7071068, 0.7071068, 0.0, 0.0]);
        let d = preprocess_sample(&s).unwrap();
        for f in &d.frames {
            assert!(f.accel_ned[0].abs() < 1e-4);
            assert!((f.accel_ned[1] + 9.81).abs() < 1e-4);
            assert!(f.accel_ned[2].abs() < 1e-4);
            // gyro and pressure pass through
            assert_eq!(f.gyro, [0.1, -0.2, 0.3]);
            assert_eq!(f.pressure, 1013.25);
        }
    }

    #[test]
    fn zero_quaternion_reports_frame() {
        let mut frames = vec![
            RawFrame {
                orientation: [1.0, 0.0, 0.0, 0.0],
                ..Default::default()
            };
            SAMPLE_FRAMES
        ];
        frames[17].orientation = [0.0; 4];
        let s = RawSample::new(frames, Activity::Still, None, None).unwrap();
        match preprocess_sample(&s) {
            Err(Error::AtFrame { frame: 17, source }) => {
                assert!(matches!(*source, Error::ZeroQuaternion { .. }))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_frame_count_rejected() {
        let frames = vec![RawFrame::default(); 499];
        assert!(RawSample::new(frames, Activity::Still, None, None).is_err());
    }

    #[test]
    fn preprocessing_is_deterministic() {
        let s = sample_with([0.3, 4.0, 9.0], [0.3, -0.5, 0.7, 0.1]);
        let a = preprocess_sample(&s).unwrap();
        let b = preprocess_sample(&s).unwrap();
        for (x, y) in a.frames.iter().zip(&b.frames) {
            for c in 0..N_CHANNELS {
                assert_eq!(x.channel(c).to_bits(), y.channel(c).to_bits());
            }
        }
    }

    #[test]
    fn label_codes_round_trip() {
        for a in Activity::ALL {
            assert_eq!(Activity::from_code(a.code()), Some(a));
        }
        assert_eq!(Activity::from_code(0), None);
        assert_eq!(Activity::from_code(9), None);
        assert_eq!(Location::Hand.group(), LocationGroup::BagHand);
        assert_eq!(Location::Torso.group(), LocationGroup::HipsTorso);
    }
}
