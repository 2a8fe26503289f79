//! Synthetic periodic sensor recordings.
//!
//! Each activity class owns a base frequency with a few harmonics. World-frame
//! acceleration (gravity plus the class motion), the Earth magnetic field
//! (plus a small class-rate wobble) and barometric pressure are generated,
//! then rotated into the body frame through a slowly turning orientation
//! quaternion, so derotation recovers the world-frame signals. The gyroscope
//! carries the class motion directly.
//!
//! Users scale frequency and amplitude; locations scale channel families and
//! add a group-specific marker tone.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::stage_rng;
use crate::error::{Error, Result};
use crate::nn::HarRng;
use crate::sensor::{
    derotate, quaternion_to_rotation, Activity, Location, LocationGroup, Quaternion, RawFrame,
    RawSample, Vec3, SAMPLE_FRAMES, SAMPLE_RATE_HZ,
};

const NYQUIST_HZ: f64 = SAMPLE_RATE_HZ / 2.0;
const GRAVITY: f64 = 9.81;
const EARTH_FIELD: [f64; 3] = [22.0, 0.0, 42.0];
const SEA_LEVEL_HPA: f64 = 1013.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassRecipe {
    pub activity: Activity,
    pub base_hz: f64,
    /// Relative amplitude of harmonic `k + 1`; the first entry is the
    /// fundamental.
    pub harmonics: Vec<f64>,
    /// Acceleration amplitude of the fundamental, m/s².
    pub accel_amp: f64,
    /// Angular-rate amplitude, rad/s.
    pub gyro_amp: f64,
    /// Magnetometer wobble, µT.
    pub mag_amp: f64,
    /// Pressure oscillation, hPa.
    pub pressure_amp: f64,
    /// Linear pressure drift over the recording, hPa.
    pub pressure_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserProfile {
    pub user: u8,
    pub freq_scale: f64,
    pub amp_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationProfile {
    pub location: Location,
    pub accel_gain: f64,
    pub gyro_gain: f64,
    pub mag_gain: f64,
    /// Extra tone on the vertical acceleration, Hz.
    pub marker_hz: f64,
    pub marker_amp: f64,
}

impl LocationProfile {
    /// Default gains per location; the two groups differ in marker tone.
    pub fn standard(location: Location) -> Self {
        let (accel_gain, gyro_gain, mag_gain) = match location {
            Location::Bag => (0.7, 0.5, 1.0),
            Location::Hips => (1.0, 0.9, 1.0),
            Location::Torso => (0.9, 0.7, 1.0),
            Location::Hand => (1.2, 1.4, 1.0),
        };
        let marker_hz = match location.group() {
            LocationGroup::BagHand => 13.0,
            LocationGroup::HipsTorso => 17.0,
        };
        Self {
            location,
            accel_gain,
            gyro_gain,
            mag_gain,
            marker_hz,
            marker_amp: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub samples_per_class: usize,
    /// Class `k` keeps `1 − imbalance·k/7` of `samples_per_class` (at least 2).
    pub imbalance: f64,
    /// Gaussian noise standard deviation relative to each channel's scale.
    pub noise: f64,
    /// Per-sample random jitter of frequency and amplitude (relative).
    pub jitter: f64,
    /// Largest rotation rate of the simulated phone orientation, rad/s.
    pub max_turn_rate: f64,
    pub classes: Vec<ClassRecipe>,
    /// Cycled over samples.
    pub users: Vec<UserProfile>,
    /// Cycled over samples; empty leaves the location unlabelled and
    /// unperturbed.
    pub locations: Vec<LocationProfile>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            samples_per_class: 50,
            imbalance: 0.0,
            noise: 0.3,
            jitter: 0.03,
            max_turn_rate: 0.3,
            classes: default_classes(),
            users: vec![UserProfile {
                user: 1,
                freq_scale: 1.0,
                amp_scale: 1.0,
            }],
            locations: Location::ALL
                .iter()
                .map(|&l| LocationProfile::standard(l))
                .collect(),
        }
    }
}

/// One recipe per activity with well separated fundamentals.
pub fn default_classes() -> Vec<ClassRecipe> {
    let r = |activity,
             base_hz,
             harmonics: &[f64],
             accel_amp,
             gyro_amp,
             mag_amp,
             pressure_amp,
             pressure_drift| {
        ClassRecipe {
            activity,
            base_hz,
            harmonics: harmonics.to_vec(),
            accel_amp,
            gyro_amp,
            mag_amp,
            pressure_amp,
            pressure_drift,
        }
    };
    vec![
        r(Activity::Still, 1.0, &[1.0], 0.05, 0.02, 0.2, 0.005, 0.0),
        r(
            Activity::Walk,
            2.0,
            &[1.0, 0.5, 0.2],
            2.0,
            0.8,
            1.0,
            0.02,
            0.01,
        ),
        r(
            Activity::Run,
            3.0,
            &[1.0, 0.6, 0.3],
            5.0,
            2.0,
            2.0,
            0.04,
            0.03,
        ),
        r(Activity::Bike, 5.0, &[1.0, 0.3], 1.5, 0.6, 0.8, 0.02, -0.05),
        r(Activity::Car, 7.0, &[1.0, 0.2], 0.6, 0.15, 0.5, 0.03, 0.2),
        r(Activity::Bus, 9.0, &[1.0, 0.4], 0.8, 0.2, 0.6, 0.03, -0.15),
        r(Activity::Train, 12.0, &[1.0, 0.2], 0.5, 0.1, 3.0, 0.05, 0.1),
        r(
            Activity::Subway,
            15.0,
            &[1.0, 0.3],
            0.7,
            0.12,
            5.0,
            0.08,
            -0.3,
        ),
    ]
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadSpec(m));
        let mut seen: Vec<Activity> = self.classes.iter().map(|c| c.activity).collect();
        seen.sort();
        seen.dedup();
        if self.classes.len() != Activity::ALL.len() || seen.len() != Activity::ALL.len() {
            return bad("need exactly one recipe per activity (8 classes)".into());
        }
        if self.samples_per_class == 0 {
            return bad("samples_per_class must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.imbalance) || !(0.0..0.5).contains(&self.jitter) {
            return bad("imbalance must lie in [0, 1] and jitter in [0, 0.5)".into());
        }
        if !(self.noise >= 0.0) || !(self.max_turn_rate >= 0.0) {
            return bad("noise and max_turn_rate must be non-negative".into());
        }
        if self.users.is_empty() {
            return bad("at least one user profile is required".into());
        }
        let max_scale = self.users.iter().map(|u| u.freq_scale).fold(0.0, f64::max);
        if self
            .users
            .iter()
            .any(|u| !(u.freq_scale > 0.0) || !(u.amp_scale > 0.0))
        {
            return bad("user scales must be positive".into());
        }
        for c in &self.classes {
            if !(c.base_hz > 0.0) || c.harmonics.is_empty() {
                return bad(format!(
                    "{}: base_hz must be positive with at least one harmonic",
                    c.activity.name()
                ));
            }
            let top = c.base_hz * c.harmonics.len() as f64 * max_scale * (1.0 + self.jitter);
            if top >= NYQUIST_HZ {
                return bad(format!(
                    "{}: highest harmonic reaches {top:.2} Hz, must stay below {NYQUIST_HZ} Hz",
                    c.activity.name()
                ));
            }
        }
        for l in &self.locations {
            if !(l.marker_hz > 0.0 && l.marker_hz < NYQUIST_HZ) {
                return bad(format!(
                    "marker tone {} Hz must lie in (0, {NYQUIST_HZ})",
                    l.marker_hz
                ));
            }
        }
        Ok(())
    }

    pub fn class_count(&self, class: usize) -> usize {
        let keep = 1.0 - self.imbalance * class as f64 / (Activity::ALL.len() - 1) as f64;
        ((self.samples_per_class as f64 * keep).round() as usize)
            .max(2)
            .min(self.samples_per_class)
    }
}

/// Generates the samples class by class; deterministic in `spec.seed`.
pub fn synthesize(spec: &SyntheticSpec) -> Result<Vec<RawSample>> {
    spec.validate()?;
    let mut classes = spec.classes.clone();
    classes.sort_by_key(|c| c.activity);
    let mut jobs = Vec::new();
    for (k, recipe) in classes.iter().enumerate() {
        for _ in 0..spec.class_count(k) {
            jobs.push(recipe);
        }
    }
    jobs.iter()
        .enumerate()
        .map(|(i, recipe)| {
            let user = &spec.users[i % spec.users.len()];
            let location =
                (!spec.locations.is_empty()).then(|| &spec.locations[i % spec.locations.len()]);
            let mut rng = stage_rng(spec.seed, super::Stage::Synth, i as u64);
            synth_sample(spec, recipe, user, location, &mut rng)
        })
        .collect()
}

fn harmonic_wave(amp: f64, freq: f64, harmonics: &[f64], phases: &[f64], t: f64) -> f64 {
    harmonics
        .iter()
        .zip(phases)
        .enumerate()
        .map(|(k, (&h, &p))| {
            amp * h * (std::f64::consts::TAU * (k + 1) as f64 * freq * t + p).sin()
        })
        .sum()
}

fn synth_sample(
    spec: &SyntheticSpec,
    recipe: &ClassRecipe,
    user: &UserProfile,
    location: Option<&LocationProfile>,
    rng: &mut HarRng,
) -> Result<RawSample> {
    let jitter = |rng: &mut HarRng| 1.0 + spec.jitter * (2.0 * rng.random::<f64>() - 1.0);
    let freq = recipe.base_hz * user.freq_scale * jitter(rng);
    let amp = user.amp_scale * jitter(rng);
    let (accel_gain, gyro_gain, mag_gain) =
        location.map_or((1.0, 1.0, 1.0), |l| (l.accel_gain, l.gyro_gain, l.mag_gain));

    let n_h = recipe.harmonics.len();
    let mut phases = || -> Vec<f64> {
        (0..n_h)
            .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
            .collect()
    };
    let accel_phases: [Vec<f64>; 3] = [phases(), phases(), phases()];
    let gyro_phases: [Vec<f64>; 3] = [phases(), phases(), phases()];
    let mag_phases: [Vec<f64>; 3] = [phases(), phases(), phases()];
    let pressure_phase = phases();
    // vertical motion dominates, horizontal axes carry less
    let axis_weight = [0.5, 0.35, 1.0];
    let marker_phase = rng.random::<f64>() * std::f64::consts::TAU;

    let start = random_unit_quaternion(rng);
    let axis = random_unit_quaternion(rng);
    let axis = Vec3::new(axis.x, axis.y, axis.z + 1e-6);
    let turn_rate = spec.max_turn_rate * rng.random::<f64>();
    let base_pressure = SEA_LEVEL_HPA + 20.0 * (rng.random::<f64>() - 0.5);

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = |scale: f64, rng: &mut HarRng| spec.noise * scale * normal.sample(rng);

    let frames = (0..SAMPLE_FRAMES)
        .map(|f| {
            let t = f as f64 / SAMPLE_RATE_HZ;
            let q = start.mul(&Quaternion::from_axis_angle(axis, turn_rate * t));
            let r = quaternion_to_rotation(q)?.transpose();

            let mut accel = [0.0; 3];
            let mut gyro = [0.0; 3];
            let mut mag = EARTH_FIELD;
            for a in 0..3 {
                let wave = |scale: f64, ph: &[f64]| {
                    harmonic_wave(scale * amp * axis_weight[a], freq, &recipe.harmonics, ph, t)
                };
                accel[a] = accel_gain * wave(recipe.accel_amp, &accel_phases[a]);
                gyro[a] = gyro_gain * wave(recipe.gyro_amp, &gyro_phases[a]);
                mag[a] = mag_gain * (mag[a] + wave(recipe.mag_amp, &mag_phases[a]));
            }
            accel[2] += GRAVITY;
            if let Some(l) = location {
                accel[2] +=
                    l.marker_amp * (std::f64::consts::TAU * l.marker_hz * t + marker_phase).sin();
            }
            let pressure = base_pressure
                + recipe.pressure_drift * t / 5.0
                + harmonic_wave(
                    amp * recipe.pressure_amp,
                    freq,
                    &recipe.harmonics[..1],
                    &pressure_phase,
                    t,
                );

            let body = |v: [f64; 3]| derotate(Vec3::new(v[0], v[1], v[2]), &r);
            let a = body(accel);
            let m = body(mag);
            let to_f32 = |v: [f64; 3], scale: f64, rng: &mut HarRng| {
                [0, 1, 2].map(|k| (v[k] + noise(scale, rng)) as f32)
            };
            Ok(RawFrame {
                accelerometer: to_f32(a.to_array(), 1.0, rng),
                gyroscope: to_f32(gyro, 0.3, rng),
                magnetometer: to_f32(m.to_array(), 1.0, rng),
                pressure: (pressure + noise(0.01, rng)) as f32,
                orientation: q.to_wxyz_f32(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RawSample::new(
        frames,
        recipe.activity,
        location.map(|l| l.location),
        Some(user.user),
    )
}

/// Uniform on the unit 3-sphere (normalized 4-D Gaussian).
fn random_unit_quaternion(rng: &mut HarRng) -> Quaternion {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let q = Quaternion::new(
            normal.sample(rng),
            normal.sample(rng),
            normal.sample(rng),
            normal.sample(rng),
        );
        if let Ok(q) = q.normalized() {
            return q;
        }
    }
}
