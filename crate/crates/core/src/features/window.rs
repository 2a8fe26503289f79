use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::{DerotatedFrame, DerotatedSample, SAMPLE_FRAMES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSpec {
    pub window_len: usize,
    pub n_windows: usize,
    pub stride: usize,
}

impl Default for WindowSpec {
    /// 21 windows of 100 frames, stride 20: exactly tiles 500 frames.
    fn default() -> Self {
        Self {
            window_len: 100,
            n_windows: 21,
            stride: 20,
        }
    }
}

impl WindowSpec {
    /// Frames spanned by the windows.
    pub fn span(&self) -> usize {
        (self.n_windows.saturating_sub(1)) * self.stride + self.window_len
    }

    /// Checks the spec against a recording of `frames` frames.
    pub fn check(&self, frames: usize) -> Result<()> {
        if self.stride == 0 || self.window_len < 2 || self.n_windows == 0 || self.span() != frames {
            return Err(Error::SpecMismatch {
                window_len: self.window_len,
                n_windows: self.n_windows,
                stride: self.stride,
                frames,
            });
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check(SAMPLE_FRAMES)
    }

    pub fn ranges(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        (0..self.n_windows).map(move |i| i * self.stride..i * self.stride + self.window_len)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Window<'a> {
    pub start: usize,
    pub frames: &'a [DerotatedFrame],
}

pub fn segment<'a>(sample: &'a DerotatedSample, spec: &WindowSpec) -> Result<Vec<Window<'a>>> {
    spec.check(sample.frames.len())?;
    Ok(spec
        .ranges()
        .map(|r| Window {
            start: r.start,
            frames: &sample.frames[r],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::Activity;

    fn sample() -> DerotatedSample {
        let frames = (0..SAMPLE_FRAMES)
            .map(|i| DerotatedFrame {
                pressure: i as f32,
                ..Default::default()
            })
            .collect();
        DerotatedSample {
            frames,
            activity: Activity::Run,
            location: None,
            user: None,
        }
    }

    #[test]
    fn default_windows_cover_expected_frames() {
        let s = sample();
        let w = segment(&s, &WindowSpec::default()).unwrap();
        assert_eq!(w.len(), 21);
        assert_eq!(w[0].start, 0);
        assert_eq!(w[0].frames.len(), 100);
        assert_eq!(w[20].start, 400);
        assert_eq!(w[20].frames.last().unwrap().pressure, 499.0);
    }

    #[test]
    fn single_full_window() {
        let s = sample();
        let spec = WindowSpec {
            window_len: 500,
            n_windows: 1,
            stride: 1,
        };
        let w = segment(&s, &spec).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].frames, &s.frames[..]);
    }

    #[test]
    fn inconsistent_spec_rejected() {
        let s = sample();
        for spec in [
            WindowSpec {
                window_len: 100,
                n_windows: 21,
                stride: 19,
            },
            WindowSpec {
                window_len: 100,
                n_windows: 0,
                stride: 20,
            },
            WindowSpec {
                window_len: 500,
                n_windows: 1,
                stride: 0,
            },
        ] {
            assert!(matches!(
                segment(&s, &spec),
                Err(Error::SpecMismatch { .. })
            ));
        }
    }

    #[test]
    fn windows_tile_with_fixed_overlap() {
        let spec = WindowSpec::default();
        let ranges: Vec<_> = spec.ranges().collect();
        let mut covered = vec![false; SAMPLE_FRAMES];
        for r in &ranges {
            covered[r.clone()].iter_mut().for_each(|c| *c = true);
        }
        assert!(covered.iter().all(|&c| c));
        for pair in ranges.windows(2) {
            assert_eq!(pair[0].end - pair[1].start, spec.window_len - spec.stride);
        }
    }
}
