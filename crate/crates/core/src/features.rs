//! Wavelet-domain statistical features and the z-score normalizer.
//!
//! A record maps to 288 values: for each of the 6 channels and each of the
//! 6 subbands, eight statistics. The flat index is
//! `channel * 48 + subband * 8 + stat`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{EventClass, WaveformRecord, CHANNELS, CHANNEL_NAMES};
use crate::wavelet::{wavedec5, WaveletFilters, SUBBAND_NAMES};

pub const STATS: usize = 8;
pub const SUBBANDS: usize = 6;
pub const FEATURE_COUNT: usize = CHANNELS * SUBBANDS * STATS;
pub const STAT_NAMES: [&str; STATS] = ["mean", "sd", "rms", "energy", "skewness", "kurtosis", "entropy", "maxabs"];

/// Variance and energy below this are treated as zero by the guarded statistics.
const TINY: f64 = 1e-24;

/// Minimum standard deviation used by [`Normalizer`].
pub const SD_FLOOR: f64 = 1e-12;

pub fn feature_index(channel: usize, subband: usize, stat: usize) -> usize {
    channel * SUBBANDS * STATS + subband * STATS + stat
}

/// Human-readable feature name such as `Ia_D3_kurtosis`.
pub fn feature_label(index: usize) -> String {
    let channel = index / (SUBBANDS * STATS);
    let subband = index / STATS % SUBBANDS;
    let stat = index % STATS;
    format!("{}_{}_{}", CHANNEL_NAMES[channel], SUBBAND_NAMES[subband], STAT_NAMES[stat])
}

/// Mean, sd, rms, energy, skewness, kurtosis, Shannon entropy and max |c|,
/// all with population (1/n) moments. Kurtosis is non-excess.
pub fn subband_stats(c: &[f64]) -> Result<[f64; STATS]> {
    if c.is_empty() {
        return Err(Error::invalid("statistics of an empty coefficient array"));
    }
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    let mut energy = 0.0;
    let mut maxabs = 0.0f64;
    for &v in c {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        energy += v * v;
        maxabs = maxabs.max(v.abs());
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;

    let (skewness, kurtosis) = if m2 < TINY {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    };
    let entropy = if energy < TINY {
        0.0
    } else {
        -c.iter()
            .map(|v| v * v / energy)
            .filter(|&p| p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    };
    Ok([mean, m2.sqrt(), (energy / n).sqrt(), energy, skewness, kurtosis, entropy, maxabs])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub record_id: u64,
    pub label: EventClass,
    pub values: Vec<f64>,
}

pub fn extract_features(record: &WaveformRecord, filters: &WaveletFilters) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(FEATURE_COUNT);
    for channel in record.channels() {
        let bands = wavedec5(channel, filters)?;
        for band in bands.bands() {
            values.extend_from_slice(&subband_stats(band)?);
        }
    }
    debug_assert_eq!(values.len(), FEATURE_COUNT);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("record {} produced a non-finite feature", record.id)));
    }
    Ok(FeatureVector {
        record_id: record.id,
        label: record.label,
        values,
    })
}

/// Per-feature z-score transform fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Normalizer {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::invalid("cannot fit a normalizer on an empty set"))?;
        let dim = first.as_ref().len();
        if dim == 0 {
            return Err(Error::invalid("cannot fit a normalizer on zero-dimensional rows"));
        }
        if rows.iter().any(|r| r.as_ref().len() != dim) {
            return Err(Error::invalid("rows have inconsistent dimensions"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.as_ref()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let sd = var.into_iter().map(|s| (s / n).sqrt().max(SD_FLOOR)).collect();
        Ok(Self { mean, sd })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::invalid(format!(
                "vector has dimension {}, normalizer expects {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(v.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{sample_params, WaveformRecord};
    use crate::wavelet::db4_filters;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn constant_vector_stats() {
        let s = subband_stats(&[1.0; 4]).unwrap();
        let expect = [1.0, 0.0, 1.0, 4.0, 0.0, 0.0, 4f64.ln(), 1.0];
        for (a, b) in s.iter().zip(expect) {
            assert!(close(*a, b, 1e-12), "{s:?}");
        }
    }

    #[test]
    fn spike_stats() {
        let s = subband_stats(&[0.0, 0.0, 2.0, 0.0]).unwrap();
        let expect = [
            0.5,
            0.75f64.sqrt(),
            1.0,
            4.0,
            2.0 / 3f64.sqrt(),
            7.0 / 3.0,
            0.0,
            2.0,
        ];
        for (a, b) in s.iter().zip(expect) {
            assert!(close(*a, b, 1e-12), "{s:?}");
        }
    }

    #[test]
    fn zero_and_empty() {
        assert_eq!(subband_stats(&[0.0; 32]).unwrap(), [0.0; 8]);
        assert!(subband_stats(&[]).is_err());
    }

    #[test]
    fn ordering_and_labels() {
        assert_eq!(feature_index(3, 2, 5), 3 * 48 + 2 * 8 + 5);
        assert_eq!(feature_label(0), "Va_D1_mean");
        assert_eq!(feature_label(287), "Ic_A5_maxabs");
        assert_eq!(feature_label(feature_index(4, 5, 6)), "Ib_A5_entropy");
    }

    #[test]
    fn zero_record_gives_zero_features() {
        let f = db4_filters().unwrap();
        let p = sample_params(EventClass::AG, 0, 0);
        let r = WaveformRecord::new(0, EventClass::AG, p, vec![0.0; 6000]).unwrap();
        let fv = extract_features(&r, &f).unwrap();
        assert_eq!(fv.values, vec![0.0; FEATURE_COUNT]);
    }

    #[test]
    fn single_channel_confined_to_its_block() {
        let f = db4_filters().unwrap();
        let mut samples = vec![0.0; 6000];
        for n in 0..1000 {
            samples[3 * 1000 + n] = (n as f64 * 0.0785).sin() * 100.0 + (n % 7) as f64;
        }
        let r = WaveformRecord::new(5, EventClass::AB, sample_params(EventClass::AB, 0, 0), samples).unwrap();
        let fv = extract_features(&r, &f).unwrap();
        for (i, v) in fv.values.iter().enumerate() {
            if i / 48 == 3 {
                continue;
            }
            assert_eq!(*v, 0.0, "feature {i}");
        }
        assert!(fv.values[144..192].iter().any(|&v| v != 0.0));
        assert_eq!(fv.record_id, 5);
    }

    #[test]
    fn normalizer_two_point_and_constant() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let n = Normalizer::fit(&rows).unwrap();
        assert_eq!(n.mean, vec![2.0, 5.0]);
        assert_eq!(n.sd, vec![1.0, SD_FLOOR]);
        assert_eq!(n.apply(&rows[0]).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(n.apply(&rows[1]).unwrap(), vec![1.0, 0.0]);
        assert!(n.apply(&[1.0]).is_err());
        assert!(Normalizer::fit::<Vec<f64>>(&[]).is_err());
    }
}
