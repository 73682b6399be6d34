//! Five-level periodized discrete wavelet transform with the 8-tap
//! Daubechies filter (4 vanishing moments, "db4").

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FILTER_LEN: usize = 8;
pub const LEVELS: usize = 5;
pub const INPUT_LEN: usize = 1000;
pub const PADDED_LEN: usize = 1024;
const PAD: usize = (PADDED_LEN - INPUT_LEN) / 2;

/// Subband order used throughout the crate: D1..D5 then A5.
pub const SUBBAND_NAMES: [&str; 6] = ["D1", "D2", "D3", "D4", "D5", "A5"];
pub const SUBBAND_LENS: [usize; 6] = [512, 256, 128, 64, 32, 32];

// Scaling filter, Daubechies (1992) table for N = 4.
const DB4_LOWPASS: [f64; FILTER_LEN] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_7,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_9,
    -0.187_034_811_719_093_1,
    0.030_841_381_835_560_7,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_0,
];

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilters {
    pub lowpass: [f64; FILTER_LEN],
    pub highpass: [f64; FILTER_LEN],
}

impl WaveletFilters {
    /// Builds the quadrature-mirror pair from a scaling filter and checks it.
    pub fn from_lowpass(lowpass: [f64; FILTER_LEN]) -> Result<Self> {
        let highpass = std::array::from_fn(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * lowpass[FILTER_LEN - 1 - k]
        });
        let f = Self { lowpass, highpass };
        f.self_check()?;
        Ok(f)
    }

    fn self_check(&self) -> Result<()> {
        let h = &self.lowpass;
        let fail = |what: &str, err: f64| Err(Error::Config(format!("wavelet filter {what} violated by {err:.3e}")));

        let dc = h.iter().sum::<f64>() - std::f64::consts::SQRT_2;
        if dc.abs() > 1e-12 {
            return fail("sum = sqrt(2)", dc);
        }
        for m in 0..FILTER_LEN / 2 {
            let dot: f64 = (0..FILTER_LEN - 2 * m).map(|k| h[k] * h[k + 2 * m]).sum();
            let err = dot - if m == 0 { 1.0 } else { 0.0 };
            if err.abs() > 1e-12 {
                return fail("orthonormality", err);
            }
        }
        for p in 0..4 {
            let moment: f64 = (0..FILTER_LEN)
                .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * (k as f64).powi(p) * h[k])
                .sum();
            if moment.abs() > 1e-10 {
                return fail("vanishing moment", moment);
            }
        }
        Ok(())
    }
}

/// The db4 filter pair, validated on construction.
pub fn db4_filters() -> Result<WaveletFilters> {
    WaveletFilters::from_lowpass(DB4_LOWPASS)
}

/// D1..D5 detail and A5 approximation coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubbandSet {
    pub details: [Vec<f64>; LEVELS],
    pub approximation: Vec<f64>,
}

impl SubbandSet {
    /// Subbands in canonical order D1, D2, D3, D4, D5, A5.
    pub fn bands(&self) -> impl Iterator<Item = &[f64]> {
        self.details
            .iter()
            .map(Vec::as_slice)
            .chain(std::iter::once(self.approximation.as_slice()))
    }

    pub fn energy(&self) -> f64 {
        self.bands().flatten().map(|c| c * c).sum()
    }
}

/// Whole-sample symmetric extension of a 1000-sample signal to 1024 samples.
pub fn pad_to_1024(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != INPUT_LEN {
        return Err(Error::invalid(format!("expected {INPUT_LEN} samples, got {}", x.len())));
    }
    let mut out = Vec::with_capacity(PADDED_LEN);
    out.extend((1..=PAD).rev().map(|i| x[i]));
    out.extend_from_slice(x);
    out.extend((1..=PAD).map(|i| x[INPUT_LEN - 1 - i]));
    Ok(out)
}

/// One periodized convolution-decimation stage.
pub fn analysis_step(x: &[f64], filters: &WaveletFilters) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = x.len();
    if !len.is_multiple_of(2) || len < FILTER_LEN {
        return Err(Error::invalid(format!("analysis step needs an even length >= {FILTER_LEN}, got {len}")));
    }
    let half = len / 2;
    let mut approx = vec![0.0; half];
    let mut detail = vec![0.0; half];
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for m in 0..FILTER_LEN {
            let v = x[(2 * k + m) % len];
            a += filters.lowpass[m] * v;
            d += filters.highpass[m] * v;
        }
        approx[k] = a;
        detail[k] = d;
    }
    Ok((approx, detail))
}

/// Pads to 1024 samples and runs five analysis stages.
pub fn wavedec5(x: &[f64], filters: &WaveletFilters) -> Result<SubbandSet> {
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite sample at index {i}")));
    }
    let mut approx = pad_to_1024(x)?;
    let mut details: [Vec<f64>; LEVELS] = Default::default();
    for detail in details.iter_mut() {
        let (a, d) = analysis_step(&approx, filters)?;
        *detail = d;
        approx = a;
    }
    Ok(SubbandSet {
        details,
        approximation: approx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn filters() -> WaveletFilters {
        db4_filters().unwrap()
    }

    #[test]
    fn filter_invariants() {
        let f = filters();
        assert!((f.lowpass.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-12);
        assert!((f.lowpass.iter().map(|h| h * h).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(f.highpass.iter().sum::<f64>().abs() < 1e-12);
        let third: f64 = (0..8)
            .map(|k| (-1f64).powi(k as i32) * (k as f64).powi(3) * f.lowpass[k])
            .sum();
        assert!(third.abs() < 1e-10);
        for k in 0..8 {
            assert_eq!(f.highpass[k], (-1f64).powi(k as i32) * f.lowpass[7 - k]);
        }
    }

    #[test]
    fn corrupted_filter_rejected() {
        let mut h = DB4_LOWPASS;
        h[3] += 1e-6;
        assert!(matches!(WaveletFilters::from_lowpass(h), Err(Error::Config(_))));
    }

    #[test]
    fn padding_contract() {
        let ramp: Vec<f64> = (0..1000).map(|n| n as f64).collect();
        let p = pad_to_1024(&ramp).unwrap();
        assert_eq!(p.len(), 1024);
        assert_eq!(p[0], 12.0);
        assert_eq!(p[1023], 987.0);
        // Tent shape: descending 12..1, then 0..999, then 998..987.
        for (i, v) in p.iter().enumerate() {
            let expect = if i < 12 {
                12 - i
            } else if i < 1012 {
                i - 12
            } else {
                998 - (i - 1012)
            };
            assert_eq!(*v, expect as f64, "index {i}");
        }
        let constant = vec![3.5; 1000];
        assert!(pad_to_1024(&constant).unwrap().iter().all(|&v| v == 3.5));
        assert!(pad_to_1024(&[0.0; 999]).is_err());
    }

    #[test]
    fn analysis_step_edge_cases() {
        let f = filters();
        let (a, d) = analysis_step(&[0.0; 16], &f).unwrap();
        assert!(a.iter().chain(&d).all(|&v| v == 0.0));
        let (a, d) = analysis_step(&[1.0; 16], &f).unwrap();
        assert!(a.iter().all(|v| (v - 2f64.sqrt()).abs() < 1e-12));
        assert!(d.iter().all(|v| v.abs() < 1e-12));
        assert!(analysis_step(&[1.0; 15], &f).is_err());
        assert!(analysis_step(&[1.0; 6], &f).is_err());
    }

    #[test]
    fn wavedec5_shapes_and_zero() {
        let f = filters();
        let s = wavedec5(&[0.0; 1000], &f).unwrap();
        let lens: Vec<usize> = s.bands().map(<[f64]>::len).collect();
        assert_eq!(lens, SUBBAND_LENS);
        assert!(s.bands().flatten().all(|&v| v == 0.0));
        let mut bad = vec![0.0; 1000];
        bad[10] = f64::NAN;
        assert!(wavedec5(&bad, &f).is_err());
    }

    proptest! {
        #[test]
        fn step_preserves_energy(x in proptest::collection::vec(-1e3f64..1e3, 64)) {
            let f = filters();
            let (a, d) = analysis_step(&x, &f).unwrap();
            let ein: f64 = x.iter().map(|v| v * v).sum();
            let eout: f64 = a.iter().chain(&d).map(|v| v * v).sum();
            prop_assert!((ein - eout).abs() <= 1e-10 * ein.max(1e-300));
        }
    }
}
