//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use pqbench::synth::{fault_topology, CircuitConfig, EventClass, SynthParams};
use pqbench::wavelet::WaveletFilters;

/// Fraction of a window's energy at `freq`, by a single-bin Goertzel
/// evaluation. The window must hold a whole number of periods.
pub fn goertzel_fraction(x: &[f64], freq: f64, fs: f64) -> f64 {
    let n = x.len() as f64;
    let w = 2.0 * std::f64::consts::PI * freq / fs;
    let coeff = 2.0 * w.cos();
    let (mut s1, mut s2) = (0.0, 0.0);
    for &v in x {
        let s0 = v + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    let power = s1 * s1 + s2 * s2 - coeff * s1 * s2;
    let energy: f64 = x.iter().map(|v| v * v).sum();
    2.0 * power / (n * energy)
}

/// Amplitude of the `freq` component over a whole-period window.
pub fn dft_amplitude(x: &[f64], freq: f64, fs: f64) -> f64 {
    let n = x.len() as f64;
    let w = 2.0 * std::f64::consts::PI * freq / fs;
    let (mut re, mut im) = (0.0, 0.0);
    for (k, &v) in x.iter().enumerate() {
        re += v * (w * k as f64).cos();
        im -= v * (w * k as f64).sin();
    }
    2.0 * (re * re + im * im).sqrt() / n
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Steady-state phasors of the two-bus circuit at the system frequency,
/// solved with plain complex Gaussian elimination. Returns the peak phasors
/// of the sending-bus voltages and breaker currents.
pub struct PhasorSolution {
    pub v_send: [Complex64; 3],
    pub i_line: [Complex64; 3],
}

pub fn phasor_oracle(cfg: &CircuitConfig, class: EventClass, p: &SynthParams, faulted: bool) -> PhasorSolution {
    let w = 2.0 * std::f64::consts::PI * cfg.frequency;
    let j = Complex64::new(0.0, 1.0);
    let z_rl = |r: f64, l: f64| Complex64::new(r, w * l);
    let split = p.fault.as_ref().map_or(0.5, |f| f.location_fraction);
    let zs = z_rl(cfg.source_resistance, cfg.source_inductance);
    let z1 = z_rl(cfg.line_resistance * split, cfg.line_inductance * split);
    let z2 = z_rl(cfg.line_resistance * (1.0 - split), cfg.line_inductance * (1.0 - split));

    // Nodes: S 0-2, F 3-5, L 6-8, load neutral 9, fault common 10.
    let n = 11;
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    let link = |y: &mut Vec<Vec<Complex64>>, a: usize, b: Option<usize>, z: Complex64| {
        let g = 1.0 / z;
        y[a][a] += g;
        if let Some(b) = b {
            y[b][b] += g;
            y[a][b] -= g;
            y[b][a] -= g;
        }
    };
    for ph in 0..3 {
        let k = p.load.perturbation[ph];
        let emf = cfg.phase_peak() * (j * (-2.0 * std::f64::consts::PI / 3.0 * ph as f64)).exp();
        link(&mut y, ph, None, zs);
        rhs[ph] += emf / zs;
        link(&mut y, ph, Some(3 + ph), z1);
        link(&mut y, 3 + ph, Some(6 + ph), z2);
        link(&mut y, 6 + ph, None, 1.0 / (j * w * p.load.capacitance * k));
        link(&mut y, 6 + ph, Some(9), z_rl(p.load.resistance * k, p.load.inductance * k));
    }
    let spec = fault_topology(class);
    let fault_active = faulted && spec.phase_count() > 0;
    if fault_active {
        let f = p.fault.as_ref().unwrap();
        for ph in 0..3 {
            if spec.phases[ph] {
                link(&mut y, 3 + ph, Some(10), Complex64::new(f.phase_fault_resistance, 0.0));
            }
        }
        if spec.grounded {
            link(&mut y, 10, None, Complex64::new(f.ground_resistance, 0.0));
        }
    }
    let size = if fault_active { 11 } else { 10 };
    y.truncate(size);
    for row in &mut y {
        row.truncate(size);
    }
    rhs.truncate(size);
    let v = complex_solve(y, rhs);
    PhasorSolution {
        v_send: [v[0], v[1], v[2]],
        i_line: [0, 1, 2].map(|ph| (v[ph] - v[3 + ph]) / z1),
    }
}

pub fn complex_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Vec<Complex64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].norm().total_cmp(&a[s][col].norm())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                let t = a[col][c];
                a[r][c] -= f * t;
            }
            let t = b[col];
            b[r] -= f * t;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    x
}

/// Five-level periodized DWT by direct double loops over the symmetric
/// extension, written without sharing code with the library.
pub fn naive_wavedec(x: &[f64], f: &WaveletFilters) -> Vec<Vec<f64>> {
    assert_eq!(x.len(), 1000);
    let mut padded = Vec::with_capacity(1024);
    for k in (1..=12).rev() {
        padded.push(x[k]);
    }
    padded.extend_from_slice(x);
    for k in 0..12 {
        padded.push(x[998 - k]);
    }
    let mut bands = Vec::new();
    let mut cur = padded;
    for _ in 0..5 {
        let len = cur.len();
        let half = len / 2;
        let mut a = vec![0.0; half];
        let mut d = vec![0.0; half];
        for k in 0..half {
            for m in 0..8 {
                let idx = (2 * k + m) % len;
                a[k] += f.lowpass[m] * cur[idx];
                d[k] += f.highpass[m] * cur[idx];
            }
        }
        bands.push(d);
        cur = a;
    }
    bands.push(cur);
    bands
}

/// The eight subband statistics computed one at a time, straight from the
/// definitions.
pub fn naive_stats(c: &[f64]) -> [f64; 8] {
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    let m = |p: i32| c.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
    let (m2, m3, m4) = (m(2), m(3), m(4));
    let energy: f64 = c.iter().map(|v| v * v).sum();
    let skew = if m2 < 1e-24 { 0.0 } else { m3 / m2.powf(1.5) };
    let kurt = if m2 < 1e-24 { 0.0 } else { m4 / (m2 * m2) };
    let mut entropy = 0.0;
    if energy >= 1e-24 {
        for v in c {
            let p = v * v / energy;
            if p > 0.0 {
                entropy -= p * p.ln();
            }
        }
    }
    let maxabs = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    [mean, m2.sqrt(), (energy / n).sqrt(), energy, skew, kurt, entropy, maxabs]
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Best dual objective over a grid of step `h` on the first `n - 1`
/// multipliers; the last one is fixed by the equality constraint.
pub fn grid_dual_max(k: &[f64], y: &[f64], c: f64, steps: usize) -> f64 {
    let n = y.len();
    let h = c / steps as f64;
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; n - 1];
    let mut alpha = vec![0.0; n];
    loop {
        let mut s = 0.0;
        for i in 0..n - 1 {
            alpha[i] = idx[i] as f64 * h;
            s += y[i] * alpha[i];
        }
        alpha[n - 1] = -s * y[n - 1];
        if alpha[n - 1] >= -1e-12 && alpha[n - 1] <= c + 1e-12 {
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += alpha[i] * alpha[j] * q(i, j);
                }
            }
            best = best.max(alpha.iter().sum::<f64>() - 0.5 * quad);
        }
        let mut d = 0;
        loop {
            if d == n - 1 {
                return best;
            }
            idx[d] += 1;
            if idx[d] <= steps {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

pub fn dual_objective(k: &[f64], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i * n + j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}
