use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

pub const RAW_COLUMNS: usize = 76;
pub const NATIVE_RATE_HZ: f64 = 30.0;
pub const CUTOFF_HZ: f64 = 1.5;
pub const DECIMATION_FACTOR: usize = 6;
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Samples of odd-symmetric padding added at each end before forward-backward
/// filtering.
const PAD_LEN: usize = 12;

/// Shortest signal the zero-phase filter accepts.
pub const MIN_FILTER_LEN: usize = PAD_LEN + 1;

/// 1-based raw columns kept as features: per manipulator the tooltip
/// position, linear velocity and gripper angle.
pub const FEATURE_COLUMNS: [usize; 14] = [39, 40, 41, 51, 52, 53, 57, 58, 59, 60, 70, 71, 72, 76];

/// Selects the 14 patient-side manipulator features from a 76-column frame
/// matrix.
pub fn select_features(raw: &Array2<f64>) -> Result<Array2<f64>> {
    if raw.ncols() != RAW_COLUMNS {
        return Err(Error::Shape(format!(
            "expected {RAW_COLUMNS} kinematic columns, got {}",
            raw.ncols()
        )));
    }
    let cols: Vec<usize> = FEATURE_COLUMNS.iter().map(|c| c - 1).collect();
    Ok(raw.select(Axis(1), &cols))
}

/// Second-order section in transposed direct form II, normalized so a0 = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

/// Second-order Butterworth low-pass designed by the bilinear transform with
/// frequency pre-warping.
pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Biquad {
    let k = (std::f64::consts::PI * cutoff_hz / sample_rate_hz).tan();
    let sqrt2 = std::f64::consts::SQRT_2;
    let norm = 1.0 / (1.0 + sqrt2 * k + k * k);
    let b0 = k * k * norm;
    Biquad {
        b: [b0, 2.0 * b0, b0],
        a: [1.0, 2.0 * (k * k - 1.0) * norm, (1.0 - sqrt2 * k + k * k) * norm],
    }
}

impl Biquad {
    /// Filter state that makes a constant input of 1 a fixed point.
    fn steady_state(&self) -> [f64; 2] {
        [1.0 - self.b[0], self.b[2] - self.a[2]]
    }

    fn run(&self, x: &[f64]) -> Vec<f64> {
        let zi = self.steady_state();
        let (mut z1, mut z2) = (zi[0] * x[0], zi[1] * x[0]);
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        x.iter()
            .map(|&xn| {
                let y = b0 * xn + z1;
                z1 = b1 * xn - a1 * y + z2;
                z2 = b2 * xn - a2 * y;
                y
            })
            .collect()
    }
}

/// Forward-backward filtering with odd-reflection padding and steady-state
/// initial conditions. The magnitude response is |H|^2 with zero phase.
pub fn filtfilt(filter: &Biquad, x: ArrayView1<f64>) -> Result<Vec<f64>> {
    let n = x.len();
    if n < MIN_FILTER_LEN {
        return Err(Error::SignalTooShort { len: n, min: MIN_FILTER_LEN });
    }
    let (first, last) = (x[0], x[n - 1]);
    let mut ext = Vec::with_capacity(n + 2 * PAD_LEN);
    ext.extend((1..=PAD_LEN).rev().map(|i| 2.0 * first - x[i]));
    ext.extend(x.iter().copied());
    ext.extend((1..=PAD_LEN).map(|i| 2.0 * last - x[n - 1 - i]));

    let mut y = filter.run(&ext);
    y.reverse();
    let mut y = filter.run(&y);
    y.reverse();
    Ok(y[PAD_LEN..PAD_LEN + n].to_vec())
}

/// Zero-phase 1.5 Hz low-pass of every column of a 30 Hz signal.
pub fn lowpass_filter(signal: &Array2<f64>) -> Result<Array2<f64>> {
    lowpass_filter_with(signal, CUTOFF_HZ, NATIVE_RATE_HZ)
}

pub fn lowpass_filter_with(signal: &Array2<f64>, cutoff_hz: f64, sample_rate_hz: f64) -> Result<Array2<f64>> {
    let filter = butterworth_lowpass(cutoff_hz, sample_rate_hz);
    let mut out = Array2::zeros(signal.raw_dim());
    for (c, column) in signal.columns().into_iter().enumerate() {
        let filtered = filtfilt(&filter, column)?;
        for (dst, v) in out.column_mut(c).iter_mut().zip(filtered) {
            *dst = v;
        }
    }
    Ok(out)
}

/// Keeps rows `0, factor, 2*factor, ...` of the signal and the labels.
pub fn decimate<L: Clone>(signal: &Array2<f64>, labels: &[L], factor: usize) -> (Array2<f64>, Vec<L>) {
    let rows: Vec<usize> = (0..signal.nrows()).step_by(factor).collect();
    let kept = signal.select(Axis(0), &rows);
    let labels = labels.iter().step_by(factor).cloned().collect();
    (kept, labels)
}

/// Per-column standardization with population variance. Columns with
/// variance below the floor collapse to zero.
pub fn zscore(signal: &Array2<f64>) -> Array2<f64> {
    let n = signal.nrows() as f64;
    let mut out = signal.clone();
    for mut column in out.columns_mut() {
        let mean = column.sum() / n;
        let var = column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        if var < VARIANCE_FLOOR {
            column.fill(0.0);
        } else {
            let sd = var.sqrt();
            column.mapv_inplace(|v| (v - mean) / sd);
        }
    }
    out
}
