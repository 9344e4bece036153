//! Small 1-D signal helpers: zero-phase low-pass filtering, quantiles and
//! prominence-based peak picking.

use std::f64::consts::{PI, SQRT_2};

/// Second-order Butterworth low-pass section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Bilinear transform with frequency pre-warping. Returns `None` when the
    /// cutoff is not below Nyquist.
    pub fn butterworth_lowpass(cutoff_hz: f64, rate_hz: f64) -> Option<Self> {
        if !(cutoff_hz > 0.0 && cutoff_hz < 0.5 * rate_hz) {
            return None;
        }
        let k = (PI * cutoff_hz / rate_hz).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
        let b0 = k2 * norm;
        Some(Self { b: [b0, 2.0 * b0, b0], a: [2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm] })
    }

    /// Runs the section over `x` (transposed direct form II) starting from the
    /// steady state of a constant input equal to `x[0]`.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let Some(&x0) = x.first() else { return Vec::new() };
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let dc = (b0 + b1 + b2) / (1.0 + a1 + a2);
        let mut z2 = (b2 - a2 * dc) * x0;
        let mut z1 = (b1 - a1 * dc) * x0 + z2;
        x.iter()
            .map(|&xi| {
                let y = b0 * xi + z1;
                z1 = b1 * xi - a1 * y + z2;
                z2 = b2 * xi - a2 * y;
                y
            })
            .collect()
    }

    /// Forward-backward filtering with odd-extension padding: zero phase,
    /// squared magnitude response.
    pub fn filtfilt(&self, x: &[f64], padlen: usize) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = padlen.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
        let mut y = self.filter(&ext);
        y.reverse();
        let mut y = self.filter(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Zero-phase low-pass at `cutoff_hz`; passes the signal through unchanged if
/// the cutoff is not below Nyquist.
pub fn lowpass_zero_phase(x: &[f64], cutoff_hz: f64, rate_hz: f64) -> Vec<f64> {
    match Biquad::butterworth_lowpass(cutoff_hz, rate_hz) {
        Some(bq) => {
            let padlen = ((3.0 * rate_hz / cutoff_hz).ceil() as usize).max(9);
            bq.filtfilt(x, padlen)
        }
        None => x.to_vec(),
    }
}

/// Linear-interpolation quantile (`q` in [0, 1]) of unsorted data.
pub fn quantile(data: &[f64], q: f64) -> Option<f64> {
    if data.is_empty() {
        return None;
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn median(data: &[f64]) -> Option<f64> {
    quantile(data, 0.5)
}

/// Strict local maxima (plateaus report their left edge).
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < x.len() {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < x.len() && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < x.len() && x[j + 1] < x[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Topographic prominence of the peak at `idx`: height above the higher of
/// the two lowest points reachable before meeting a taller sample.
pub fn prominence(x: &[f64], idx: usize) -> f64 {
    let h = x[idx];
    let mut left_min = h;
    for &v in x[..idx].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[idx + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Removes peaks closer than `distance` samples to a taller kept peak.
/// Input and output are sorted by index.
pub fn enforce_distance(x: &[f64], peaks: &[usize], distance: usize) -> Vec<usize> {
    if distance <= 1 || peaks.len() < 2 {
        return peaks.to_vec();
    }
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| x[peaks[b]].total_cmp(&x[peaks[a]]).then(a.cmp(&b)));
    let mut keep = vec![true; peaks.len()];
    for &i in &order {
        if !keep[i] {
            continue;
        }
        for (j, k) in keep.iter_mut().enumerate() {
            if j != i && peaks[j].abs_diff(peaks[i]) < distance {
                *k = false;
            }
        }
    }
    peaks.iter().zip(keep).filter_map(|(&p, k)| k.then_some(p)).collect()
}
