//! Butterworth high-pass design and zero-phase second-order-section filtering.

use std::f64::consts::PI;

use crate::{Error, Result};

/// One biquad: `b0 b1 b2 / 1 a1 a2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Initial state of a transposed direct-form II section whose input has
    /// been constant at 1 forever.
    fn steady_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        // (I − Aᵀ) z = b[1:] − a[1:]·b0, with the companion matrix of a.
        let r0 = b1 - a1 * b0;
        let r1 = b2 - a2 * b0;
        let det = (1.0 + a1) + a2;
        let z0 = (r0 + r1) / det;
        let z1 = r1 - a2 * z0;
        [z0, z1]
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }
}

/// Digital Butterworth high-pass of even `order` as cascaded biquads,
/// unit gain at Nyquist.
pub fn butter_highpass(order: usize, cutoff_hz: f64, sample_rate: f64) -> Result<Vec<Biquad>> {
    if order == 0 || order % 2 != 0 {
        return Err(Error::invalid(format!(
            "filter order {order} must be even and positive"
        )));
    }
    let nyquist = sample_rate / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::invalid(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
        )));
    }
    let fs2 = 2.0 * sample_rate;
    let warped = fs2 * (PI * cutoff_hz / sample_rate).tan();
    let mut sections = Vec::with_capacity(order / 2);
    for k in 0..order / 2 {
        // Upper-half-plane prototype pole; its conjugate completes the pair.
        let theta = PI * (2 * k + 1 + order) as f64 / (2 * order) as f64;
        let (pr, pi) = (theta.cos(), theta.sin());
        // Low-pass to high-pass: s = ω / p.
        let mag2 = pr * pr + pi * pi;
        let (sr, si) = (warped * pr / mag2, -warped * pi / mag2);
        // Bilinear: z = (2fs + s) / (2fs − s).
        let (nr, ni) = (fs2 + sr, si);
        let (dr, di) = (fs2 - sr, -si);
        let d2 = dr * dr + di * di;
        let zr = (nr * dr + ni * di) / d2;
        let zi = (ni * dr - nr * di) / d2;
        let a1 = -2.0 * zr;
        let a2 = zr * zr + zi * zi;
        let gain = (1.0 - a1 + a2) / 4.0;
        sections.push(Biquad {
            b: [gain, -2.0 * gain, gain],
            a: [a1, a2],
        });
    }
    Ok(sections)
}

fn sosfilt(sos: &[Biquad], x: &mut [f64], zi: &[[f64; 2]]) {
    for (s, z0) in sos.iter().zip(zi) {
        let mut z = *z0;
        let [b0, b1, b2] = s.b;
        let [a1, a2] = s.a;
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + z[0];
            z[0] = b1 * xin - a1 * y + z[1];
            z[1] = b2 * xin - a2 * y;
            *v = y;
        }
    }
}

/// Forward-backward filtering with odd-reflection padding and steady-state
/// initial conditions, so the output has zero phase and no start-up step.
pub fn filtfilt(sos: &[Biquad], x: &[f64]) -> Vec<f64> {
    if x.len() < 2 || sos.is_empty() {
        return x.to_vec();
    }
    let pad = (3 * (2 * sos.len() + 1)).min(x.len() - 1);
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let mut zi = Vec::with_capacity(sos.len());
    let mut scale = 1.0;
    for s in sos {
        let z = s.steady_state();
        zi.push([z[0] * scale, z[1] * scale]);
        scale *= s.dc_gain();
    }
    let scaled = |z: &[[f64; 2]], v: f64| -> Vec<[f64; 2]> {
        z.iter().map(|s| [s[0] * v, s[1] * v]).collect()
    };

    let z = scaled(&zi, ext[0]);
    sosfilt(sos, &mut ext, &z);
    ext.reverse();
    let z = scaled(&zi, ext[0]);
    sosfilt(sos, &mut ext, &z);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Magnitude response of the cascade at `freq_hz`.
pub fn magnitude_response(sos: &[Biquad], freq_hz: f64, sample_rate: f64) -> f64 {
    let w = 2.0 * PI * freq_hz / sample_rate;
    let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
    sos.iter()
        .map(|s| {
            let nr = s.b[0] + s.b[1] * c1 + s.b[2] * c2;
            let ni = -(s.b[1] * s1 + s.b[2] * s2);
            let dr = 1.0 + s.a[0] * c1 + s.a[1] * c2;
            let di = -(s.a[0] * s1 + s.a[1] * s2);
            ((nr * nr + ni * ni) / (dr * dr + di * di)).sqrt()
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_shape() {
        let sos = butter_highpass(4, 2.0, 250.0).unwrap();
        assert_eq!(sos.len(), 2);
        assert!((magnitude_response(&sos, 125.0, 250.0) - 1.0).abs() < 1e-12);
        assert!((magnitude_response(&sos, 2.0, 250.0) - 0.5f64.sqrt()).abs() < 1e-9);
        assert!(magnitude_response(&sos, 0.0, 250.0) < 1e-12);
        assert!(magnitude_response(&sos, 0.5, 250.0) < 0.01);
    }

    #[test]
    fn design_errors() {
        assert!(butter_highpass(4, 125.0, 250.0).is_err());
        assert!(butter_highpass(3, 2.0, 250.0).is_err());
        assert!(butter_highpass(4, 0.0, 250.0).is_err());
    }

    #[test]
    fn constant_input_passes_as_zero() {
        let sos = butter_highpass(4, 2.0, 250.0).unwrap();
        let y = filtfilt(&sos, &vec![10.0; 1000]);
        assert!(y.iter().all(|v| v.abs() < 1e-9));
    }
}
