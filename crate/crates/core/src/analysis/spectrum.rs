//! Magnitude spectra of uniformly sampled signals.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use super::series::TimeSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("spectrum needs a uniform time grid")]
    NonUniform,
    #[error("spectrum needs at least 4 samples (got {0})")]
    TooShort(usize),
    #[error("zero-pad factor must be at least 1")]
    BadPadding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Window {
    Rectangular,
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// MHz for t in µs.
    pub freq_mhz: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Fourier resolution `1 / (N·dt)` of the unpadded record.
    pub resolution_mhz: f64,
    /// Spacing of the padded frequency axis.
    pub bin_mhz: f64,
}

impl Spectrum {
    /// Moves the origin of the frequency axis to `origin_mhz`.
    pub fn relative_to(mut self, origin_mhz: f64) -> Self {
        for f in &mut self.freq_mhz {
            *f -= origin_mhz;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub freq_mhz: f64,
    pub magnitude: f64,
}

/// One-sided magnitude spectrum of the mean-subtracted signal, rectangular window.
pub fn fft_spectrum(series: &TimeSeries, zero_pad: usize) -> Result<Spectrum, SpectrumError> {
    fft_spectrum_windowed(series, zero_pad, Window::Rectangular)
}

pub fn fft_spectrum_windowed(series: &TimeSeries, zero_pad: usize, window: Window) -> Result<Spectrum, SpectrumError> {
    let n = series.len();
    if n < 4 {
        return Err(SpectrumError::TooShort(n));
    }
    if zero_pad < 1 {
        return Err(SpectrumError::BadPadding);
    }
    let dt = series.uniform_step(1e-6).ok_or(SpectrumError::NonUniform)?;
    let mean = series.mean();
    let npad = n * zero_pad;
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); npad];
    for (i, &y) in series.y.iter().enumerate() {
        let w = match window {
            Window::Rectangular => 1.0,
            Window::Hann => 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos(),
        };
        buf[i] = Complex::new((y - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(npad).process(&mut buf);
    let bin = 1.0 / (npad as f64 * dt);
    let half = npad / 2 + 1;
    Ok(Spectrum {
        freq_mhz: (0..half).map(|k| k as f64 * bin).collect(),
        magnitude: buf[..half].iter().map(|c| c.norm() / n as f64).collect(),
        resolution_mhz: 1.0 / (n as f64 * dt),
        bin_mhz: bin,
    })
}

/// Local maxima above `min_rel` × the global maximum, with parabolic
/// interpolation of position and height. Sorted by frequency.
pub fn find_peaks(spec: &Spectrum, min_rel: f64) -> Vec<Peak> {
    let m = &spec.magnitude;
    let top = m.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 || m.len() < 3 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for k in 1..m.len() - 1 {
        if m[k] > m[k - 1] && m[k] >= m[k + 1] && m[k] >= min_rel * top {
            let (a, b, c) = (m[k - 1], m[k], m[k + 1]);
            let denom = a - 2.0 * b + c;
            let delta = if denom != 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
            let step = spec.freq_mhz[k + 1] - spec.freq_mhz[k];
            out.push(Peak { freq_mhz: spec.freq_mhz[k] + delta * step, magnitude: b - 0.25 * (a - c) * delta });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(f: f64, n: usize, dt: f64) -> TimeSeries {
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let y = t.iter().map(|&t| 0.5 + 0.5 * (std::f64::consts::TAU * f * t).cos()).collect();
        TimeSeries::new(t, y).unwrap()
    }

    #[test]
    fn single_cosine_peak() {
        let s = cosine(2.16, 500, 0.02);
        let spec = fft_spectrum(&s, 4).unwrap();
        let peaks = find_peaks(&spec, 0.5);
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].freq_mhz - 2.16).abs() < spec.resolution_mhz);
    }

    #[test]
    fn zero_padding_keeps_location() {
        let s = cosine(1.37, 300, 0.05);
        let a = find_peaks(&fft_spectrum_windowed(&s, 1, Window::Hann).unwrap(), 0.5)[0].freq_mhz;
        let b = find_peaks(&fft_spectrum_windowed(&s, 16, Window::Hann).unwrap(), 0.5)[0].freq_mhz;
        assert!((a - b).abs() < 1.0 / (300.0 * 0.05));
    }

    #[test]
    fn flat_and_errors() {
        let t: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let s = TimeSeries::new(t.clone(), vec![0.0; 16]).unwrap();
        let spec = fft_spectrum(&s, 2).unwrap();
        assert!(spec.magnitude.iter().all(|&m| m == 0.0));
        assert!(find_peaks(&spec, 0.1).is_empty());
        let mut t2 = t;
        t2[5] += 0.3;
        let s = TimeSeries::new(t2, vec![0.0; 16]).unwrap();
        assert_eq!(fft_spectrum(&s, 1), Err(SpectrumError::NonUniform));
    }

    #[test]
    fn relative_axis() {
        let s = cosine(2.0, 64, 0.1);
        let spec = fft_spectrum(&s, 1).unwrap().relative_to(1.0);
        assert_eq!(spec.freq_mhz[0], -1.0);
    }
}
