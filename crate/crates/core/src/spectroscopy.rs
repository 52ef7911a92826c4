//! Fourier spectroscopy of magnetisation time series and matching of the
//! extracted oscillation frequencies against the quasiparticle model lines
//! (masses and mass differences).

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::confinement::MassSpectrum;
use crate::evolve::{TimeSeries, TimeSeriesRow};

#[derive(Debug, Error)]
pub enum SpectroscopyError {
    #[error("analysis window [{t_min}, {t_max}] does not select at least two samples")]
    WindowOutOfRange { t_min: f64, t_max: f64 },
    #[error("series is not uniformly sampled (spacing deviation {0:.3e})")]
    NonUniformSampling(f64),
    #[error("pad factor must be at least 1")]
    BadPadFactor,
}

/// Observable column selected for the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    MzA,
    MzB,
    MxA,
    MxB,
    MyA,
    MyB,
    EntropyDensity,
}

impl Channel {
    pub fn extract(&self, row: &TimeSeriesRow) -> f64 {
        match self {
            Channel::MzA => row.mz_a,
            Channel::MzB => row.mz_b,
            Channel::MxA => row.mx_a,
            Channel::MxB => row.mx_b,
            Channel::MyA => row.my_a,
            Channel::MyB => row.my_b,
            Channel::EntropyDensity => row.s,
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mz_a" => Ok(Channel::MzA),
            "mz_b" => Ok(Channel::MzB),
            "mx_a" => Ok(Channel::MxA),
            "mx_b" => Ok(Channel::MxB),
            "my_a" => Ok(Channel::MyA),
            "my_b" => Ok(Channel::MyB),
            "s" => Ok(Channel::EntropyDensity),
            other => Err(format!("unknown channel `{}`", other)),
        }
    }
}

/// Window metadata recorded with every spectrum.
#[derive(Debug, Clone, Copy)]
pub struct WindowMeta {
    pub t_min: f64,
    pub t_max: f64,
    pub n_samples: usize,
    pub pad_factor: usize,
    pub dt: f64,
}

/// One-sided amplitude spectrum over angular frequency.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub omegas: Vec<f64>,
    pub amps: Vec<f64>,
    pub meta: WindowMeta,
}

pub(crate) fn raw_fft(values: &[f64]) -> Vec<C64> {
    let mut buf: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(buf.len());
    fft.process(&mut buf);
    buf
}

/// Restricts the series to `[t_min, t_max]`, subtracts the sample mean,
/// zero-pads by `pad_factor` and reports the one-sided amplitude spectrum
/// against angular frequency omega = 2 pi f. Amplitudes are normalised so a
/// unit-amplitude tone peaks near 1.
pub fn fft_spectrum(
    series: &TimeSeries,
    channel: Channel,
    t_min: f64,
    t_max: f64,
    pad_factor: usize,
) -> Result<Spectrum, SpectroscopyError> {
    if pad_factor == 0 {
        return Err(SpectroscopyError::BadPadFactor);
    }
    let eps = 1e-9;
    let rows: Vec<&TimeSeriesRow> = series
        .rows
        .iter()
        .filter(|r| r.t >= t_min - eps && r.t <= t_max + eps)
        .collect();
    let n = rows.len();
    if n < 2 {
        return Err(SpectroscopyError::WindowOutOfRange { t_min, t_max });
    }
    let dt = rows[1].t - rows[0].t;
    for w in rows.windows(2) {
        let step = w[1].t - w[0].t;
        let dev = (step - dt).abs();
        if dev > 1e-9 * dt.max(1.0) {
            return Err(SpectroscopyError::NonUniformSampling(dev));
        }
    }

    let mean = rows.iter().map(|r| channel.extract(r)).sum::<f64>() / n as f64;
    let mut values: Vec<f64> = rows.iter().map(|r| channel.extract(r) - mean).collect();
    values.resize(n * pad_factor, 0.0);
    let spectrum = raw_fft(&values);
    let n_pad = values.len();

    let mut omegas = Vec::with_capacity(n_pad / 2);
    let mut amps = Vec::with_capacity(n_pad / 2);
    for (k, x) in spectrum.iter().enumerate().take(n_pad / 2 + 1).skip(1) {
        omegas.push(2.0 * std::f64::consts::PI * k as f64 / (n_pad as f64 * dt));
        amps.push(2.0 * x.norm() / n as f64);
    }
    Ok(Spectrum {
        omegas,
        amps,
        meta: WindowMeta {
            t_min: rows[0].t,
            t_max: rows[n - 1].t,
            n_samples: n,
            pad_factor,
            dt,
        },
    })
}

/// A model oscillation line: a mass m_i or a mass difference |m_i - m_j|.
#[derive(Debug, Clone)]
pub struct ModelLine {
    pub label: String,
    pub omega: f64,
}

/// All 15 model lines of a mass spectrum: the five masses and the ten
/// pairwise differences.
pub fn model_lines(masses: &MassSpectrum) -> Vec<ModelLine> {
    let mut lines = Vec::with_capacity(15);
    for (i, m) in masses.masses.iter().enumerate() {
        lines.push(ModelLine { label: format!("m{}", i + 1), omega: *m });
    }
    for (i, j, d) in masses.differences() {
        lines.push(ModelLine { label: format!("m{},{}", j, i), omega: d });
    }
    lines
}

/// One extracted spectral peak, possibly annotated with a model line.
#[derive(Debug, Clone)]
pub struct Peak {
    pub omega: f64,
    pub amplitude: f64,
    pub matched: Option<ModelLine>,
    pub delta: Option<f64>,
}

/// Peaks sorted by amplitude, with the window's Rayleigh resolution.
#[derive(Debug, Clone)]
pub struct PeakReport {
    pub peaks: Vec<Peak>,
    pub omega_resolution: f64,
}

/// Local maxima above `rel_threshold` times the global maximum, with the
/// position refined by three-point parabolic interpolation.
pub fn extract_peaks(spec: &Spectrum, rel_threshold: f64) -> PeakReport {
    assert!(
        rel_threshold > 0.0 && rel_threshold < 1.0,
        "relative threshold must lie in (0, 1)"
    );
    let omega_resolution =
        2.0 * std::f64::consts::PI / (spec.meta.t_max - spec.meta.t_min).max(f64::MIN_POSITIVE);
    let n = spec.amps.len();
    let max_amp = spec.amps.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut peaks = Vec::new();
    if max_amp <= 0.0 {
        return PeakReport { peaks, omega_resolution };
    }
    let threshold = rel_threshold * max_amp;
    for k in 0..n {
        let y = spec.amps[k];
        if y < threshold {
            continue;
        }
        let left = if k > 0 { spec.amps[k - 1] } else { -f64::INFINITY };
        let right = if k + 1 < n { spec.amps[k + 1] } else { -f64::INFINITY };
        if y >= left && y > right {
            let bin = spec.omegas[1] - spec.omegas[0];
            let omega = if k > 0 && k + 1 < n {
                let denom = left - 2.0 * y + right;
                let delta = if denom.abs() > 1e-300 {
                    0.5 * (left - right) / denom
                } else {
                    0.0
                };
                spec.omegas[k] + delta.clamp(-0.5, 0.5) * bin
            } else {
                spec.omegas[k]
            };
            peaks.push(Peak { omega, amplitude: y, matched: None, delta: None });
        }
    }
    peaks.sort_by(|a, b| b.amplitude.partial_cmp(&a.amplitude).unwrap());
    PeakReport { peaks, omega_resolution }
}

/// Annotates each peak with the nearest model line among the masses and mass
/// differences if it lies within `tol`. One line may match several peaks.
pub fn match_masses(mut report: PeakReport, masses: &MassSpectrum, tol: f64) -> PeakReport {
    assert!(tol > 0.0);
    let lines = model_lines(masses);
    for peak in &mut report.peaks {
        let best = lines
            .iter()
            .min_by(|a, b| {
                (a.omega - peak.omega)
                    .abs()
                    .partial_cmp(&(b.omega - peak.omega).abs())
                    .unwrap()
            })
            .expect("model line list is nonempty");
        let delta = (best.omega - peak.omega).abs();
        if delta <= tol {
            peak.matched = Some(best.clone());
            peak.delta = Some(delta);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confinement::quasiparticle_masses;
    use crate::evolve::TimeSeries;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn series_from(mut f: impl FnMut(f64) -> f64, dt: f64, t_max: f64) -> TimeSeries {
        let mut series = TimeSeries::default();
        let n = (t_max / dt).round() as usize;
        for k in 0..=n {
            let t = k as f64 * dt;
            let v = f(t);
            series.rows.push(TimeSeriesRow {
                t,
                mz_a: v,
                mz_b: v,
                mx_a: 0.0,
                mx_b: 0.0,
                my_a: 0.0,
                my_b: 0.0,
                s: 0.0,
                max_bond: 1,
                cum_discarded: 0.0,
                bp_iters: 0,
            });
        }
        series
    }

    use crate::evolve::TimeSeriesRow;

    #[test]
    fn pure_tone_peaks_at_its_frequency() {
        let series = series_from(|t| (3.0 * t).cos(), 0.05, 100.0);
        let spec = fft_spectrum(&series, Channel::MzA, 10.0, 100.0, 4).unwrap();
        let report = extract_peaks(&spec, 0.1);
        assert!(!report.peaks.is_empty());
        let best = &report.peaks[0];
        assert!(
            (best.omega - 3.0).abs() < report.omega_resolution,
            "peak at {} (res {})",
            best.omega,
            report.omega_resolution
        );
        assert!((best.amplitude - 1.0).abs() < 0.1);
    }

    #[test]
    fn constant_series_is_silent_after_mean_subtraction() {
        let series = series_from(|_| 0.73, 0.05, 50.0);
        let spec = fft_spectrum(&series, Channel::MzA, 0.0, 50.0, 1).unwrap();
        for a in &spec.amps {
            assert!(*a < 1e-12);
        }
        let report = extract_peaks(&spec, 0.5);
        assert!(report.peaks.is_empty());
    }

    #[test]
    fn two_equal_tones_give_two_equal_peaks() {
        let series = series_from(|t| (4.0 * t).cos() + (6.0 * t).cos(), 0.05, 100.0);
        let spec = fft_spectrum(&series, Channel::MzA, 10.0, 100.0, 4).unwrap();
        let report = extract_peaks(&spec, 0.5);
        assert_eq!(report.peaks.len(), 2);
        let ratio = report.peaks[0].amplitude / report.peaks[1].amplitude;
        assert!((ratio - 1.0).abs() < 0.05, "amplitude ratio {}", ratio);
        let mut omegas: Vec<f64> = report.peaks.iter().map(|p| p.omega).collect();
        omegas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((omegas[0] - 4.0).abs() < report.omega_resolution);
        assert!((omegas[1] - 6.0).abs() < report.omega_resolution);
    }

    #[test]
    fn well_separated_tones_resolve_into_two_peaks() {
        let res = 2.0 * std::f64::consts::PI / 90.0;
        let w1 = 3.0;
        let w2 = 3.0 + 4.0 * res;
        let series = series_from(|t| (w1 * t).cos() + (w2 * t).cos(), 0.05, 100.0);
        let spec = fft_spectrum(&series, Channel::MzA, 10.0, 100.0, 4).unwrap();
        let report = extract_peaks(&spec, 0.3);
        assert_eq!(report.peaks.len(), 2);
    }

    #[test]
    fn noisy_tone_recovered_within_half_a_bin() {
        let mut r = ChaCha8Rng::seed_from_u64(2024);
        let w = 2.7;
        let mut noise = Vec::new();
        for _ in 0..4000 {
            noise.push(0.01 * r.gen_range(-1.0..1.0));
        }
        let mut k = 0usize;
        let series = series_from(
            move |t| {
                let v = (w * t).cos() + noise[k % noise.len()];
                k += 1;
                v
            },
            0.05,
            100.0,
        );
        let spec = fft_spectrum(&series, Channel::MzA, 10.0, 100.0, 4).unwrap();
        let report = extract_peaks(&spec, 0.5);
        assert_eq!(report.peaks.len(), 1);
        assert!((report.peaks[0].omega - w).abs() < 0.5 * report.omega_resolution);
    }

    #[test]
    fn random_tone_recovery_sweep() {
        let mut r = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let w = r.gen_range(0.5..8.0);
            let series = series_from(|t| (w * t).cos(), 0.05, 100.0);
            let spec = fft_spectrum(&series, Channel::MzA, 10.0, 100.0, 4).unwrap();
            let report = extract_peaks(&spec, 0.5);
            assert!(!report.peaks.is_empty());
            assert!(
                (report.peaks[0].omega - w).abs() < 0.5 * report.omega_resolution,
                "w = {}, found {}",
                w,
                report.peaks[0].omega
            );
        }
    }

    #[test]
    fn parseval_identity_without_padding() {
        let mut r = ChaCha8Rng::seed_from_u64(99);
        let samples: Vec<f64> = (0..1800).map(|_| r.gen_range(-1.0..1.0)).collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let centred: Vec<f64> = samples.iter().map(|x| x - mean).collect();
        let energy_time: f64 = centred.iter().map(|x| x * x).sum();
        let spectrum = raw_fft(&centred);
        let energy_freq: f64 =
            spectrum.iter().map(|z| z.norm_sqr()).sum::<f64>() / samples.len() as f64;
        assert!(
            (energy_time - energy_freq).abs() / energy_time < 1e-10,
            "{} vs {}",
            energy_time,
            energy_freq
        );
    }

    #[test]
    fn window_out_of_range_is_rejected() {
        let series = series_from(|t| t.cos(), 0.05, 10.0);
        assert!(matches!(
            fft_spectrum(&series, Channel::MzA, 50.0, 60.0, 1),
            Err(SpectroscopyError::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn non_uniform_sampling_is_rejected() {
        let mut series = series_from(|t| t.cos(), 0.05, 10.0);
        series.rows[5].t += 0.01;
        assert!(matches!(
            fft_spectrum(&series, Channel::MzA, 0.0, 10.0, 1),
            Err(SpectroscopyError::NonUniformSampling(_))
        ));
    }

    #[test]
    fn peaks_on_model_lines_match_exactly() {
        let masses = quasiparticle_masses(1.0, 0.2).unwrap();
        let m1 = masses.masses[0];
        let series = series_from(|t| (m1 * t).cos(), 0.05, 100.0);
        let spec = fft_spectrum(&series, Channel::MzA, 10.0, 100.0, 4).unwrap();
        let report = extract_peaks(&spec, 0.5);
        let report = match_masses(report, &masses, 2.0 * std::f64::consts::PI / 90.0);
        assert!(!report.peaks.is_empty());
        let p = &report.peaks[0];
        assert!(p.matched.is_some());
        assert_eq!(p.matched.as_ref().unwrap().label, "m1");
        assert!(p.delta.unwrap() < 2.0 * std::f64::consts::PI / 90.0);
    }

    #[test]
    fn empty_peak_list_matches_to_empty_report() {
        let masses = quasiparticle_masses(1.0, 0.2).unwrap();
        let report = PeakReport { peaks: Vec::new(), omega_resolution: 0.07 };
        let report = match_masses(report, &masses, 0.07);
        assert!(report.peaks.is_empty());
    }

    #[test]
    fn model_lines_cover_masses_and_differences() {
        let masses = quasiparticle_masses(1.0, 0.2).unwrap();
        let lines = model_lines(&masses);
        assert_eq!(lines.len(), 15);
        assert!(lines.iter().any(|l| l.label == "m1"));
        assert!(lines.iter().any(|l| l.label == "m5,4"));
    }

    #[test]
    fn matching_is_stable_under_degenerate_lines() {
        // at h = 0 four masses coincide at 6J and several differences vanish;
        // matching must still annotate a 6J tone deterministically
        let masses = quasiparticle_masses(1.0, 0.0).unwrap();
        let series = series_from(|t| (6.0 * t).cos(), 0.05, 100.0);
        let spec = fft_spectrum(&series, Channel::MzA, 10.0, 100.0, 4).unwrap();
        let report = match_masses(extract_peaks(&spec, 0.5), &masses, 0.07);
        let p = &report.peaks[0];
        assert!(p.matched.is_some());
        assert!((p.matched.as_ref().unwrap().omega - 6.0).abs() < 1e-12);
    }
}
