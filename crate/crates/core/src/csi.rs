//! Synthetic CSI for one link and the PLCR front-end: conjugate product of
//! an antenna pair, static suppression by a centred running mean, STFT, band-limited
//! Doppler peak, and conversion to PLCR.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
// Float math for no_std builds; inherent methods take over when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

pub use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::LinkGeometry;
use crate::track::Trajectory;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const DEFAULT_SAMPLE_RATE: f64 = 1000.0;
pub const DEFAULT_CARRIER: f64 = 5.32e9;

/// Packet rate and carrier of the capture.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RadioConfig {
    pub sample_rate: f64,
    pub carrier_frequency: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            carrier_frequency: DEFAULT_CARRIER,
        }
    }
}

impl RadioConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }
}

/// Impairments added by [`synthesize_csi`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NoiseConfig {
    /// Variance of complex white noise per stream.
    pub noise_power: f64,
    /// Amplitude of the body-reflected path on the first stream.
    pub dynamic_amplitude: f64,
    /// Per-sample std of the random-walk phase offset shared by both
    /// streams, radians.
    pub phase_drift_std: f64,
    /// Extra static multipath components per stream.
    pub static_paths: usize,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            noise_power: 0.0,
            dynamic_amplitude: 0.3,
            phase_drift_std: 0.0,
            static_paths: 0,
            seed: 0,
        }
    }
}

/// Two antenna streams of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiTrace {
    pub streams: Vec<Vec<Complex64>>,
    pub radio: RadioConfig,
}

impl CsiTrace {
    pub fn new(streams: Vec<Vec<Complex64>>, radio: RadioConfig) -> Result<Self> {
        if streams.len() < 2 {
            return Err(Error::InvalidConfig(
                "CSI trace needs at least two antenna streams".into(),
            ));
        }
        let len = streams[0].len();
        if let Some(s) = streams.iter().find(|s| s.len() != len) {
            return Err(Error::LengthMismatch(s.len(), len));
        }
        if !(radio.sample_rate > 0.0 && radio.carrier_frequency > 0.0) {
            return Err(Error::InvalidConfig("sample rate and carrier must be positive".into()));
        }
        Ok(Self { streams, radio })
    }

    pub fn len(&self) -> usize {
        self.streams[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn wavelength(&self) -> f64 {
        self.radio.wavelength()
    }
}

// Reference antenna: strong static component, weak and slightly longer
// dynamic path, so the conjugate product is dominated by the first
// stream's Doppler term.
const REFERENCE_STATIC: f64 = 4.5;
const REFERENCE_DYNAMIC_RATIO: f64 = 0.2;
const REFERENCE_PATH_OFFSET: f64 = 0.01;

/// Position at time `tau` on the piecewise-linear trace, extrapolating the
/// last segment past the end.
fn position_at(trace: &Trajectory, tau: f64) -> crate::geometry::Point2 {
    let p = &trace.positions;
    if p.len() == 1 {
        return p[0];
    }
    let s = tau / trace.slot_duration;
    let k = (s.floor() as usize).min(p.len() - 2);
    let frac = s - k as f64;
    p[k] + (p[k + 1] - p[k]) * frac
}

/// Two-stream CSI of `link` while the target follows `trajectory`, sampled
/// over `trajectory.len() · slot_duration` seconds.
pub fn synthesize_csi(
    trajectory: &Trajectory,
    link: &LinkGeometry,
    noise: &NoiseConfig,
    radio: &RadioConfig,
) -> Result<CsiTrace> {
    if !(noise.noise_power >= 0.0) {
        return Err(Error::InvalidConfig("noise power must be non-negative".into()));
    }
    if !(noise.dynamic_amplitude > 0.0) {
        return Err(Error::InvalidConfig("dynamic path amplitude must be positive".into()));
    }
    if !(noise.phase_drift_std >= 0.0) {
        return Err(Error::InvalidConfig("phase drift std must be non-negative".into()));
    }
    if trajectory.is_empty() {
        return Err(Error::TooShort(0));
    }
    let lambda = radio.wavelength();
    let samples = (trajectory.len() as f64 * trajectory.slot_duration * radio.sample_rate).round() as usize;

    let stream_rng = |stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        rng.set_stream(stream);
        rng
    };
    let mut kappa_rng = stream_rng(0);
    let mut noise_rng = stream_rng(1);
    let mut static_rng = stream_rng(2);

    let mut statics = [Complex64::new(1.0, 0.0), Complex64::from_polar(REFERENCE_STATIC, 0.7)];
    for s in statics.iter_mut() {
        for _ in 0..noise.static_paths {
            let amp: f64 = static_rng.random_range(0.05..0.5);
            let phase: f64 = static_rng.random_range(0.0..2.0 * PI);
            *s += Complex64::from_polar(amp, phase);
        }
    }
    let sigma = (noise.noise_power / 2.0).sqrt();
    let amps = [
        noise.dynamic_amplitude,
        noise.dynamic_amplitude * REFERENCE_DYNAMIC_RATIO,
    ];
    let offsets = [0.0, REFERENCE_PATH_OFFSET];

    let mut streams = vec![Vec::with_capacity(samples), Vec::with_capacity(samples)];
    let mut kappa = 0.0;
    for k in 0..samples {
        let tau = k as f64 / radio.sample_rate;
        let length = link.path_length(position_at(trajectory, tau));
        if noise.phase_drift_std > 0.0 {
            let step: f64 = kappa_rng.sample(StandardNormal);
            kappa += noise.phase_drift_std * step;
        }
        let drift = Complex64::from_polar(1.0, -kappa);
        for a in 0..2 {
            let dynamic = Complex64::from_polar(amps[a], -2.0 * PI * (length + offsets[a]) / lambda);
            let mut x = drift * (statics[a] + dynamic);
            if sigma > 0.0 {
                let re: f64 = noise_rng.sample(StandardNormal);
                let im: f64 = noise_rng.sample(StandardNormal);
                x += Complex64::new(re, im) * sigma;
            }
            streams[a].push(x);
        }
    }
    CsiTrace::new(streams, *radio)
}

/// In-place iterative radix-2 FFT, `X_k = Σ x_n e^{−j2πkn/N}`.
pub fn fft_in_place(buf: &mut [Complex64]) -> Result<()> {
    let n = buf.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidConfig(alloc::format!(
            "FFT length {n} is not a power of two"
        )));
    }
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let step = Complex64::from_polar(1.0, -2.0 * PI / len as f64);
        for chunk in buf.chunks_mut(len) {
            let mut w = Complex64::new(1.0, 0.0);
            let (lo, hi) = chunk.split_at_mut(len / 2);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let t = *b * w;
                *b = *a - t;
                *a += t;
                w *= step;
            }
        }
        len <<= 1;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct StftConfig {
    /// Window length, samples.
    pub window: usize,
    /// Hop between frames, samples.
    pub hop: usize,
    /// Zero-padded FFT length (power of two).
    pub fft_size: usize,
    /// Doppler band kept for peak picking, Hz.
    pub band_limit: f64,
    /// Frames whose dynamic-to-total energy ratio falls below this are
    /// reported missing.
    pub energy_floor: f64,
    /// Samples, centred on each frame, averaged to estimate the static
    /// component. Spans shorter than the window use the window itself.
    pub static_span: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window: 200,
            hop: 100,
            fft_size: 1024,
            band_limit: 80.0,
            energy_floor: 1e-6,
            static_span: 1000,
        }
    }
}

impl StftConfig {
    /// Frames one slot apart with a two-slot window and a one-second
    /// static estimate.
    pub fn for_slot(slot_duration: f64, sample_rate: f64) -> Self {
        let hop = ((slot_duration * sample_rate).round() as usize).max(1);
        let window = 2 * hop;
        let fft_size = window.next_power_of_two().max(1024);
        Self {
            window,
            hop,
            fft_size,
            static_span: (sample_rate.round() as usize).max(window),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.hop == 0 {
            return Err(Error::InvalidConfig("STFT window and hop must be positive".into()));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < self.window {
            return Err(Error::InvalidConfig(
                "FFT size must be a power of two no shorter than the window".into(),
            ));
        }
        if !(self.band_limit > 0.0) {
            return Err(Error::InvalidConfig("band limit must be positive".into()));
        }
        Ok(())
    }

    /// Frequency resolution, Hz.
    pub fn bin_width(&self, sample_rate: f64) -> f64 {
        sample_rate / self.fft_size as f64
    }
}

/// One frequency bin expressed as PLCR, m/s.
pub fn bin_equivalent_plcr(stft: &StftConfig, radio: &RadioConfig) -> f64 {
    stft.bin_width(radio.sample_rate) * radio.wavelength()
}

/// Band-limited power spectrogram of the conjugate product.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// Frame centres, seconds.
    pub times: Vec<f64>,
    /// Signed bin frequencies, ascending and symmetric around zero, Hz.
    pub frequencies: Vec<f64>,
    /// `frames × bins` power.
    pub power: Vec<Vec<f64>>,
    /// Per-frame energy left after static suppression over energy before.
    pub dynamic_ratio: Vec<f64>,
}

/// Conjugate product of the first two streams; removes any phase offset
/// common to both antennas.
pub fn conjugate_product(trace: &CsiTrace) -> Vec<Complex64> {
    trace.streams[0]
        .iter()
        .zip(&trace.streams[1])
        .map(|(a, b)| a * b.conj())
        .collect()
}

pub fn spectrogram(trace: &CsiTrace, stft: &StftConfig) -> Result<Spectrogram> {
    stft.validate()?;
    if stft.window > trace.len() {
        return Err(Error::WindowTooLong {
            window: stft.window,
            len: trace.len(),
        });
    }
    let fs = trace.radio.sample_rate;
    let x = conjugate_product(trace);
    let n = stft.fft_size;
    let df = stft.bin_width(fs);
    let max_bin = ((stft.band_limit / df).floor() as usize).min(n / 2 - 1);
    let frequencies: Vec<f64> = (0..=2 * max_bin).map(|i| (i as f64 - max_bin as f64) * df).collect();
    let hann: Vec<f64> = (0..stft.window)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (stft.window - 1).max(1) as f64).cos())
        .collect();

    let frames = (trace.len() - stft.window) / stft.hop + 1;
    let mut times = Vec::with_capacity(frames);
    let mut power = Vec::with_capacity(frames);
    let mut dynamic_ratio = Vec::with_capacity(frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    // Prefix sums give every frame's static estimate in constant time.
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(Complex64::new(0.0, 0.0));
    for c in &x {
        let last = *prefix.last().unwrap();
        prefix.push(last + c);
    }
    let span = stft.static_span.max(stft.window).min(x.len());
    for f in 0..frames {
        let start = f * stft.hop;
        let seg = &x[start..start + stft.window];
        let lo = (start + stft.window / 2).saturating_sub(span / 2).min(x.len() - span);
        let mean = (prefix[lo + span] - prefix[lo]) / span as f64;
        let total: f64 = seg.iter().map(|c| c.norm_sqr()).sum();
        let mut dynamic = 0.0;
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (i, c) in seg.iter().enumerate() {
            let d = c - mean;
            dynamic += d.norm_sqr();
            buf[i] = d * hann[i];
        }
        fft_in_place(&mut buf)?;
        let row = (0..=2 * max_bin)
            .map(|i| {
                let k = (i as isize - max_bin as isize).rem_euclid(n as isize) as usize;
                buf[k].norm_sqr()
            })
            .collect();
        power.push(row);
        dynamic_ratio.push(if total > 0.0 { dynamic / total } else { 0.0 });
        times.push((f * stft.hop) as f64 / fs + stft.window as f64 / (2.0 * fs));
    }
    Ok(Spectrogram {
        times,
        frequencies,
        power,
        dynamic_ratio,
    })
}

/// PLCR per STFT frame; `None` where the frame carries no motion.
#[derive(Debug, Clone, PartialEq)]
pub struct PlcrSeries {
    pub times: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

/// Dominant Doppler peak of every frame converted to PLCR via `r = −λ f_D`.
pub fn extract_plcr(trace: &CsiTrace, stft: &StftConfig) -> Result<PlcrSeries> {
    let spec = spectrogram(trace, stft)?;
    let lambda = trace.wavelength();
    let values = spec
        .power
        .iter()
        .zip(&spec.dynamic_ratio)
        .map(|(row, &ratio)| {
            if ratio < stft.energy_floor {
                return None;
            }
            // First maximum wins on ties.
            let mut best = 0;
            for (i, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = i;
                }
            }
            Some(-lambda * spec.frequencies[best])
        })
        .collect();
    Ok(PlcrSeries {
        times: spec.times,
        values,
    })
}

/// Resamples frame PLCRs onto feature slots. Slot `t ≥ 1` describes the
/// motion between slot boundaries `t − 1` and `t`, so it is read at
/// `(t − 0.5) · slot_duration`; slot 0 copies slot 1.
pub fn align_to_slots(series: &PlcrSeries, slots: usize, slot_duration: f64) -> Vec<Option<f64>> {
    let times = &series.times;
    let values = &series.values;
    let read = |tau: f64| -> Option<f64> {
        if times.is_empty() {
            return None;
        }
        let j = times.partition_point(|&c| c <= tau);
        if j == 0 {
            return values[0];
        }
        if j == times.len() {
            return values[j - 1];
        }
        let (t0, t1) = (times[j - 1], times[j]);
        match (values[j - 1], values[j]) {
            (Some(a), Some(b)) => {
                let f = (tau - t0) / (t1 - t0);
                Some(a + (b - a) * f)
            }
            (a, b) => {
                if tau - t0 <= t1 - tau {
                    a.or(b)
                } else {
                    b.or(a)
                }
            }
        }
    };
    let mut out: Vec<Option<f64>> = (0..slots).map(|t| read((t as f64 - 0.5) * slot_duration)).collect();
    if slots > 1 {
        out[0] = out[1];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-9
    }

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(i, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * i) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn fft_matches_naive_dft() {
        let x: Vec<Complex64> = (0..16)
            .map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let mut y = x.clone();
        fft_in_place(&mut y).unwrap();
        for (a, b) in y.iter().zip(naive_dft(&x)) {
            assert!(close(*a, b));
        }
        assert!(fft_in_place(&mut [Complex64::new(0.0, 0.0); 3]).is_err());
    }

    /// Target sliding along the baseline extension, where dL/dt is twice
    /// its speed.
    fn constant_rate_trace(rate: f64, seconds: f64) -> (LinkGeometry, Trajectory) {
        let link = LinkGeometry::new(0, Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)).unwrap();
        let dt = 0.1;
        let slots = (seconds / dt) as usize;
        let speed = rate / 2.0;
        let positions = (0..slots)
            .map(|k| Point2::new(3.0 + speed * k as f64 * dt, 0.0))
            .collect();
        (link, Trajectory::new(positions, dt))
    }

    #[test]
    fn wavelength_at_default_carrier() {
        assert!((RadioConfig::default().wavelength() - 0.056352).abs() < 1e-6);
    }

    #[test]
    fn stationary_target_has_constant_modulus_and_no_motion() {
        let (link, _) = constant_rate_trace(0.0, 1.0);
        let trace = Trajectory::new(vec![Point2::new(0.5, 1.0); 20], 0.1);
        let csi = synthesize_csi(&trace, &link, &NoiseConfig::default(), &RadioConfig::default()).unwrap();
        for s in &csi.streams {
            assert!(s.iter().all(|c| (c.norm() - s[0].norm()).abs() < 1e-12));
        }
        let out = extract_plcr(&csi, &StftConfig::default()).unwrap();
        assert!(out.values.iter().all(Option::is_none));
    }

    #[test]
    fn constant_rate_peak_and_sign() {
        let radio = RadioConfig::default();
        let stft = StftConfig::default();
        let bin = bin_equivalent_plcr(&stft, &radio);
        for rate in [1.0, -0.5] {
            let (link, trace) = constant_rate_trace(rate, 3.0);
            let csi = synthesize_csi(&trace, &link, &NoiseConfig::default(), &radio).unwrap();
            let out = extract_plcr(&csi, &stft).unwrap();
            for v in &out.values {
                let v = v.unwrap();
                assert!((v - rate).abs() <= bin, "{v} vs {rate}");
                assert_eq!(v.signum(), rate.signum());
            }
        }
    }

    #[test]
    fn window_longer_than_trace() {
        let (link, trace) = constant_rate_trace(1.0, 0.1);
        let csi = synthesize_csi(&trace, &link, &NoiseConfig::default(), &RadioConfig::default()).unwrap();
        assert_eq!(
            extract_plcr(&csi, &StftConfig::default()).unwrap_err(),
            Error::WindowTooLong { window: 200, len: 100 }
        );
    }

    #[test]
    fn invalid_noise_rejected() {
        let (link, trace) = constant_rate_trace(1.0, 1.0);
        let radio = RadioConfig::default();
        let bad = NoiseConfig {
            noise_power: -1.0,
            ..NoiseConfig::default()
        };
        assert!(synthesize_csi(&trace, &link, &bad, &radio).is_err());
        let bad = NoiseConfig {
            dynamic_amplitude: 0.0,
            ..NoiseConfig::default()
        };
        assert!(synthesize_csi(&trace, &link, &bad, &radio).is_err());
    }

    #[test]
    fn spectrogram_axis_is_symmetric() {
        let (link, trace) = constant_rate_trace(1.0, 1.0);
        let csi = synthesize_csi(&trace, &link, &NoiseConfig::default(), &RadioConfig::default()).unwrap();
        let s = spectrogram(&csi, &StftConfig::default()).unwrap();
        let f = &s.frequencies;
        for i in 0..f.len() {
            assert_eq!(f[i], -f[f.len() - 1 - i]);
        }
        assert!(f[f.len() - 1] <= 80.0);
    }

    #[test]
    fn alignment_reads_slot_midpoints() {
        let series = PlcrSeries {
            times: vec![0.1, 0.2, 0.3],
            values: vec![Some(1.0), Some(2.0), None],
        };
        let out = align_to_slots(&series, 4, 0.1);
        assert_eq!(out[1], Some(1.0));
        assert_eq!(out[0], out[1]);
        assert!((out[2].unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(out[3], Some(2.0));
    }
}
