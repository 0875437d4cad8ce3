//! Low-pass Fourier contours of melody and rhythm.
//!
//! Each phrase becomes a step function over normalized phrase time, is
//! mirrored to kill the wrap-around discontinuity, Fourier-transformed, and
//! truncated to its lowest K coefficients with an amplitude compensation
//! that preserves the curve's time-domain variance. Features are clustered
//! (Ward), one cluster is chosen by a size/width quality measure, and its
//! mean contour is exposed as a function on [0, 1).

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cluster::ward_clusters;
use crate::error::{Error, Result};
use crate::markov::Feature;
use crate::score::Phrase;

/// Samples per unmirrored phrase. Power of two; every curve in a run shares it.
pub const DEFAULT_SAMPLES: usize = 256;

/// A real-valued curve sampled uniformly over its domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    pub samples: Vec<f64>,
}

impl SampledCurve {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / self.samples.len() as f64
    }
}

/// The low-frequency feature vector of one phrase.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourFeature {
    /// `coeffs[0]` is the DC term (the curve mean).
    pub coeffs: Vec<Complex64>,
    pub phrase_ref: usize,
}

/// Per-cluster diagnostics kept alongside the selected contour.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDiagnostics {
    pub id: usize,
    pub size: usize,
    pub width: f64,
    pub quality: f64,
    pub selected: bool,
    pub mean_spectrum: Vec<Complex64>,
}

/// The selected mean contour of one feature, plus diagnostics for all
/// clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourModel {
    pub feature: Feature,
    pub selected_cluster: usize,
    /// Mean low-pass spectrum of the selected cluster (uncentered space).
    pub mean_spectrum: Vec<Complex64>,
    /// The mean contour on the unmirrored domain: `curve.samples[j]` is the
    /// 2N-point inverse FFT evaluated at mirrored position `(1 + j/N) / 2`.
    pub curve: SampledCurve,
    pub diagnostics: Vec<ClusterDiagnostics>,
}

/// Tuning for contour learning.
#[derive(Debug, Clone, Copy)]
pub struct ContourParams {
    pub n_samples: usize,
    pub lowpass_k: usize,
    pub max_clusters: usize,
    pub gamma: f64,
}

impl Default for ContourParams {
    fn default() -> Self {
        ContourParams { n_samples: DEFAULT_SAMPLES, lowpass_k: 6, max_clusters: 17, gamma: 3.0 }
    }
}

/// Piecewise value of the pre-sampled step function.
#[derive(Debug, Clone, Copy)]
struct Segment {
    start: f64,
    end: f64,
    from: f64,
    to: f64, // equal to `from` for constant segments
}

impl Segment {
    fn value_at(&self, t: f64) -> f64 {
        if self.to == self.from || self.end <= self.start {
            self.from
        } else {
            self.from + (self.to - self.from) * (t - self.start) / (self.end - self.start)
        }
    }
}

/// Turn a phrase into its per-note step function sampled at `n` points over
/// normalized phrase time.
///
/// Pitch: the MIDI pitch per note; leading rests are back-filled from the
/// first pitched note, trailing rests forward-filled from the last, and
/// interior rest spans ramp linearly between the neighbor pitches.
/// Duration: the note's own duration in quarter-note units; rests keep their
/// duration since they shape the rhythm too.
pub fn step_curve(phrase: &Phrase, feature: Feature, n: usize) -> Result<SampledCurve> {
    if phrase.notes.is_empty() {
        return Err(Error::ContourUndefined { detail: "empty phrase".into() });
    }
    let segments = match feature {
        Feature::Duration => phrase
            .notes
            .iter()
            .map(|note| {
                let v = note.duration.to_f64();
                Segment { start: note.onset.to_f64(), end: note.end().to_f64(), from: v, to: v }
            })
            .collect::<Vec<_>>(),
        Feature::Pitch => pitch_segments(phrase)?,
    };

    let total = phrase.total_duration().to_f64();
    let mut samples = Vec::with_capacity(n);
    let mut seg = 0usize;
    for j in 0..n {
        let t = total * j as f64 / n as f64;
        while seg + 1 < segments.len() && t >= segments[seg].end {
            seg += 1;
        }
        samples.push(segments[seg].value_at(t));
    }
    Ok(SampledCurve { samples })
}

fn pitch_segments(phrase: &Phrase) -> Result<Vec<Segment>> {
    let notes = &phrase.notes;
    if notes.iter().all(|n| n.is_rest()) {
        return Err(Error::ContourUndefined {
            detail: format!("phrase {}#{} is all rests", phrase.source_id, phrase.index_in_song),
        });
    }
    let mut segments = Vec::with_capacity(notes.len());
    let mut i = 0usize;
    while i < notes.len() {
        let note = &notes[i];
        if let Some(pitch) = note.pitch {
            let v = f64::from(pitch);
            segments.push(Segment {
                start: note.onset.to_f64(),
                end: note.end().to_f64(),
                from: v,
                to: v,
            });
            i += 1;
            continue;
        }
        // contiguous rest run [i, j)
        let mut j = i;
        while j < notes.len() && notes[j].is_rest() {
            j += 1;
        }
        let prev = notes[..i].iter().rev().find_map(|n| n.pitch).map(f64::from);
        let next = notes[j..].iter().find_map(|n| n.pitch).map(f64::from);
        let (from, to) = match (prev, next) {
            (Some(a), Some(b)) => (a, b),      // interior: ramp a -> b
            (None, Some(b)) => (b, b),         // leading rests: back-fill
            (Some(a), None) => (a, a),         // trailing rests: forward-fill
            (None, None) => unreachable!("all-rest handled above"),
        };
        segments.push(Segment {
            start: notes[i].onset.to_f64(),
            end: notes[j - 1].end().to_f64(),
            from,
            to,
        });
        i = j;
    }
    Ok(segments)
}

/// Subtract the duration-blind mean of the phrase's sounding pitches so
/// contours are register-free. Rhythm curves are never centered.
pub fn center_pitch_curve(phrase: &Phrase, curve: &SampledCurve) -> SampledCurve {
    let mean = phrase.mean_pitch().unwrap_or(0.0);
    SampledCurve { samples: curve.samples.iter().map(|v| v - mean).collect() }
}

/// Prepend the reversed curve: the result is even around the junction, so
/// its Fourier transform sees no wrap-around jump.
pub fn mirror(curve: &SampledCurve) -> SampledCurve {
    let mut samples = Vec::with_capacity(curve.len() * 2);
    samples.extend(curve.samples.iter().rev());
    samples.extend(curve.samples.iter());
    SampledCurve { samples }
}

/// Unnormalized forward FFT of a real curve.
pub fn fft_real(samples: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Inverse FFT with 1/M scaling; returns the real part.
pub fn ifft_real(spectrum: &[Complex64]) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Low-pass the mirrored curve to its `k` lowest FFT bins (DC plus k-1
/// harmonics) and compensate the retained non-DC coefficients for the energy
/// lost above the cutoff, so the reconstructed curve keeps the original's
/// time-domain variance. Coefficients are scaled by 1/len so the DC term
/// equals the curve mean.
pub fn extract_feature(mirrored: &SampledCurve, k: usize, phrase_ref: usize) -> ContourFeature {
    let m = mirrored.len();
    assert!(k >= 1 && 2 * k <= m, "lowpass threshold must satisfy 1 <= k <= N");
    let spectrum = fft_real(&mirrored.samples);

    // energies over the full spectrum; the retained set includes the
    // conjugate partners that reconstruction will restore
    let energy = |i: usize| spectrum[i].norm_sqr();
    let total_non_dc: f64 = (1..m).map(energy).sum();
    // bins 1..k plus their conjugate partners m-k+1..m-1
    let retained_non_dc: f64 = 2.0 * (1..k).map(energy).sum::<f64>();

    // Degenerate case: essentially nothing survives below the cutoff. Clamp
    // the factor instead of amplifying FFT round-off into garbage. The
    // threshold is relative so it scales with the curve.
    let factor = if retained_non_dc > total_non_dc * 1e-12 {
        (total_non_dc / retained_non_dc).sqrt()
    } else {
        1.0
    };

    let scale = 1.0 / m as f64;
    let mut coeffs = Vec::with_capacity(k);
    coeffs.push(spectrum[0] * scale);
    coeffs.extend(spectrum[1..k].iter().map(|c| c * factor * scale));
    ContourFeature { coeffs, phrase_ref }
}

/// Inverse of [`extract_feature`]'s packing: rebuild a conjugate-symmetric
/// `m`-point spectrum from the K low coefficients and inverse-transform it.
pub fn reconstruct(coeffs: &[Complex64], m: usize) -> Vec<f64> {
    let mut spectrum = vec![Complex64::new(0.0, 0.0); m];
    spectrum[0] = coeffs[0] * m as f64;
    for (i, c) in coeffs.iter().enumerate().skip(1) {
        spectrum[i] = c * m as f64;
        spectrum[m - i] = c.conj() * m as f64;
    }
    ifft_real(&spectrum)
}

/// Embed complex feature vectors in R^{2K} and cut the Ward dendrogram at
/// up to `max_clusters` clusters.
pub fn cluster_features(features: &[ContourFeature], max_clusters: usize) -> Vec<usize> {
    let points: Vec<Vec<f64>> = features
        .iter()
        .map(|f| f.coeffs.iter().flat_map(|c| [c.re, c.im]).collect())
        .collect();
    ward_clusters(&points, max_clusters)
}

/// The quality measure over cluster sizes and widths:
/// `q = s/max(s) + w^(1/gamma)/max(w^(1/gamma))` with `s = size/max(size)`.
/// Returns every q plus the argmax index; ties prefer the larger cluster,
/// then the lower id. All-zero widths contribute 0 to every q.
pub fn quality_scores(sizes: &[usize], widths: &[f64], gamma: f64) -> (Vec<f64>, usize) {
    assert_eq!(sizes.len(), widths.len());
    assert!(!sizes.is_empty() && gamma > 0.0);

    let max_size = *sizes.iter().max().unwrap() as f64;
    let s: Vec<f64> = sizes.iter().map(|&n| n as f64 / max_size).collect();
    let max_s = s.iter().cloned().fold(f64::MIN, f64::max);

    let damped: Vec<f64> = widths.iter().map(|w| w.powf(1.0 / gamma)).collect();
    let max_damped = damped.iter().cloned().fold(0.0f64, f64::max);

    let q: Vec<f64> = s
        .iter()
        .zip(&damped)
        .map(|(si, wi)| {
            let width_term = if max_damped > 0.0 { wi / max_damped } else { 0.0 };
            si / max_s + width_term
        })
        .collect();

    let mut best = 0usize;
    for i in 1..q.len() {
        if q[i] > q[best] || (q[i] == q[best] && sizes[i] > sizes[best]) {
            best = i;
        }
    }
    (q, best)
}

/// Evaluate the selected mean contour at normalized phrase time `t` via
/// nearest-sample lookup; equivalent to indexing the 2N-point inverse FFT at
/// position (1+t)/2.
pub fn contour_at(model: &ContourModel, t: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&t));
    let n = model.curve.len();
    let idx = ((t * n as f64).round() as usize).min(n - 1);
    model.curve.samples[idx]
}

/// Run the whole per-feature pipeline: step curves, centering (pitch only),
/// mirroring, low-pass features, Ward clustering on the centered features,
/// then cluster means and selection over the uncentered ones so the chosen
/// contour lives in absolute feature space.
pub fn learn_contour(
    phrases: &[&Phrase],
    feature: Feature,
    params: &ContourParams,
) -> Result<ContourModel> {
    let usable: Vec<&Phrase> = phrases
        .iter()
        .copied()
        .filter(|p| {
            !p.notes.is_empty()
                && (feature == Feature::Duration || p.notes.iter().any(|n| !n.is_rest()))
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::ContourUndefined {
            detail: format!("no usable phrases for the {feature} contour"),
        });
    }

    let n = params.n_samples;
    let k = params.lowpass_k;
    let mut centered = Vec::with_capacity(usable.len());
    let mut uncentered = Vec::with_capacity(usable.len());
    for (idx, phrase) in usable.iter().enumerate() {
        let base = step_curve(phrase, feature, n)?;
        let curve = if feature == Feature::Pitch {
            center_pitch_curve(phrase, &base)
        } else {
            base.clone()
        };
        centered.push(extract_feature(&mirror(&curve), k, idx));
        uncentered.push(extract_feature(&mirror(&base), k, idx));
    }

    let labels = cluster_features(&centered, params.max_clusters);
    let cluster_count = labels.iter().max().map_or(0, |m| m + 1);

    let m = 2 * n;
    let mut sizes = vec![0usize; cluster_count];
    let mut mean_spectra = vec![vec![Complex64::new(0.0, 0.0); k]; cluster_count];
    for (feature_vec, &label) in uncentered.iter().zip(&labels) {
        sizes[label] += 1;
        for (acc, c) in mean_spectra[label].iter_mut().zip(&feature_vec.coeffs) {
            *acc += c;
        }
    }
    let mut curves = Vec::with_capacity(cluster_count);
    let mut widths = Vec::with_capacity(cluster_count);
    for (spectrum, &size) in mean_spectra.iter_mut().zip(&sizes) {
        for c in spectrum.iter_mut() {
            *c /= size as f64;
        }
        let r = reconstruct(spectrum, m);
        let mean = r.iter().sum::<f64>() / m as f64;
        widths.push(r.iter().map(|v| (mean - v).abs()).sum::<f64>() / m as f64);
        curves.push(r);
    }

    let (qualities, selected) = quality_scores(&sizes, &widths, params.gamma);

    let diagnostics = (0..cluster_count)
        .map(|id| ClusterDiagnostics {
            id,
            size: sizes[id],
            width: widths[id],
            quality: qualities[id],
            selected: id == selected,
            mean_spectrum: mean_spectra[id].clone(),
        })
        .collect();

    Ok(ContourModel {
        feature,
        selected_cluster: selected,
        mean_spectrum: mean_spectra[selected].clone(),
        curve: SampledCurve { samples: curves[selected][n..].to_vec() },
        diagnostics,
    })
}
