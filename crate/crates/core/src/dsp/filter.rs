//! Elliptic band-split filters as cascades of second-order sections.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::elliptic;
use crate::buffer::SampleBuffer;
use crate::error::{Error, Result};

pub const DEFAULT_RIPPLE_DB: f64 = 0.5;
pub const DEFAULT_ATTEN_DB: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Lowpass,
    Highpass,
}

/// Normalized biquad `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (z_inv * self.b1 + z2 * self.b2 + self.b0) / (z_inv * self.a1 + z2 * self.a2 + 1.0)
    }

    /// Roots of `1 + a1 z^-1 + a2 z^-2` in the z-plane.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-disc - self.a1) * 0.5, (disc - self.a1) * 0.5]
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }
}

/// Filter design parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticSpec {
    pub order: usize,
    pub kind: FilterKind,
    /// Passband edge in Hz.
    pub cutoff: f64,
    pub ripple_db: f64,
    pub atten_db: f64,
}

impl EllipticSpec {
    pub fn lowpass(cutoff: f64) -> Self {
        Self {
            order: 8,
            kind: FilterKind::Lowpass,
            cutoff,
            ripple_db: DEFAULT_RIPPLE_DB,
            atten_db: DEFAULT_ATTEN_DB,
        }
    }

    pub fn highpass(cutoff: f64) -> Self {
        Self {
            kind: FilterKind::Highpass,
            ..Self::lowpass(cutoff)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterCascade {
    pub sections: Vec<Biquad>,
    pub fs: u32,
    pub kind: FilterKind,
    pub cutoff: f64,
    pub passband_ripple_db: f64,
    pub stopband_atten_db: f64,
    /// First frequency at which the full attenuation is guaranteed.
    pub stopband_edge: f64,
}

/// Designs an elliptic lowpass or highpass cascade via the bilinear transform.
///
/// The passband edge sits exactly at `cutoff`; ripple and attenuation are met
/// in the passband and beyond `stopband_edge` respectively.
pub fn design_elliptic(spec: &EllipticSpec, fs: u32) -> Result<FilterCascade> {
    let nyquist = fs as f64 / 2.0;
    if fs == 0 {
        return Err(Error::config("sample rate must be positive"));
    }
    if !(spec.cutoff > 0.0 && spec.cutoff < nyquist) {
        return Err(Error::config(format!(
            "cutoff {} Hz must lie strictly between 0 and Nyquist ({nyquist} Hz)",
            spec.cutoff
        )));
    }
    if spec.order == 0 {
        return Err(Error::config("filter order must be at least 1"));
    }
    if !(spec.ripple_db > 0.0 && spec.atten_db > spec.ripple_db) {
        return Err(Error::config(format!(
            "need 0 < ripple ({}) < attenuation ({})",
            spec.ripple_db, spec.atten_db
        )));
    }

    let proto = elliptic::prototype(spec.order, spec.ripple_db, spec.atten_db);
    let fs_f = fs as f64;
    let two_fs = 2.0 * fs_f;
    let warped = two_fs * (PI * spec.cutoff / fs_f).tan();

    // Map a prototype root onto the target analog filter.
    let map = |s: Complex64| match spec.kind {
        FilterKind::Lowpass => s * warped,
        FilterKind::Highpass => Complex64::new(warped, 0.0) / s,
    };
    let bilinear = |s: Complex64| (s + two_fs) / (-s + two_fs);
    // Reference point where the prototype's DC gain appears.
    let z_ref = match spec.kind {
        FilterKind::Lowpass => Complex64::new(1.0, 0.0),
        FilterKind::Highpass => Complex64::new(-1.0, 0.0),
    };

    let mut sections = Vec::with_capacity(spec.order.div_ceil(2));
    if let Some(p0) = proto.real_pole {
        let zp = bilinear(map(Complex64::new(p0, 0.0))).re;
        // the unpaired zero sits at infinity (lowpass) or DC (highpass)
        let zz = -z_ref.re;
        sections.push(normalize(
            Biquad {
                b0: 1.0,
                b1: -zz,
                b2: 0.0,
                a1: -zp,
                a2: 0.0,
            },
            z_ref,
        ));
    }
    for (zero, pole) in proto.zeros.iter().zip(&proto.pole_pairs) {
        let zz = bilinear(map(*zero));
        let zp = bilinear(map(*pole));
        sections.push(normalize(
            Biquad {
                b0: 1.0,
                b1: -2.0 * zz.re,
                b2: zz.norm_sqr(),
                a1: -2.0 * zp.re,
                a2: zp.norm_sqr(),
            },
            z_ref,
        ));
    }
    // Order sections by increasing pole radius.
    sections.sort_by(|a, b| a.a2.abs().total_cmp(&b.a2.abs()));
    if let Some(first) = sections.first_mut() {
        first.b0 *= proto.dc_gain;
        first.b1 *= proto.dc_gain;
        first.b2 *= proto.dc_gain;
    }

    let stop_analog = match spec.kind {
        FilterKind::Lowpass => warped * proto.stopband_edge,
        FilterKind::Highpass => warped / proto.stopband_edge,
    };
    let stopband_edge = fs_f / PI * (stop_analog / two_fs).atan();

    let cascade = FilterCascade {
        sections,
        fs,
        kind: spec.kind,
        cutoff: spec.cutoff,
        passband_ripple_db: spec.ripple_db,
        stopband_atten_db: spec.atten_db,
        stopband_edge,
    };
    if !cascade.is_stable() {
        return Err(Error::Numerical("designed cascade is unstable".into()));
    }
    Ok(cascade)
}

fn normalize(mut bq: Biquad, z_ref: Complex64) -> Biquad {
    let g = bq.response(z_ref.inv()).norm();
    bq.b0 /= g;
    bq.b1 /= g;
    bq.b2 /= g;
    bq
}

impl FilterCascade {
    pub fn order(&self) -> usize {
        self.sections
            .iter()
            .map(|s| if s.a2 == 0.0 && s.b2 == 0.0 { 1 } else { 2 })
            .sum()
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }

    /// Complex response at frequency `f` Hz.
    pub fn response(&self, f: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f / self.fs as f64);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    pub fn magnitude_db(&self, f: f64) -> f64 {
        20.0 * self.response(f).norm().log10()
    }

    /// Runs the cascade over `x` in transposed direct form II from rest.
    pub fn apply(&self, x: &SampleBuffer) -> Result<SampleBuffer> {
        x.require_rate(self.fs)?;
        let mut y = x.samples().to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b0 * input + z1;
                z1 = s.b1 * input - s.a1 * out + z2;
                z2 = s.b2 * input - s.a2 * out;
                *v = out;
            }
        }
        SampleBuffer::new(self.fs, y)
    }
}

/// Free-function form of [`FilterCascade::apply`].
pub fn filter_apply(filter: &FilterCascade, x: &SampleBuffer) -> Result<SampleBuffer> {
    filter.apply(x)
}
