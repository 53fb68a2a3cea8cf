//! Analog elliptic (Cauer) lowpass prototypes.
//!
//! Jacobi elliptic functions are evaluated through descending Landen
//! transformations of the modulus; `u` is normalized to the quarter period
//! so `cde(0, k) = 1` and `sne(1, k) = 1`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

const LANDEN_MAX_STEPS: usize = 32;

/// Descending Landen moduli of `k`, stopping once they underflow machine precision.
fn landen(k: f64) -> Vec<f64> {
    let mut v = Vec::new();
    if k == 0.0 || k == 1.0 {
        v.push(k);
        return v;
    }
    let mut k = k;
    for _ in 0..LANDEN_MAX_STEPS {
        k = (k / (1.0 + (1.0 - k * k).sqrt())).powi(2);
        v.push(k);
        if k < 1e-16 {
            break;
        }
    }
    v
}

/// Complete elliptic integral of the first kind, `K(k)`.
pub fn ellipk(k: f64) -> f64 {
    if k >= 1.0 {
        return f64::INFINITY;
    }
    landen(k).iter().map(|v| 1.0 + v).product::<f64>() * FRAC_PI_2
}

/// `cd(u K, k)` for complex `u`.
pub fn cde(u: Complex64, k: f64) -> Complex64 {
    ascend(landen(k), (u * FRAC_PI_2).cos())
}

/// `sn(u K, k)` for complex `u`.
pub fn sne(u: Complex64, k: f64) -> Complex64 {
    ascend(landen(k), (u * FRAC_PI_2).sin())
}

fn ascend(moduli: Vec<f64>, mut w: Complex64) -> Complex64 {
    for &v in moduli.iter().rev() {
        w = w * (1.0 + v) / (w * w * v + 1.0);
    }
    w
}

/// Inverse of [`cde`]: `u` with `cd(u K, k) = w`, reduced to the fundamental period.
pub fn acde(w: Complex64, k: f64) -> Complex64 {
    let moduli = landen(k);
    let mut w = w;
    let mut prev = k;
    for &v in &moduli {
        w = w / ((Complex64::new(1.0, 0.0) - w * w * prev * prev).sqrt() + 1.0) * (2.0 / (1.0 + v));
        prev = v;
    }
    let u = w.acos() / FRAC_PI_2;
    let kk = ellipk(k);
    let kp = ellipk((1.0 - k * k).sqrt());
    let r = kp / kk;
    Complex64::new(srem(u.re, 4.0), srem(u.im, 2.0 * r))
}

/// Inverse of [`sne`].
pub fn asne(w: Complex64, k: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) - acde(w, k)
}

fn srem(x: f64, y: f64) -> f64 {
    x - y * (x / y).round()
}

/// Selectivity modulus `k = wp / ws` reached by an order-`n` design with
/// discrimination modulus `k1 = eps_p / eps_s`.
pub fn ellipdeg(n: usize, k1: f64) -> f64 {
    let k1p = (1.0 - k1 * k1).sqrt();
    let half = n / 2;
    let prod: f64 = (1..=half)
        .map(|i| {
            let u = (2 * i - 1) as f64 / n as f64;
            sne(Complex64::new(u, 0.0), k1p).re
        })
        .product();
    let kp = k1p.powi(n as i32) * prod.powi(4);
    (1.0 - kp * kp).sqrt()
}

/// Normalized (passband edge at 1 rad/s) analog elliptic lowpass.
#[derive(Debug, Clone)]
pub struct AnalogPrototype {
    /// One zero per conjugate pair (upper half plane).
    pub zeros: Vec<Complex64>,
    /// One pole per conjugate pair.
    pub pole_pairs: Vec<Complex64>,
    /// Real pole for odd orders.
    pub real_pole: Option<f64>,
    /// Gain at DC.
    pub dc_gain: f64,
    /// Stopband edge in units of the passband edge.
    pub stopband_edge: f64,
}

pub fn prototype(order: usize, ripple_db: f64, atten_db: f64) -> AnalogPrototype {
    let ep = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
    let es = (10f64.powf(atten_db / 10.0) - 1.0).sqrt();
    let k1 = ep / es;
    let k = ellipdeg(order, k1);
    let half = order / 2;
    let j = Complex64::new(0.0, 1.0);

    let v0 = -j * asne(j / ep, k1) / order as f64;

    let mut zeros = Vec::with_capacity(half);
    let mut pole_pairs = Vec::with_capacity(half);
    for i in 1..=half {
        let u = Complex64::new((2 * i - 1) as f64 / order as f64, 0.0);
        let zeta = cde(u, k);
        zeros.push(j / (zeta * k));
        pole_pairs.push(j * cde(u - j * v0, k));
    }
    let real_pole = (order % 2 == 1).then(|| (j * sne(j * v0, k)).re);
    let dc_gain = if order % 2 == 0 {
        1.0 / (1.0 + ep * ep).sqrt()
    } else {
        1.0
    };
    AnalogPrototype {
        zeros,
        pole_pairs,
        real_pole,
        dc_gain,
        stopband_edge: 1.0 / k,
    }
}
