//! Mean SSIM over uniform 8x8 windows with stride 1.

use ndarray::Array2;

use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 8;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// SSIM after a joint min-max rescale of both inputs to `[0, 1]`.
pub fn ssim(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    check_shapes(a, b)?;
    let lo = a.iter().chain(b.iter()).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let rescale = |m: &Array2<f64>| {
        if range > 0.0 {
            m.mapv(|v| (v - lo) / range)
        } else {
            Array2::zeros(m.dim())
        }
    };
    ssim_raw(&rescale(a), &rescale(b))
}

/// SSIM on the inputs as given, with dynamic range `L = 1`.
pub fn ssim_raw(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    check_shapes(a, b)?;
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("SSIM input is not finite".into()));
    }
    let c1 = K1 * K1;
    let c2 = K2 * K2;
    let sa = SummedArea::new(a, |x, _| x);
    let sb = SummedArea::new(b, |_, y| y);
    let saa = SummedArea::new_pair(a, b, |x, _| x * x);
    let sbb = SummedArea::new_pair(a, b, |_, y| y * y);
    let sab = SummedArea::new_pair(a, b, |x, y| x * y);

    let (rows, cols) = a.dim();
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=rows - SSIM_WINDOW {
        for c in 0..=cols - SSIM_WINDOW {
            let mu_a = sa.window(r, c) / n;
            let mu_b = sb.window(r, c) / n;
            let var_a = (saa.window(r, c) / n - mu_a * mu_a).max(0.0);
            let var_b = (sbb.window(r, c) / n - mu_b * mu_b).max(0.0);
            let cov = sab.window(r, c) / n - mu_a * mu_b;
            let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn check_shapes(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!(
            "SSIM inputs differ in shape: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let (rows, cols) = a.dim();
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::shape(format!(
            "{rows}x{cols} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    Ok(())
}

/// Inclusive prefix sums with a zero border row and column.
struct SummedArea {
    table: Array2<f64>,
}

impl SummedArea {
    fn new(m: &Array2<f64>, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::new_pair(m, m, f)
    }

    fn new_pair(a: &Array2<f64>, b: &Array2<f64>, f: impl Fn(f64, f64) -> f64) -> Self {
        let (rows, cols) = a.dim();
        let mut table = Array2::zeros((rows + 1, cols + 1));
        for r in 0..rows {
            let mut row_sum = 0.0;
            for c in 0..cols {
                row_sum += f(a[[r, c]], b[[r, c]]);
                table[[r + 1, c + 1]] = table[[r, c + 1]] + row_sum;
            }
        }
        Self { table }
    }

    fn window(&self, r: usize, c: usize) -> f64 {
        let (r1, c1) = (r + SSIM_WINDOW, c + SSIM_WINDOW);
        self.table[[r1, c1]] - self.table[[r, c1]] - self.table[[r1, c]] + self.table[[r, c]]
    }
}
