//! Globally adaptive Gauss–Kronrod (7/15) quadrature for matrix-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, CMat};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Panel {
    left: f64,
    right: f64,
    value: CMat,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F>(f: &F, left: f64, right: f64) -> Result<Panel>
where
    F: Fn(f64) -> Result<CMat>,
{
    let center = 0.5 * (left + right);
    let half = 0.5 * (right - left);
    let fc = f(center)?;
    let mut kronrod = &fc * num_complex::Complex64::new(WGK[7], 0.0);
    let mut gauss = &fc * num_complex::Complex64::new(WG[3], 0.0);
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        let sum = f1 + f2;
        kronrod += &sum * num_complex::Complex64::new(WGK[j], 0.0);
        if j % 2 == 1 {
            gauss += &sum * num_complex::Complex64::new(WG[j / 2], 0.0);
        }
    }
    let h = num_complex::Complex64::new(half, 0.0);
    let value = kronrod * h;
    let error = max_abs(&(&value - gauss * h));
    Ok(Panel {
        left,
        right,
        value,
        error,
    })
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate_finite<F>(f: F, a: f64, b: f64, settings: &QuadSettings) -> Result<CMat>
where
    F: Fn(f64) -> Result<CMat>,
{
    assert!(a.is_finite() && b.is_finite());
    if a == b {
        let probe = f(a)?;
        return Ok(CMat::zeros(probe.nrows(), probe.ncols()));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let first = gk15(&f, lo, hi)?;
    let mut total = first.value.clone();
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut count = 1;
    loop {
        let tol = settings.abs_tol.max(settings.rel_tol * max_abs(&total));
        if total_err <= tol {
            break;
        }
        if count >= settings.max_intervals {
            return Err(Error::Quadrature {
                left: lo,
                right: hi,
                estimate: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.left + worst.right);
        if mid <= worst.left || mid >= worst.right {
            // cannot split further in floating point
            heap.push(worst);
            return Err(Error::Quadrature {
                left: lo,
                right: hi,
                estimate: total_err,
            });
        }
        let l = gk15(&f, worst.left, mid)?;
        let r = gk15(&f, mid, worst.right)?;
        total = total - &worst.value + &l.value + &r.value;
        total_err = total_err - worst.error + l.error + r.error;
        heap.push(l);
        heap.push(r);
        count += 1;
        if count % 64 == 0 {
            // refresh against accumulated cancellation in the running sums
            total_err = heap.iter().map(|p| p.error).sum();
            total = heap
                .iter()
                .fold(CMat::zeros(total.nrows(), total.ncols()), |acc, p| acc + &p.value);
        }
    }
    Ok(total * num_complex::Complex64::new(sign, 0.0))
}

/// Integrates over `[a, b]` where either end may be infinite.
pub fn integrate<F>(f: F, a: f64, b: f64, settings: &QuadSettings) -> Result<CMat>
where
    F: Fn(f64) -> Result<CMat>,
{
    integrate_dyn(&f, a, b, settings)
}

fn integrate_dyn(f: &dyn Fn(f64) -> Result<CMat>, a: f64, b: f64, settings: &QuadSettings) -> Result<CMat> {
    if a.is_finite() && b.is_finite() {
        return integrate_finite(f, a, b, settings);
    }
    if a > b {
        return integrate_dyn(f, b, a, settings).map(|m| -m);
    }
    let jacobian = |t: f64| num_complex::Complex64::new(1.0 / ((1.0 - t) * (1.0 - t)), 0.0);
    match (a.is_finite(), b.is_finite()) {
        (true, false) => integrate_finite(|t: f64| f(a + t / (1.0 - t)).map(|m| m * jacobian(t)), 0.0, 1.0, settings),
        (false, true) => integrate_finite(|t: f64| f(b - t / (1.0 - t)).map(|m| m * jacobian(t)), 0.0, 1.0, settings),
        _ => {
            let left = integrate_dyn(f, f64::NEG_INFINITY, 0.0, settings)?;
            let right = integrate_dyn(f, 0.0, f64::INFINITY, settings)?;
            Ok(left + right)
        }
    }
}

/// Scalar convenience wrapper.
pub fn integrate_scalar<F>(f: F, a: f64, b: f64, settings: &QuadSettings) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate(
        |x| Ok(CMat::from_element(1, 1, num_complex::Complex64::new(f(x), 0.0))),
        a,
        b,
        settings,
    )
    .map(|m| m[(0, 0)].re)
}
