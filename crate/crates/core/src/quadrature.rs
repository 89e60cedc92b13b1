//! Adaptive integration over the sphere.
//!
//! Integrals are taken in (azimuth, height) coordinates about a chosen polar
//! axis, where the area element is dφ dz. Both directions use globally
//! adaptive 15-point Gauss–Kronrod bisection, which copes with the jump
//! discontinuities of the piecewise-constant densities in this crate. Choosing
//! the axis normal to a plane that holds every setting vector makes those
//! jumps lie along meridians, so the height integral is resolved in one panel.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geometry::UnitVector;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
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
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerance and work limit for one sphere integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Absolute tolerance on the integral.
    pub tolerance: f64,
    /// Maximum number of panels in each one-dimensional pass.
    pub max_panels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { tolerance: 1e-9, max_panels: 4000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, x) in XGK.iter().take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
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
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over [a, b]: the panel
/// with the largest error estimate is bisected until the summed estimate drops
/// below `tolerance` or the panel budget is spent.
pub fn integrate_1d<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tolerance: f64, max_panels: usize) -> Estimate {
    let (value, error) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total_error = error;
    while total_error > tolerance && heap.len() < max_panels {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        total_error += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().map(|p| p.value).sum();
    let error: f64 = panels.iter().map(|p| p.error).sum();
    Estimate { value, error, converged: error <= tolerance }
}

/// Orthonormal frame with `axis` as its third vector.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    e1: UnitVector,
    e2: UnitVector,
    axis: UnitVector,
}

impl Frame {
    pub fn new(axis: UnitVector) -> Self {
        let e1 = axis.any_perpendicular();
        let e2 = axis.normal_with(&e1);
        Frame { e1, e2, axis }
    }

    pub fn point(&self, z: f64, phi: f64) -> UnitVector {
        let local = UnitVector::from_cos_azimuth(z, phi);
        let (a, b, c) = (local.x(), local.y(), local.z());
        let comp = |i: usize| a * self.e1.components()[i] + b * self.e2.components()[i] + c * self.axis.components()[i];
        let (x, y, zz) = (comp(0), comp(1), comp(2));
        // rounding moves the norm by a few ulp at most
        let n = (x * x + y * y + zz * zz).sqrt();
        UnitVector::new(x / n, y / n, zz / n).expect("rotation of a unit vector")
    }

    /// Azimuth of `v` about the axis, in [0, 2π).
    pub fn azimuth(&self, v: &UnitVector) -> f64 {
        let phi = v.dot(&self.e2).atan2(v.dot(&self.e1));
        if phi < 0.0 { phi + TAU } else { phi }
    }
}

/// Integral of `f` over the patch z ∈ [z0, z1], φ ∈ [φ0, φ1] about `axis`.
pub fn integrate_patch<F: Fn(&UnitVector) -> f64>(
    f: F,
    axis: UnitVector,
    z_range: (f64, f64),
    phi_range: (f64, f64),
    spec: &QuadratureSpec,
) -> Estimate {
    let frame = Frame::new(axis);
    let span = phi_range.1 - phi_range.0;
    let inner_tol = 0.1 * spec.tolerance / span.abs().max(1e-300);
    let mut inner_error = 0.0f64;
    let mut inner_ok = true;
    let outer = integrate_1d(
        |phi| {
            let inner = integrate_1d(|z| f(&frame.point(z, phi)), z_range.0, z_range.1, inner_tol, spec.max_panels);
            inner_error = inner_error.max(inner.error);
            inner_ok &= inner.converged;
            inner.value
        },
        phi_range.0,
        phi_range.1,
        0.9 * spec.tolerance,
        spec.max_panels,
    );
    let error = outer.error + inner_error * span.abs();
    Estimate { value: outer.value, error, converged: outer.converged && inner_ok && error <= spec.tolerance }
}

/// Integral of `f` over the whole sphere using `axis` as the polar direction.
pub fn integrate_sphere<F: Fn(&UnitVector) -> f64>(f: F, axis: UnitVector, spec: &QuadratureSpec) -> Estimate {
    integrate_patch(f, axis, (-1.0, 1.0), (0.0, TAU), spec)
}

/// Like [`integrate_sphere`] but reports non-convergence as an error.
/// Whole-sphere integral with the azimuth split at `breaks`, for integrands
/// that jump along meridians. Each piece receives a share of the tolerance in
/// proportion to its width.
pub fn integrate_sphere_split<F: Fn(&UnitVector) -> f64>(f: F, axis: UnitVector, breaks: &[f64], spec: &QuadratureSpec) -> Estimate {
    let mut cuts: Vec<f64> = breaks.iter().map(|b| b.rem_euclid(TAU)).filter(|b| b.is_finite()).collect();
    cuts.push(0.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    cuts.push(TAU);
    let mut total = Estimate { value: 0.0, error: 0.0, converged: true };
    for w in cuts.windows(2) {
        if w[1] - w[0] < 1e-15 {
            continue;
        }
        let piece_spec = QuadratureSpec { tolerance: spec.tolerance * (w[1] - w[0]) / TAU, max_panels: spec.max_panels };
        let est = integrate_patch(&f, axis, (-1.0, 1.0), (w[0], w[1]), &piece_spec);
        total.value += est.value;
        total.error += est.error;
        total.converged &= est.converged;
    }
    total
}

pub fn integrate_sphere_checked<F: Fn(&UnitVector) -> f64>(f: F, axis: UnitVector, spec: &QuadratureSpec) -> Result<Estimate> {
    let est = integrate_sphere(f, axis, spec);
    if est.converged {
        Ok(est)
    } else {
        Err(SimError::Quadrature { error: est.error, tolerance: spec.tolerance })
    }
}
