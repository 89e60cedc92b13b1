//! Unit vectors on the 2-sphere, the outcome sign convention, and uniform
//! sampling of directions.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::Neg;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Tolerance on |v|² − 1 accepted at construction.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// A direction in three dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(into = "[f64; 3]")]
pub struct UnitVector {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector {
    pub const X: UnitVector = UnitVector { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: UnitVector = UnitVector { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: UnitVector = UnitVector { x: 0.0, y: 0.0, z: 1.0 };

    /// Accepts components already of unit norm (within [`UNIT_TOLERANCE`]).
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(SimError::NotUnit { x, y, z });
        }
        if ((x * x + y * y + z * z) - 1.0).abs() > UNIT_TOLERANCE {
            return Err(SimError::NotUnit { x, y, z });
        }
        Ok(UnitVector { x, y, z })
    }

    /// Scales an arbitrary non-zero vector onto the sphere.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(SimError::NotUnit { x, y, z });
        }
        Self::new(x / norm, y / norm, z / norm)
    }

    /// Point at polar angle `theta` ∈ [0, π] and azimuth `phi` ∈ [0, 2π).
    pub fn from_angles(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(SimError::AngleOutOfRange(format!("theta = {theta}")));
        }
        if !(0.0..TAU).contains(&phi) {
            return Err(SimError::AngleOutOfRange(format!("phi = {phi}")));
        }
        Ok(Self::from_angles_unchecked(theta, phi))
    }

    /// Same map as [`from_angles`](Self::from_angles) without range checks;
    /// any finite angles still land on the sphere.
    pub(crate) fn from_angles_unchecked(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        UnitVector { x: st * cp, y: st * sp, z: ct }
    }

    /// Builds the point with azimuth `phi` and height `cos_theta`.
    pub(crate) fn from_cos_azimuth(cos_theta: f64, phi: f64) -> Self {
        let cos_theta = cos_theta.clamp(-1.0, 1.0);
        let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
        let (sp, cp) = phi.sin_cos();
        UnitVector { x: sin_theta * cp, y: sin_theta * sp, z: cos_theta }
    }

    /// Direction in the x–y plane at `angle` radians from +x.
    pub fn in_plane(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        UnitVector { x: c, y: s, z: 0.0 }
    }

    /// Direction in the x–y plane at `degrees` from +x.
    pub fn in_plane_deg(degrees: f64) -> Self {
        Self::in_plane(degrees.to_radians())
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Clamped dot product; see [`dot`].
    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(self, other)
    }

    /// Unit normal to the plane spanned by `self` and `other`, or any
    /// perpendicular direction when the two are (anti)parallel.
    pub fn normal_with(&self, other: &UnitVector) -> UnitVector {
        let c = [
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        ];
        let n2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
        if n2 > 1e-24 {
            let n = n2.sqrt();
            return UnitVector { x: c[0] / n, y: c[1] / n, z: c[2] / n };
        }
        self.any_perpendicular()
    }

    pub fn any_perpendicular(&self) -> UnitVector {
        // cross with the axis least aligned with self
        let axis = if self.x.abs() <= self.y.abs() && self.x.abs() <= self.z.abs() {
            UnitVector::X
        } else if self.y.abs() <= self.z.abs() {
            UnitVector::Y
        } else {
            UnitVector::Z
        };
        let c = [
            self.y * axis.z - self.z * axis.y,
            self.z * axis.x - self.x * axis.z,
            self.x * axis.y - self.y * axis.x,
        ];
        let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        UnitVector { x: c[0] / n, y: c[1] / n, z: c[2] / n }
    }

    /// Componentwise maximum absolute difference.
    pub fn max_abs_diff(&self, other: &UnitVector) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }
}

impl Neg for UnitVector {
    type Output = UnitVector;

    fn neg(self) -> UnitVector {
        UnitVector { x: -self.x, y: -self.y, z: -self.z }
    }
}

impl From<UnitVector> for [f64; 3] {
    fn from(v: UnitVector) -> [f64; 3] {
        v.components()
    }
}

impl TryFrom<[f64; 3]> for UnitVector {
    type Error = SimError;

    fn try_from(c: [f64; 3]) -> Result<Self> {
        UnitVector::new(c[0], c[1], c[2])
    }
}

// Vectors on disk are normalized on load.
impl<'de> Deserialize<'de> for UnitVector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let c = <[f64; 3]>::deserialize(de)?;
        UnitVector::normalized(c[0], c[1], c[2]).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for UnitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6}, {:.6})", self.x, self.y, self.z)
    }
}

/// Σ aᵢbᵢ clamped to [−1, 1]. The summation order is fixed so the result is
/// exactly symmetric in its arguments.
pub fn dot(a: &UnitVector, b: &UnitVector) -> f64 {
    (a.x * b.x + a.y * b.y + a.z * b.z).clamp(-1.0, 1.0)
}

/// A measurement result, ±1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Outcome {
    Minus,
    Plus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    pub fn flip(self) -> Outcome {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Outcome::Plus => '+',
            Outcome::Minus => '-',
        }
    }
}

impl From<Outcome> for i8 {
    fn from(o: Outcome) -> i8 {
        o.value()
    }
}

impl TryFrom<i8> for Outcome {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(format!("outcome must be +1 or -1, got {other}")),
        }
    }
}

/// +1 for x ≥ 0 (including −0.0), −1 otherwise. Rejects NaN and infinities.
pub fn sign(x: f64) -> Result<Outcome> {
    if !x.is_finite() {
        return Err(SimError::NonFinite(x));
    }
    Ok(sign_of(x))
}

/// Infallible form of [`sign`] for values already known to be finite.
#[inline]
pub(crate) fn sign_of(x: f64) -> Outcome {
    if x >= 0.0 {
        Outcome::Plus
    } else {
        Outcome::Minus
    }
}

/// Uniform direction on S²: azimuth uniform on [0, 2π), cos θ uniform on [−1, 1].
pub fn sample_uniform_sphere<R: Rng + ?Sized>(rng: &mut R) -> UnitVector {
    let phi = TAU * rng.random::<f64>();
    let cos_theta = 2.0 * rng.random::<f64>() - 1.0;
    UnitVector::from_cos_azimuth(cos_theta, phi)
}
