//! Boundary-constrained minimum-snap polynomial segments.
//!
//! A segment between two states pinned up to jerk has eight boundary
//! conditions per axis, so the stationary point of the integrated squared
//! snap is the unique degree-7 interpolant of those conditions. Each axis is
//! solved as an 8×8 linear system in normalized time `τ = t / T` and the
//! coefficients are then rescaled to absolute seconds.
//!
//! Coefficients are stored in the monomial basis with time in seconds. That
//! is well conditioned for the sub-5 s segments used here; durations beyond
//! roughly 10 s would want a rescaled or Bernstein basis instead.
//!
//! Short segments have huge high-order coefficients (a 0.1 s hop needs
//! `c_7 ~ 1e9`), so plain `f64` evaluation of jerk at the far end cancels
//! terms of size `1e8` and loses about eight digits. Each coefficient
//! therefore carries its rounding residue, the solve is refined once in
//! double-double arithmetic, and evaluation uses compensated Horner.

use nalgebra::{SMatrix, SVector, Vector3};
use thiserror::Error;

/// Number of polynomial coefficients (degree 7).
pub const NUM_COEFFS: usize = 8;
/// Highest derivative order that [`Segment3D::evaluate`] accepts.
pub const MAX_DERIVATIVE: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajError {
    #[error("segment duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("boundary state or duration contains a non-finite value")]
    NonFiniteInput,
    #[error("time {t} outside segment [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("derivative order {0} not in 0..=4")]
    InvalidDerivativeOrder(usize),
    #[error("axis polynomials have different durations")]
    DurationMismatch,
}

/// Position and its first three derivatives at one end of a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub jerk: Vector3<f64>,
}

impl BoundaryState {
    pub fn at_rest(position: Vector3<f64>) -> Self {
        Self {
            position,
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
            jerk: Vector3::zeros(),
        }
    }

    pub fn with_velocity(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        Self {
            velocity,
            ..Self::at_rest(position)
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.position, self.velocity, self.acceleration, self.jerk]
            .iter()
            .all(|v| v.iter().all(|c| c.is_finite()))
    }

    /// The value of derivative `order` (0..=3) along `axis`.
    fn derivative(&self, order: usize, axis: usize) -> f64 {
        match order {
            0 => self.position[axis],
            1 => self.velocity[axis],
            2 => self.acceleration[axis],
            _ => self.jerk[axis],
        }
    }
}

/// Degree-7 polynomial `c_0 + c_1 t + ... + c_7 t^7` on `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polynomial1D {
    coefficients: [f64; NUM_COEFFS],
    /// Rounding residue: the exact coefficient is `coefficients[k] + low[k]`.
    low: [f64; NUM_COEFFS],
    duration: f64,
}

impl Polynomial1D {
    pub fn new(coefficients: [f64; NUM_COEFFS], duration: f64) -> Result<Self, TrajError> {
        if !duration.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(TrajError::NonFiniteInput);
        }
        if duration <= 0.0 {
            return Err(TrajError::NonPositiveDuration(duration));
        }
        Ok(Self {
            coefficients,
            low: [0.0; NUM_COEFFS],
            duration,
        })
    }

    fn coefficient(&self, k: usize) -> Dd {
        Dd {
            hi: self.coefficients[k],
            lo: self.low[k],
        }
    }

    pub fn coefficients(&self) -> &[f64; NUM_COEFFS] {
        &self.coefficients
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Derivative of the given order at `t`, without range checks.
    pub fn eval_unchecked(&self, t: f64, order: usize) -> f64 {
        // Compensated Horner over the differentiated coefficients.
        let mut acc = Dd::default();
        for k in (order..NUM_COEFFS).rev() {
            acc = acc.mul_f64(t).add(self.coefficient(k).mul_f64(falling_factorial(k, order)));
        }
        acc.value()
    }

    /// Plain Horner on the leading coefficients. Cheaper and slightly less exact.
    pub(crate) fn eval_plain(&self, t: f64, order: usize) -> f64 {
        let mut acc = 0.0;
        for k in (order..NUM_COEFFS).rev() {
            acc = acc * t + self.coefficients[k] * falling_factorial(k, order);
        }
        acc
    }

    /// Closed-form `∫_0^T (x''''(t))^2 dt`.
    pub fn snap_cost(&self) -> f64 {
        // snap(t) = Σ_m s_m t^m, m = 0..3
        let mut s = [0.0; 4];
        for (m, sm) in s.iter_mut().enumerate() {
            *sm = self.coefficients[m + 4] * falling_factorial(m + 4, 4);
        }
        let t = self.duration;
        let mut cost = 0.0;
        for (m, sm) in s.iter().enumerate() {
            for (n, sn) in s.iter().enumerate() {
                let p = (m + n + 1) as i32;
                cost += sm * sn * t.powi(p) / p as f64;
            }
        }
        cost.max(0.0)
    }

    fn affine(&self, scale: f64, other: &Self, other_scale: f64, offset: f64) -> Self {
        let mut out = Self {
            coefficients: [0.0; NUM_COEFFS],
            low: [0.0; NUM_COEFFS],
            duration: self.duration,
        };
        for k in 0..NUM_COEFFS {
            let mut c = self.coefficient(k).mul_f64(scale).add(other.coefficient(k).mul_f64(other_scale));
            if k == 0 {
                c = c.add(Dd::from(offset));
            }
            out.coefficients[k] = c.hi;
            out.low[k] = c.lo;
        }
        out
    }
}

/// Unevaluated sum `hi + lo` with roughly twice the precision of `f64`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Exact product as `(a * b, error)`.
#[cfg(target_feature = "fma")]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Exact product by Dekker splitting; a software fma is far slower.
#[cfg(not(target_feature = "fma"))]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    fn split(x: f64) -> (f64, f64) {
        let c = 134_217_729.0 * x; // 2^27 + 1
        let hi = c - (c - x);
        (hi, x - hi)
    }
    let p = a * b;
    let ((ah, al), (bh, bl)) = (split(a), split(b));
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

fn fast_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

impl Dd {
    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }

    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        fast_two_sum(s, e + self.lo + o.lo)
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        fast_two_sum(p, e + self.lo * b)
    }

    fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self.add(o.mul_f64(-q1));
        fast_two_sum(q1, r.value() / o.hi)
    }
}

/// `k! / (k - order)!`, zero when `order > k`.
/// `k! / (k - order)!`, tabulated for every coefficient and order.
const FALLING: [[f64; NUM_COEFFS]; NUM_COEFFS] = {
    let mut table = [[0.0; NUM_COEFFS]; NUM_COEFFS];
    let mut k = 0;
    while k < NUM_COEFFS {
        let mut order = 0;
        let mut value = 1.0;
        while order <= k {
            table[k][order] = value;
            value *= (k - order) as f64;
            order += 1;
        }
        k += 1;
    }
    table
};

fn falling_factorial(k: usize, order: usize) -> f64 {
    if order > k {
        0.0
    } else {
        FALLING[k][order]
    }
}

/// Three axis polynomials sharing one duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment3D {
    axes: [Polynomial1D; 3],
}

impl Segment3D {
    pub fn from_axes(x: Polynomial1D, y: Polynomial1D, z: Polynomial1D) -> Result<Self, TrajError> {
        let d = x.duration;
        if y.duration != d || z.duration != d {
            return Err(TrajError::DurationMismatch);
        }
        Ok(Self { axes: [x, y, z] })
    }

    /// A segment that stays at the origin for `duration`.
    pub fn zero(duration: f64) -> Result<Self, TrajError> {
        let p = Polynomial1D::new([0.0; NUM_COEFFS], duration)?;
        Ok(Self { axes: [p; 3] })
    }

    pub fn x(&self) -> &Polynomial1D {
        &self.axes[0]
    }
    pub fn y(&self) -> &Polynomial1D {
        &self.axes[1]
    }
    pub fn z(&self) -> &Polynomial1D {
        &self.axes[2]
    }
    pub fn axes(&self) -> &[Polynomial1D; 3] {
        &self.axes
    }

    pub fn duration(&self) -> f64 {
        self.axes[0].duration
    }

    /// Derivative `derivative_order` (0 = position ... 4 = snap) at time `t`.
    pub fn evaluate(&self, t: f64, derivative_order: usize) -> Result<Vector3<f64>, TrajError> {
        if derivative_order > MAX_DERIVATIVE {
            return Err(TrajError::InvalidDerivativeOrder(derivative_order));
        }
        let duration = self.duration();
        if !t.is_finite() || t < 0.0 || t > duration {
            return Err(TrajError::TimeOutOfRange { t, duration });
        }
        Ok(self.eval_unchecked(t, derivative_order))
    }

    /// Like [`evaluate`](Self::evaluate) but clamps `t` into the segment.
    pub fn sample(&self, t: f64, derivative_order: usize) -> Vector3<f64> {
        let t = t.clamp(0.0, self.duration());
        self.eval_unchecked(t, derivative_order.min(MAX_DERIVATIVE))
    }

    fn eval_unchecked(&self, t: f64, order: usize) -> Vector3<f64> {
        Vector3::new(
            self.axes[0].eval_unchecked(t, order),
            self.axes[1].eval_unchecked(t, order),
            self.axes[2].eval_unchecked(t, order),
        )
    }

    pub(crate) fn sample_plain(&self, t: f64, order: usize) -> Vector3<f64> {
        Vector3::from_fn(|i, _| self.axes[i].eval_plain(t, order))
    }

    /// Integrated squared snap norm over the segment, summed over axes.
    pub fn snap_cost(&self) -> f64 {
        self.axes.iter().map(Polynomial1D::snap_cost).sum()
    }

    /// Rotates the segment about world Z by `yaw` then translates it by `offset`.
    pub fn rigid_transform(&self, yaw: f64, offset: &Vector3<f64>) -> Self {
        let (s, c) = yaw.sin_cos();
        let [x, y, z] = &self.axes;
        Self {
            axes: [
                x.affine(c, y, -s, offset.x),
                x.affine(s, y, c, offset.y),
                z.affine(1.0, z, 0.0, offset.z),
            ],
        }
    }
}

/// Solves the minimum-snap segment joining `start` to `end` in `duration` seconds.
pub fn solve_min_snap_segment(
    start: &BoundaryState,
    end: &BoundaryState,
    duration: f64,
) -> Result<Segment3D, TrajError> {
    if !duration.is_finite() || !start.is_finite() || !end.is_finite() {
        return Err(TrajError::NonFiniteInput);
    }
    if duration <= 0.0 {
        return Err(TrajError::NonPositiveDuration(duration));
    }

    let system = normalized_system();
    let lu = system.lu();
    let mut powers = [Dd::from(1.0); NUM_COEFFS];
    for k in 1..NUM_COEFFS {
        powers[k] = powers[k - 1].mul_f64(duration);
    }
    let axes = [0, 1, 2].map(|axis| {
        // Right-hand side in normalized time: d^k/dτ^k = T^k d^k/dt^k.
        let mut rhs = [Dd::default(); NUM_COEFFS];
        for order in 0..4 {
            rhs[order] = powers[order].mul_f64(start.derivative(order, axis));
            rhs[order + 4] = powers[order].mul_f64(end.derivative(order, axis));
        }
        let solve = |b: &[Dd; NUM_COEFFS]| {
            lu.solve(&SVector::<f64, NUM_COEFFS>::from_fn(|i, _| b[i].value()))
                .expect("minimum-snap boundary system is nonsingular")
        };
        let first = solve(&rhs);
        let mut normalized = [Dd::default(); NUM_COEFFS];
        for (n, f) in normalized.iter_mut().zip(first.iter()) {
            *n = Dd::from(*f);
        }
        // One step of iterative refinement with the residual in double-double.
        let mut residual = rhs;
        for (i, r) in residual.iter_mut().enumerate() {
            for (k, n) in normalized.iter().enumerate() {
                *r = r.add(n.mul_f64(-system[(i, k)]));
            }
        }
        for (n, d) in normalized.iter_mut().zip(solve(&residual).iter()) {
            *n = n.add(Dd::from(*d));
        }
        let mut poly = Polynomial1D {
            coefficients: [0.0; NUM_COEFFS],
            low: [0.0; NUM_COEFFS],
            duration,
        };
        for k in 0..NUM_COEFFS {
            let c = normalized[k].div(powers[k]);
            poly.coefficients[k] = c.hi;
            poly.low[k] = c.lo;
        }
        poly
    });
    Ok(Segment3D { axes })
}

/// Rows 0..3: derivatives 0..3 at τ = 0; rows 4..7: the same at τ = 1.
fn normalized_system() -> SMatrix<f64, NUM_COEFFS, NUM_COEFFS> {
    let mut a = SMatrix::<f64, NUM_COEFFS, NUM_COEFFS>::zeros();
    for order in 0..4 {
        a[(order, order)] = falling_factorial(order, order);
        for k in order..NUM_COEFFS {
            a[(order + 4, k)] = falling_factorial(k, order);
        }
    }
    a
}
