//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point type the kinematics, plant and control code is written against.
///
/// Implemented for `f32` and `f64`. Sampling helpers live on the trait because
/// `rand_distr` bounds on the scalar are not implied through a supertrait.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// One draw from `N(mean, sigma^2)`. `sigma == 0` returns `mean` without consuming entropy.
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R, mean: Self, sigma: Self) -> Self;

    /// Uniform draw in `[0, 1)`.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R, mean: Self, sigma: Self) -> Self {
        if sigma == 0.0 {
            return mean;
        }
        let z: f64 = StandardNormal.sample(rng);
        mean + sigma * z
    }

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }
}

impl Scalar for f32 {
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R, mean: Self, sigma: Self) -> Self {
        if sigma == 0.0 {
            return mean;
        }
        let z: f32 = StandardNormal.sample(rng);
        mean + sigma * z
    }

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Scalar>(angle: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut a = angle % two_pi;
    if a <= -T::PI() {
        a = a + two_pi;
    } else if a > T::PI() {
        a = a - two_pi;
    }
    a
}

/// Signed shortest difference `a - b` between two angles.
pub fn angle_diff<T: Scalar>(a: T, b: T) -> T {
    wrap_angle(a - b)
}

/// Central difference `(f(x+h) - f(x-h)) / 2h`.
pub fn central_difference<T, E, F>(x: T, h: T, mut f: F) -> Result<T, E>
where
    T: Scalar,
    F: FnMut(T) -> Result<T, E>,
{
    let hi = f(x + h)?;
    let lo = f(x - h)?;
    Ok((hi - lo) / (h + h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn wrap_keeps_half_open_interval() {
        let pi = std::f64::consts::PI;
        assert_eq!(wrap_angle(pi), pi);
        assert!((wrap_angle(-pi) - pi).abs() < 1e-15);
        assert!((wrap_angle(3.0 * pi + 0.25) - (-pi + 0.25)).abs() < 1e-12);
        assert!((wrap_angle(0.3f32) - 0.3).abs() < 1e-7);
    }

    #[test]
    fn central_difference_of_constant_is_zero() {
        let d = central_difference(0.7, 1e-6, |_| Ok::<_, Infallible>(4.2)).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn central_difference_of_quadratic_is_exact_up_to_rounding() {
        let d = central_difference(1.5, 1e-3, |x| Ok::<_, Infallible>(x * x)).unwrap();
        assert!((d - 3.0).abs() < 1e-9);
    }

    #[test]
    fn zero_sigma_draw_is_mean() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        assert_eq!(f64::sample_normal(&mut rng, 2.5, 0.0), 2.5);
    }
}
