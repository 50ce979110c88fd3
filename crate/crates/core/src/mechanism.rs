//! Gripper linkage: loop closure, driven-point kinematics and the motor torque
//! needed to transmit a grasp force.
//!
//! The linkage is a crank of radius `r` driving a closed loop of links `e` and
//! `d` between frame offsets `a`, `b`, `c`, `f`. For a crank angle `theta` the
//! loop closes when
//!
//! ```text
//! r cos(theta) + f = a + e cos(beta) + d cos(xi)
//! c + e sin(beta)  = b + d sin(xi)
//! ```
//!
//! and the finger point `M` sits at
//!
//! ```text
//! x_m = r cos(theta) + l_s + l_DM cos(xi)
//! y_m = l_p + l_DM sin(xi)
//! ```
//!
//! Two torque relations are provided. [`torque_virtual_work`] differentiates the
//! driven point through the solved linkage and is the one the rest of the crate
//! uses. [`torque_for_force`] is the closed-form relation
//! `T = P l_DM sin(xi) dxi/dtheta + P r sin(theta)`, kept for comparison via
//! [`discrepancy_table`].
//!
//! Lengths are millimetres, forces newtons, torques N*mm, angles radians.

use thiserror::Error;

use crate::scalar::{central_difference, lit, wrap_angle, Scalar};

/// Finite-difference step for `dxi/dtheta` and `d(x_m + y_m)/dtheta`, radians.
pub const JACOBIAN_STEP: f64 = 1e-6;

/// Loop-closure residual accepted for a solved state, millimetres.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Diagonal lengths below this are treated as a collapsed loop, millimetres.
pub const MIN_DIAGONAL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error("linkage cannot close at theta = {theta} rad (acos argument {argument})")]
    InfeasibleConfiguration { theta: f64, argument: f64 },
    #[error("loop diagonal collapsed at theta = {theta} rad (k = {k} mm)")]
    DegenerateDiagonal { theta: f64, k: f64 },
    #[error("no branch of the closure satisfies the loop equations at theta = {theta} rad")]
    NoConsistentBranch { theta: f64 },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid torque query: {0}")]
    InvalidQuery(String),
    #[error("force grid is empty")]
    EmptyGrid,
    #[error("force grid must be ascending and non-negative")]
    UnsortedGrid,
}

pub type Result<T, E = MechanismError> = std::result::Result<T, E>;

/// Assembly mode of the loop: which sign of the `acos` term is taken for `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assembly {
    /// `beta = -acos(..) - u`.
    #[default]
    Open,
    /// `beta = +acos(..) - u`.
    Crossed,
}

impl Assembly {
    fn acos_sign<T: Scalar>(self) -> T {
        match self {
            Assembly::Open => -T::one(),
            Assembly::Crossed => T::one(),
        }
    }
}

/// Link lengths and frame offsets of one finger linkage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperGeometry<T> {
    pub r: T,
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub e: T,
    pub f: T,
    pub l_s: T,
    pub l_p: T,
    pub l_dm: T,
    /// Nominal coupler angle between links `e` and `d`, radians.
    pub gamma: T,
    /// Admissible crank range, radians.
    pub theta_min: T,
    pub theta_max: T,
    pub assembly: Assembly,
}

impl<T: Scalar> GripperGeometry<T> {
    /// Repository reference linkage, feasible over `theta` in `[0, 1.2]` rad.
    pub fn reference() -> Self {
        Self {
            r: lit(15.0),
            a: lit(40.0),
            b: lit(10.0),
            c: lit(25.0),
            d: lit(35.0),
            e: lit(30.0),
            f: lit(20.0),
            l_s: lit(12.0),
            l_p: lit(18.0),
            l_dm: lit(45.0),
            gamma: lit(0.35),
            theta_min: T::zero(),
            theta_max: lit(1.2),
            assembly: Assembly::Open,
        }
    }

    fn residual_tol(&self) -> T {
        let scale = [self.r, self.a, self.b, self.c, self.d, self.e, self.f]
            .into_iter()
            .fold(T::one(), T::max);
        lit::<T>(RESIDUAL_TOL).max(lit::<T>(1000.0) * T::epsilon() * scale)
    }

    /// Checks positivity of every length and feasibility over the admissible range.
    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("r", self.r),
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("e", self.e),
            ("f", self.f),
            ("l_s", self.l_s),
            ("l_p", self.l_p),
            ("l_dm", self.l_dm),
        ];
        for (name, value) in lengths {
            if !(value > T::zero()) || !value.is_finite() {
                return Err(MechanismError::InvalidGeometry(format!(
                    "{name} must be a positive length, got {value}"
                )));
            }
        }
        if !(self.gamma.is_finite()) {
            return Err(MechanismError::InvalidGeometry(
                "gamma must be finite".into(),
            ));
        }
        if !(self.theta_min < self.theta_max) {
            return Err(MechanismError::InvalidGeometry(format!(
                "theta_min ({}) must be below theta_max ({})",
                self.theta_min, self.theta_max
            )));
        }
        for theta in self.sweep(257) {
            solve_linkage(self, theta)?;
        }
        Ok(())
    }

    /// `n` evenly spaced crank angles spanning the admissible range, endpoints included.
    pub fn sweep(&self, n: usize) -> Vec<T> {
        match n {
            0 => Vec::new(),
            1 => vec![self.theta_min],
            _ => {
                let span = self.theta_max - self.theta_min;
                let last = T::from_usize(n - 1).unwrap();
                (0..n)
                    .map(|i| self.theta_min + span * T::from_usize(i).unwrap() / last)
                    .collect()
            }
        }
    }

    pub fn in_range(&self, theta: T) -> bool {
        theta >= self.theta_min && theta <= self.theta_max
    }
}

/// Solved configuration of the loop for one crank angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkageState<T> {
    pub theta: T,
    pub beta: T,
    pub xi: T,
    pub u: T,
    /// Length of the diagonal closing the crank side of the loop, mm.
    pub k: T,
    /// Realized coupler angle `pi - beta - xi`, wrapped to `(-pi, pi]`.
    pub coupler_angle: T,
}

impl<T: Scalar> LinkageState<T> {
    /// Residuals of the two loop-closure equations, mm.
    pub fn loop_residuals(&self, geom: &GripperGeometry<T>) -> (T, T) {
        loop_residuals(geom, self.theta, self.beta, self.xi)
    }

    /// Difference between the realized coupler angle and the geometry's nominal one.
    pub fn coupler_deviation(&self, geom: &GripperGeometry<T>) -> T {
        wrap_angle(self.coupler_angle - geom.gamma)
    }
}

/// Loop-closure residuals for arbitrary `(theta, beta, xi)`.
pub fn loop_residuals<T: Scalar>(geom: &GripperGeometry<T>, theta: T, beta: T, xi: T) -> (T, T) {
    let horizontal =
        geom.r * theta.cos() + geom.f - geom.a - geom.e * beta.cos() - geom.d * xi.cos();
    let vertical = geom.c + geom.e * beta.sin() - geom.b - geom.d * xi.sin();
    (horizontal, vertical)
}

/// Closes the loop at crank angle `theta`.
///
/// `beta` comes from the law of cosines on the triangle formed by the diagonal
/// `k`, link `e` and link `d`; every sign branch of `u` and of the `acos` term is
/// tried, candidates that fail the loop equations are discarded, and the
/// geometry's [`Assembly`] picks among the survivors.
pub fn solve_linkage<T: Scalar>(geom: &GripperGeometry<T>, theta: T) -> Result<LinkageState<T>> {
    let horizontal = geom.r * theta.cos() + geom.f - geom.a;
    let vertical = geom.c - geom.b;
    let k = horizontal.hypot(vertical);
    if !(k >= lit(MIN_DIAGONAL)) {
        return Err(MechanismError::DegenerateDiagonal {
            theta: theta.to_f64().unwrap_or(f64::NAN),
            k: k.to_f64().unwrap_or(f64::NAN),
        });
    }

    let argument = (k * k + geom.e * geom.e - geom.d * geom.d) / (lit::<T>(2.0) * geom.e * k);
    if !(argument >= -T::one() && argument <= T::one()) {
        return Err(MechanismError::InfeasibleConfiguration {
            theta: theta.to_f64().unwrap_or(f64::NAN),
            argument: argument.to_f64().unwrap_or(f64::NAN),
        });
    }
    let opening = argument.acos();

    let u_quadrant = vertical.atan2(horizontal);
    let mut u_candidates = vec![u_quadrant];
    if horizontal != T::zero() {
        let u_principal = (vertical / horizontal).atan();
        if (u_principal - u_quadrant).abs() > T::epsilon() {
            u_candidates.push(u_principal);
        }
    }

    let tol = geom.residual_tol();
    let preferred = geom.assembly.acos_sign::<T>();
    let mut chosen = None;
    for &u in &u_candidates {
        for sign in [T::one(), -T::one()] {
            let beta = wrap_angle(sign * opening - u);
            let xi = (vertical + geom.e * beta.sin()).atan2(horizontal - geom.e * beta.cos());
            let (rx, ry) = loop_residuals(geom, theta, beta, xi);
            if rx.abs() > tol || ry.abs() > tol {
                continue;
            }
            if sign == preferred && chosen.is_none() {
                chosen = Some((beta, xi, u));
            }
        }
    }

    let (beta, xi, u) = chosen.ok_or(MechanismError::NoConsistentBranch {
        theta: theta.to_f64().unwrap_or(f64::NAN),
    })?;
    Ok(LinkageState {
        theta,
        beta,
        xi,
        u,
        k,
        coupler_angle: wrap_angle(T::PI() - beta - xi),
    })
}

/// Coordinates `(x_m, y_m)` of the driven finger point, mm.
pub fn driven_point<T: Scalar>(geom: &GripperGeometry<T>, state: &LinkageState<T>) -> (T, T) {
    let x = geom.r * state.theta.cos() + geom.l_s + geom.l_dm * state.xi.cos();
    let y = geom.l_p + geom.l_dm * state.xi.sin();
    (x, y)
}

/// `dxi/dtheta` by central difference with the default step.
pub fn linkage_jacobian<T: Scalar>(geom: &GripperGeometry<T>, theta: T) -> Result<T> {
    linkage_jacobian_with_step(geom, theta, lit(JACOBIAN_STEP))
}

/// `dxi/dtheta` by central difference with step `h`.
///
/// `xi` is unwrapped between the two probes so a crossing of `+-pi` does not
/// produce a spurious `2 pi / 2h` spike.
pub fn linkage_jacobian_with_step<T: Scalar>(
    geom: &GripperGeometry<T>,
    theta: T,
    h: T,
) -> Result<T> {
    let centre = solve_linkage(geom, theta)?.xi;
    central_difference(theta, h, |t| {
        let xi = solve_linkage(geom, t)?.xi;
        Ok(centre + wrap_angle(xi - centre))
    })
}

/// Grasp query: crank angle and transmitted force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueQuery<T> {
    pub theta: T,
    pub force: T,
}

impl<T: Scalar> TorqueQuery<T> {
    pub fn new(theta: T, force: T) -> Self {
        Self { theta, force }
    }

    pub fn validate(&self, geom: &GripperGeometry<T>) -> Result<()> {
        if !(self.force >= T::zero()) || !self.force.is_finite() {
            return Err(MechanismError::InvalidQuery(format!(
                "force must be non-negative, got {}",
                self.force
            )));
        }
        if !geom.in_range(self.theta) {
            return Err(MechanismError::InvalidQuery(format!(
                "theta {} outside admissible range [{}, {}]",
                self.theta, geom.theta_min, geom.theta_max
            )));
        }
        Ok(())
    }
}

/// Closed-form torque `T = P l_DM sin(xi) dxi/dtheta + P r sin(theta)`, N*mm.
pub fn torque_for_force<T: Scalar>(geom: &GripperGeometry<T>, q: &TorqueQuery<T>) -> Result<T> {
    q.validate(geom)?;
    let state = solve_linkage(geom, q.theta)?;
    let dxi = linkage_jacobian(geom, q.theta)?;
    Ok(q.force * geom.l_dm * state.xi.sin() * dxi + q.force * geom.r * q.theta.sin())
}

/// The same relation with `(cos(xi) - sin(xi))` in place of `sin(xi)`, as it
/// appears one line before the closed form. Diagnostic only.
pub fn torque_intermediate<T: Scalar>(geom: &GripperGeometry<T>, q: &TorqueQuery<T>) -> Result<T> {
    q.validate(geom)?;
    let state = solve_linkage(geom, q.theta)?;
    let dxi = linkage_jacobian(geom, q.theta)?;
    Ok(
        q.force * geom.l_dm * (state.xi.cos() - state.xi.sin()) * dxi
            + q.force * geom.r * q.theta.sin(),
    )
}

/// `x_m + y_m` at crank angle `theta`.
fn driven_sum<T: Scalar>(geom: &GripperGeometry<T>, theta: T) -> Result<T> {
    let state = solve_linkage(geom, theta)?;
    let (x, y) = driven_point(geom, &state);
    Ok(x + y)
}

/// Derivative of `x_m + y_m` with respect to the crank angle, mm/rad.
pub fn driven_sum_rate<T: Scalar>(geom: &GripperGeometry<T>, theta: T, h: T) -> Result<T> {
    central_difference(theta, h, |t| driven_sum(geom, t))
}

/// Torque balancing the force `P` acting on the driven point along `x` and `y`:
/// `T = -P d(x_m + y_m)/dtheta`, N*mm.
pub fn torque_virtual_work<T: Scalar>(geom: &GripperGeometry<T>, q: &TorqueQuery<T>) -> Result<T> {
    torque_virtual_work_with_step(geom, q, lit(JACOBIAN_STEP))
}

pub fn torque_virtual_work_with_step<T: Scalar>(
    geom: &GripperGeometry<T>,
    q: &TorqueQuery<T>,
    h: T,
) -> Result<T> {
    q.validate(geom)?;
    let rate = driven_sum_rate(geom, q.theta, h)?;
    Ok(-q.force * rate)
}

/// Crank angle at which the fingers hold a given force.
///
/// Linear schedule `theta(P) = theta_at_zero + rad_per_newton * P`; a zero slope
/// pins the configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactMap<T> {
    pub theta_at_zero: T,
    pub rad_per_newton: T,
}

impl<T: Scalar> ContactMap<T> {
    pub fn constant(theta: T) -> Self {
        Self {
            theta_at_zero: theta,
            rad_per_newton: T::zero(),
        }
    }

    pub fn theta_for(&self, force: T) -> T {
        self.theta_at_zero + self.rad_per_newton * force
    }
}

impl<T: Scalar> Default for ContactMap<T> {
    fn default() -> Self {
        Self {
            theta_at_zero: lit(0.2),
            rad_per_newton: lit(0.8),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint<T> {
    pub force: T,
    pub theta: T,
    pub torque: T,
}

/// Motor torque over a grid of desired grasp forces, following the contact map.
pub fn force_torque_curve<T: Scalar>(
    geom: &GripperGeometry<T>,
    contact_map: &ContactMap<T>,
    force_grid: &[T],
) -> Result<Vec<CurvePoint<T>>> {
    if force_grid.is_empty() {
        return Err(MechanismError::EmptyGrid);
    }
    if force_grid.iter().any(|p| !(*p >= T::zero()))
        || force_grid.windows(2).any(|w| !(w[0] <= w[1]))
    {
        return Err(MechanismError::UnsortedGrid);
    }
    force_grid
        .iter()
        .map(|&force| {
            let theta = contact_map.theta_for(force);
            let torque = torque_virtual_work(geom, &TorqueQuery::new(theta, force))?;
            Ok(CurvePoint {
                force,
                theta,
                torque,
            })
        })
        .collect()
}

/// Evenly spaced grid `[lo, hi]` with `n` points.
pub fn force_grid<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let last = T::from_usize(n - 1).unwrap();
            (0..n)
                .map(|i| lo + (hi - lo) * T::from_usize(i).unwrap() / last)
                .collect()
        }
    }
}

/// Actuator demand for `fingers` fingers closing together through a transmission
/// of efficiency `efficiency`.
pub fn multi_finger_demand<T: Scalar>(single: T, fingers: u32, efficiency: T) -> T {
    T::from_u32(fingers).unwrap() * single / efficiency
}

/// One row of the comparison between the virtual-work torque and the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyRow<T> {
    pub theta: T,
    pub virtual_work: T,
    pub closed_form: T,
    pub intermediate: T,
    pub abs_diff: T,
    /// `|closed_form - virtual_work| / |virtual_work|`; NaN where the latter vanishes.
    pub rel_diff: T,
}

/// Compares [`torque_virtual_work`] with [`torque_for_force`] (and the
/// intermediate variant) at each crank angle for a fixed force.
pub fn discrepancy_table<T: Scalar>(
    geom: &GripperGeometry<T>,
    thetas: &[T],
    force: T,
) -> Result<Vec<DiscrepancyRow<T>>> {
    thetas
        .iter()
        .map(|&theta| {
            let q = TorqueQuery::new(theta, force);
            let virtual_work = torque_virtual_work(geom, &q)?;
            let closed_form = torque_for_force(geom, &q)?;
            let intermediate = torque_intermediate(geom, &q)?;
            let abs_diff = (closed_form - virtual_work).abs();
            let rel_diff = if virtual_work == T::zero() {
                T::nan()
            } else {
                abs_diff / virtual_work.abs()
            };
            Ok(DiscrepancyRow {
                theta,
                virtual_work,
                closed_form,
                intermediate,
                abs_diff,
                rel_diff,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> GripperGeometry<f64> {
        GripperGeometry::reference()
    }

    #[test]
    fn reference_geometry_validates() {
        reference().validate().unwrap();
        GripperGeometry::<f32>::reference().validate().unwrap();
    }

    #[test]
    fn aligned_frame_offsets_give_zero_u() {
        let geom = GripperGeometry {
            c: 10.0,
            b: 10.0,
            f: 50.0,
            ..reference()
        };
        for theta in [0.0, 0.4, 1.0] {
            let state = solve_linkage(&geom, theta).unwrap();
            assert_eq!(state.u, 0.0);
        }
    }

    #[test]
    fn residuals_vanish_across_range() {
        let geom = reference();
        for theta in geom.sweep(101) {
            let state = solve_linkage(&geom, theta).unwrap();
            let (rx, ry) = state.loop_residuals(&geom);
            assert!(
                rx.abs() <= 1e-9 && ry.abs() <= 1e-9,
                "theta {theta}: {rx} {ry}"
            );
            assert_relative_eq!(
                wrap_angle(state.xi + state.beta + state.coupler_angle),
                wrap_angle(std::f64::consts::PI),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn both_assemblies_close_the_loop() {
        let crossed = GripperGeometry {
            assembly: Assembly::Crossed,
            ..reference()
        };
        let a = solve_linkage(&reference(), 0.5).unwrap();
        let b = solve_linkage(&crossed, 0.5).unwrap();
        assert!((a.beta - b.beta).abs() > 0.1);
        let (rx, ry) = b.loop_residuals(&crossed);
        assert!(rx.abs() < 1e-9 && ry.abs() < 1e-9);
    }

    #[test]
    fn unreachable_crank_angle_is_infeasible() {
        let geom = GripperGeometry {
            d: 80.0,
            ..reference()
        };
        match solve_linkage(&geom, 0.0) {
            Err(MechanismError::InfeasibleConfiguration { argument, .. }) => {
                assert!(argument < -1.0)
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn collapsed_diagonal_is_reported() {
        // r cos(0) + f - a = 0 and c = b.
        let geom = GripperGeometry {
            r: 20.0,
            f: 20.0,
            a: 40.0,
            c: 10.0,
            b: 10.0,
            ..reference()
        };
        assert!(matches!(
            solve_linkage(&geom, 0.0),
            Err(MechanismError::DegenerateDiagonal { .. })
        ));
    }

    #[test]
    fn invalid_lengths_rejected() {
        let geom = GripperGeometry {
            e: 0.0,
            ..reference()
        };
        assert!(matches!(
            geom.validate(),
            Err(MechanismError::InvalidGeometry(_))
        ));
        let geom = GripperGeometry {
            theta_min: 1.0,
            theta_max: 0.5,
            ..reference()
        };
        assert!(geom.validate().is_err());
    }

    #[test]
    fn driven_point_trivial_angles() {
        let geom = reference();
        let state = LinkageState {
            theta: 0.0,
            beta: 0.0,
            xi: 0.0,
            u: 0.0,
            k: 1.0,
            coupler_angle: 0.0,
        };
        let (x, y) = driven_point(&geom, &state);
        assert_eq!(x, geom.r + geom.l_s + geom.l_dm);
        assert_eq!(y, geom.l_p);
        let up = LinkageState {
            xi: std::f64::consts::FRAC_PI_2,
            ..state
        };
        assert_relative_eq!(driven_point(&geom, &up).1, geom.l_p + geom.l_dm);
    }

    #[test]
    fn driven_point_matches_hand_substitution() {
        let geom = reference();
        let state = solve_linkage(&geom, 0.5).unwrap();
        let (x, y) = driven_point(&geom, &state);
        let x_hand = 15.0 * 0.5f64.cos() + 12.0 + 45.0 * state.xi.cos();
        let y_hand = 18.0 + 45.0 * state.xi.sin();
        assert_eq!(x, x_hand);
        assert_eq!(y, y_hand);
    }

    #[test]
    fn jacobian_vanishes_at_symmetric_crank_angle() {
        // xi depends on theta only through cos(theta), so the probes at +-h coincide.
        let j = linkage_jacobian(&reference(), 0.0).unwrap();
        assert_eq!(j, 0.0);
    }

    #[test]
    fn jacobian_step_halving() {
        let geom = reference();
        let coarse = linkage_jacobian(&geom, 0.5).unwrap();
        let fine = linkage_jacobian_with_step(&geom, 0.5, 1e-7).unwrap();
        assert!(((coarse - fine) / coarse).abs() < 1e-4);
    }

    #[test]
    fn jacobian_finite_over_sweep() {
        let geom = reference();
        for theta in geom.sweep(200) {
            assert!(linkage_jacobian(&geom, theta).unwrap().is_finite());
        }
    }

    #[test]
    fn torques_vanish_without_force() {
        let geom = reference();
        let q = TorqueQuery::new(0.5, 0.0);
        assert_eq!(torque_for_force(&geom, &q).unwrap(), 0.0);
        assert_eq!(torque_virtual_work(&geom, &q).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_at_zero_crank_drops_crank_term() {
        let geom = reference();
        let q = TorqueQuery::new(0.0, 0.7);
        let state = solve_linkage(&geom, 0.0).unwrap();
        let j = linkage_jacobian(&geom, 0.0).unwrap();
        assert_eq!(
            torque_for_force(&geom, &q).unwrap(),
            0.7 * geom.l_dm * state.xi.sin() * j + 0.7 * geom.r * 0.0f64.sin()
        );
    }

    #[test]
    fn virtual_work_torque_is_linear_in_force() {
        let geom = reference();
        let one = torque_virtual_work(&geom, &TorqueQuery::new(0.5, 1.0)).unwrap();
        let two = torque_virtual_work(&geom, &TorqueQuery::new(0.5, 2.0)).unwrap();
        assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn query_validation() {
        let geom = reference();
        assert!(torque_virtual_work(&geom, &TorqueQuery::new(0.5, -1.0)).is_err());
        assert!(torque_virtual_work(&geom, &TorqueQuery::new(1.5, 1.0)).is_err());
    }

    #[test]
    fn curve_edge_cases() {
        let geom = reference();
        let map = ContactMap::default();
        let single = force_torque_curve(&geom, &map, &[0.0]).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!((single[0].force, single[0].torque), (0.0, 0.0));
        assert_eq!(
            force_torque_curve(&geom, &map, &[]),
            Err(MechanismError::EmptyGrid)
        );
        assert_eq!(
            force_torque_curve(&geom, &map, &[0.5, 0.2]),
            Err(MechanismError::UnsortedGrid)
        );
    }

    #[test]
    fn fixed_configuration_curve_is_linear() {
        let geom = reference();
        let grid = force_grid(0.0, 1.0, 11);
        let curve = force_torque_curve(&geom, &ContactMap::constant(0.6), &grid).unwrap();
        let per_newton = curve[10].torque;
        for point in &curve {
            assert_relative_eq!(point.torque, per_newton * point.force, max_relative = 1e-12);
        }
    }

    #[test]
    fn default_curve_strictly_increasing() {
        let geom = reference();
        let curve =
            force_torque_curve(&geom, &ContactMap::default(), &force_grid(0.0, 1.0, 21)).unwrap();
        for pair in curve.windows(2) {
            assert!(pair[1].torque > pair[0].torque);
        }
    }

    #[test]
    fn multi_finger_scaling() {
        assert_relative_eq!(multi_finger_demand(10.0, 6, 0.8), 75.0);
    }

    #[test]
    fn f32_path_closes_loop() {
        let geom = GripperGeometry::<f32>::reference();
        let state = solve_linkage(&geom, 0.5).unwrap();
        let (rx, ry) = state.loop_residuals(&geom);
        assert!(rx.abs() < 1e-3 && ry.abs() < 1e-3);
    }
}
