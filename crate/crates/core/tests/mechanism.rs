use auxgrip::mechanism::{
    force_grid, force_torque_curve, linkage_jacobian, multi_finger_demand, solve_linkage,
    torque_virtual_work, ContactMap, GripperGeometry, MechanismError, TorqueQuery,
};
use proptest::prelude::*;

#[test]
fn short_output_link_is_infeasible_not_nan() {
    let geom = GripperGeometry {
        d: 1.0,
        ..GripperGeometry::<f64>::reference()
    };
    match geom.validate() {
        Err(MechanismError::InfeasibleConfiguration { argument, .. }) => {
            assert!(argument.abs() > 1.0)
        }
        other => panic!("expected infeasibility, got {other:?}"),
    }
    assert!(matches!(
        solve_linkage(&geom, 0.5),
        Err(MechanismError::InfeasibleConfiguration { .. })
    ));
}

#[test]
fn empty_grid_is_an_error() {
    let geom = GripperGeometry::<f64>::reference();
    let grid = force_grid(0.0, 1.0, 0);
    assert!(grid.is_empty());
    assert!(force_torque_curve(&geom, &ContactMap::constant(0.6), &grid).is_err());
}

proptest! {
    #[test]
    fn loop_closes_everywhere_in_range(frac in 0.0f64..=1.0) {
        let geom = GripperGeometry::<f64>::reference();
        let theta = geom.theta_min + frac * (geom.theta_max - geom.theta_min);
        let s = solve_linkage(&geom, theta).unwrap();
        let (rx, ry) = s.loop_residuals(&geom);
        prop_assert!(rx.abs() <= 1e-9 && ry.abs() <= 1e-9);
    }

    #[test]
    fn torque_is_homogeneous_in_force(frac in 0.01f64..0.99, p in 0.0f64..20.0, k in 0.0f64..10.0) {
        let geom = GripperGeometry::<f64>::reference();
        let theta = geom.theta_min + frac * (geom.theta_max - geom.theta_min);
        let t1 = torque_virtual_work(&geom, &TorqueQuery::new(theta, p)).unwrap();
        let tk = torque_virtual_work(&geom, &TorqueQuery::new(theta, k * p)).unwrap();
        prop_assert!((tk - k * t1).abs() <= 1e-12 * (1.0 + tk.abs()));
    }

    #[test]
    fn jacobian_matches_wide_difference(frac in 0.05f64..0.95) {
        let geom = GripperGeometry::<f64>::reference();
        let theta = geom.theta_min + frac * (geom.theta_max - geom.theta_min);
        let h = 1e-4;
        let wide = (solve_linkage(&geom, theta + h).unwrap().xi - solve_linkage(&geom, theta - h).unwrap().xi) / (2.0 * h);
        let j = linkage_jacobian(&geom, theta).unwrap();
        prop_assert!((wide - j).abs() <= 1e-6 * (1.0 + j.abs()));
    }

    #[test]
    fn demand_scales_linearly(single in 0.0f64..100.0, fingers in 1u32..12, eta in 0.05f64..=1.0) {
        let d = multi_finger_demand(single, fingers, eta);
        prop_assert!((d - single * fingers as f64 / eta).abs() <= 1e-9 * (1.0 + d));
    }
}
