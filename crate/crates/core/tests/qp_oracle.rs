use dhocbf_core::dynamics::ControlInput;
use dhocbf_core::oracle::{brute_force_qp, brute_force_slack_qp, slack_objective};
use dhocbf_core::safety_filter::{
    objective, solve_qp2, solve_slack_qp, ControlBox, LinearConstraintRow, QpStatus, RowSource, FEASIBILITY_TOL,
};
use proptest::prelude::*;

const RES: f64 = 1e-2;

fn rows_strategy() -> impl Strategy<Value = Vec<LinearConstraintRow>> {
    proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -8.0..8.0f64), 0..=6).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (ax, ay, b))| LinearConstraintRow::new([ax, ay], b, RowSource::Given(i)))
            .collect()
    })
}

fn u_strategy() -> impl Strategy<Value = ControlInput> {
    (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y)| ControlInput::new(x, y))
}

/// Largest change of the objective over one grid cell inside the box.
fn objective_slack(u_ref: &ControlInput, bx: &ControlBox) -> f64 {
    let gx = (u_ref.ux - bx.min[0]).abs().max((u_ref.ux - bx.max[0]).abs());
    let gy = (u_ref.uy - bx.min[1]).abs().max((u_ref.uy - bx.max[1]).abs());
    2.0 * RES * 2.0 * (gx + gy)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_qp_is_never_beaten_by_the_grid(u_ref in u_strategy(), rows in rows_strategy()) {
        let bx = ControlBox::default();
        let exact = solve_qp2(u_ref, &rows, &bx).unwrap();
        let grid = brute_force_qp(u_ref, &rows, &bx, RES).unwrap();
        if grid.status == QpStatus::Optimal {
            prop_assert_eq!(exact.status, QpStatus::Optimal);
        }
        if exact.status == QpStatus::Optimal {
            for r in &rows {
                prop_assert!(r.residual(&exact.u_star) <= FEASIBILITY_TOL);
            }
            prop_assert!(bx.contains(&exact.u_star));
            prop_assert_eq!(exact.slack, 0.0);
            if grid.status == QpStatus::Optimal {
                let (e, g) = (objective(&exact.u_star, &u_ref), objective(&grid.u_star, &u_ref));
                prop_assert!(e <= g + 1e-9, "exact {} grid {}", e, g);
            }
        }
    }

    #[test]
    fn relaxed_qp_matches_grid_penalty(u_ref in u_strategy(), rows in rows_strategy(), log_rho in 0.0..3.0f64) {
        let bx = ControlBox::default();
        let rho = 10f64.powf(log_rho);
        let exact = solve_slack_qp(u_ref, &rows, &bx, rho).unwrap();
        let hard = solve_qp2(u_ref, &rows, &bx).unwrap();
        if hard.status == QpStatus::Optimal {
            prop_assert_eq!(exact, hard);
            return Ok(());
        }
        prop_assert_eq!(exact.status, QpStatus::Relaxed);
        let (_, grid_obj) = brute_force_slack_qp(u_ref, &rows, &bx, rho, RES).unwrap();
        let e = slack_objective(&exact.u_star, &u_ref, &rows, rho);
        prop_assert!(e <= grid_obj + 1e-6 * (1.0 + grid_obj), "exact {} grid {}", e, grid_obj);
        let worst = rows.iter().map(|r| r.residual(&exact.u_star)).fold(0.0, f64::max);
        prop_assert!((worst - exact.slack).abs() <= 1e-6 * (1.0 + worst));
        // and within one grid cell's worth of objective change of the grid optimum
        let steep = rows.iter().map(|r| r.a[0].abs() + r.a[1].abs()).fold(0.0, f64::max);
        let cell = objective_slack(&u_ref, &bx) + 2.0 * RES * rho * (worst + RES * steep) * steep;
        prop_assert!(grid_obj <= e + cell + 1e-9);
    }
}

#[test]
fn head_on_slack_sits_on_box_face() {
    // b < -|a| * box radius: no box point satisfies the row
    let bx = ControlBox::default();
    let rows = [LinearConstraintRow::new([16.0, 0.0], -65.0, RowSource::Dhocbf(0))];
    let u_ref = ControlInput::new(0.5, 0.25);
    let exact = solve_slack_qp(u_ref, &rows, &bx, 1e6).unwrap();
    assert_eq!(exact.status, QpStatus::Relaxed);
    assert!((exact.u_star.ux + 3.0).abs() < 1e-9);
    assert!((exact.u_star.uy - 0.25).abs() < 1e-9);
    assert!((exact.slack - 17.0).abs() < 1e-9);
    let (grid_u, _) = brute_force_slack_qp(u_ref, &rows, &bx, 1e6, 1e-3).unwrap();
    assert!((grid_u.ux - exact.u_star.ux).abs() <= 1e-3);
    assert!((grid_u.uy - exact.u_star.uy).abs() <= 1e-3);
}
