use powerlaw_fem::manufactured::{case_m1, case_pressure_only, ManufacturedCase};
use powerlaw_fem::verify::run_convergence_study;
use powerlaw_fem::{PowerLawParams, SolverConfig};

#[test]
fn newtonian_study_converges_at_first_order() {
    let params = PowerLawParams::new(2.0, 2).unwrap();
    let study =
        run_convergence_study(&case_m1(), &params, 4, 3, &SolverConfig::for_exponent(2.0)).unwrap();
    let table = &study.table;
    assert!(table.rows.iter().all(|r| r.failure.is_none()));
    assert!(table.errors_non_increasing(), "{}", table.to_csv());
    let order = table.finest_velocity_order().unwrap();
    assert!((0.8..1.3).contains(&order), "order {order}");
    assert!(table.rows.iter().all(|r| r.max_div_l < 1e-10));
}

#[test]
fn cases_resolve_by_name() {
    assert_eq!(
        ManufacturedCase::by_name("M1").unwrap().name,
        case_m1().name
    );
    assert_eq!(
        ManufacturedCase::by_name("pressure-only").unwrap().name,
        case_pressure_only().name
    );
    assert!(ManufacturedCase::by_name("M9").is_err());
}

#[test]
fn pressure_only_case_drives_velocity_error_down() {
    let params = PowerLawParams::new(2.0, 2).unwrap();
    let study = run_convergence_study(
        &case_pressure_only(),
        &params,
        4,
        3,
        &SolverConfig::for_exponent(2.0),
    )
    .unwrap();
    let rows = &study.table.rows;
    assert!(rows[2].err_u_w1r < rows[1].err_u_w1r && rows[1].err_u_w1r < rows[0].err_u_w1r);
    assert!(rows[2].err_p_lrt < rows[0].err_p_lrt);
}
