mod support;

use support::checks;

#[test]
fn servo_step_matches_second_order_response() {
    let err = checks::servo_step_error(0.1, 1.0, 1e-4);
    assert!(err < 1e-3, "{err:e}");
}
