mod support;

use support::gradcheck::all_checks;

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in [11, 12] {
        for r in all_checks(seed) {
            assert!(r.probes > 0);
            assert!(
                r.skipped * 50 <= r.probes,
                "{}: {} probes sat on kinks",
                r.what,
                r.skipped
            );
            assert!(
                r.max_rel <= 1e-4,
                "{}: max relative error {:e}",
                r.what,
                r.max_rel
            );
        }
    }
}
