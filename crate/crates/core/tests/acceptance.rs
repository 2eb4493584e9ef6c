//! Acceptance checks, one PASS/FAIL line per criterion. Criteria 8 and 9
//! train models and take a few minutes. Exits non-zero if any check fails.

use loarm::verify::{self, CheckOutcome, GraphTrend, GridRun};

fn main() {
    let checks: Vec<fn() -> CheckOutcome> = vec![
        || verify::check_gradients(50),
        || verify::check_elbo_unbiased(200_000, &[29, 30, 31]),
        || verify::check_rloo_unbiased(100_000),
        || verify::check_ao_reduction(1000),
        || verify::check_bound(20),
        || verify::check_plackett_luce(100_000),
        || verify::check_graph_symmetry(100),
        || verify::check_border_first(&GridRun::default()),
        || verify::check_graph_trend(&GraphTrend::default()),
        || verify::check_top_p(200),
        verify::check_trace_machinery,
    ];
    let mut failed = 0;
    for check in checks {
        let c = check();
        println!("{}", c.line());
        failed += usize::from(!c.passed);
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
