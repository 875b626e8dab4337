//! The eight acceptance criteria at their stated tolerances, one line each.
//! Runs without the libtest harness so the lines are always printed.

use std::process::ExitCode;
use std::time::Instant;

use holonomy::verify::{verify_all, Tolerances};

fn main() -> ExitCode {
    let start = Instant::now();
    let criteria = verify_all(0, &Tolerances::default());
    for c in &criteria {
        println!("{}", c.summary());
        for check in &c.checks {
            println!("      {check}");
        }
    }
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    let failing: Vec<usize> = criteria.iter().filter(|c| !c.pass()).map(|c| c.id).collect();
    if criteria.len() == 8 && failing.is_empty() {
        println!("acceptance: all 8 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failing:?}");
        ExitCode::FAILURE
    }
}
