//! The numerical self-checks behind `gbrff check`.

fn main() {
    let outcomes = gbrff::check::run_all(0);
    for o in &outcomes {
        println!("{o}");
    }
    if outcomes.iter().any(|o| !o.passed) {
        std::process::exit(1);
    }
}
