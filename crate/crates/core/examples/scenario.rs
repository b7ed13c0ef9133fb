//! Twelve panels, four with broken glass: runs the diagnosis and checks it against
//! the generator's labels. Pass a seed as the first argument.

use std::time::Instant;

use pvdtw::{broken_glass_profiles, diagnose, generate_fleet, DayModel, DiagnoseConfig};

fn main() -> pvdtw::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let profiles = broken_glass_profiles(12, 4, 0.75);
    let (fleet, truth) = generate_fleet(12, &profiles, &DayModel::default(), seed)?;
    let start = Instant::now();
    let report = diagnose(&fleet, &DiagnoseConfig::default())?;
    let hits = report
        .verdicts
        .iter()
        .filter(|v| truth.label_of(&v.panel_id) == Some(v.verdict))
        .count();
    print!("{}", report.summary());
    println!("matches ground truth: {hits}/12 in {:.2?}", start.elapsed());
    Ok(())
}
