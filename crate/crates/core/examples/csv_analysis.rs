//! End-to-end analysis of a CSV file: write a synthetic survey-like data set,
//! ingest it with complete-case filtering, and print the report.

use ebmt::analysis::{
    nmes_like_fixture, render, run_analysis, AnalysisConfig, OutputFormat, NMES_COVARIATES,
    NMES_OUTCOME, NMES_TREATMENTS,
};

pub fn run_example() -> ebmt::Result<()> {
    let dir = std::env::temp_dir().join(format!("ebmt-csv-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("survey.csv");
    std::fs::write(&path, nmes_like_fixture(800, 4)?)?;

    let mut config = AnalysisConfig::new(&path, NMES_OUTCOME, &NMES_TREATMENTS, &NMES_COVARIATES);
    config.model = Some("1 + duration + frequency".into());
    config.original_units = true;
    let report = run_analysis(&config)?;
    print!("{}", render(&report, OutputFormat::Table)?);

    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn main() -> ebmt::Result<()> {
    run_example()
}
