//! Run a quick verification suite and aggregate its certificates.

use invsq::cli::{verify, Preset, Report, RunConfig, Suite};

fn main() -> invsq::error::Result<()> {
    let out = std::env::temp_dir().join("invsq_certificates");
    let cfg = RunConfig {
        preset: Preset::Quick,
        params: vec![(3, 0.5)],
        s: vec![1.0],
        p: vec![2.0],
        weights: vec!["1".into()],
        family_size: Some(8),
        out: out.clone(),
        ..RunConfig::default()
    };
    for suite in [Suite::Hardy, Suite::Equivalence, Suite::Difference] {
        let recs = verify(&cfg, suite)?;
        println!("{}: {}/{} pass", suite.name(), recs.iter().filter(|r| r.pass).count(), recs.len());
    }
    let report = Report::load(&out)?;
    report.write(&out)?;
    print!("{}", report.markdown());
    Ok(())
}
