use anyhow::Context;
use spai_core::corpus::{ingest_directory, LabelingRules};

use crate::args::IngestArgs;
use crate::io::fresh_file;

pub fn run(args: IngestArgs) -> anyhow::Result<()> {
    let rules = match &args.labeling {
        Some(p) => LabelingRules::load(p).with_context(|| format!("labeling rules {}", p.display()))?,
        None => LabelingRules::default(),
    };
    fresh_file(&args.out, args.force)?;
    let report = ingest_directory(&args.dir, &rules)?;
    for f in &report.failures {
        eprintln!("skipped {}: {}", f.path.display(), f.reason);
    }
    report.manifest.save(&args.out)?;
    let m = &report.manifest;
    println!(
        "{} records ({}x{} modal), {} skipped -> {}",
        m.len(),
        m.source_resolution.0,
        m.source_resolution.1,
        report.failures.len(),
        args.out.display()
    );
    Ok(())
}
