pub mod attack;
pub mod generate;
pub mod ingest;
pub mod quality;
pub mod report;
pub mod train;

use std::path::PathBuf;

use spai_core::trainer::EmbedderChoice;

use crate::io::usage;

pub const INCEPTION_ENV: &str = "SPAI_INCEPTION_WEIGHTS";

/// `auto` picks Inception when its weights are configured in the
/// environment and the lite embedder otherwise.
pub fn embedder_choice(arg: &str) -> anyhow::Result<EmbedderChoice> {
    let env = std::env::var_os(INCEPTION_ENV).map(PathBuf::from);
    Ok(match arg.split_once(':').map_or((arg, None), |(k, p)| (k, Some(p))) {
        ("auto", None) => env.map_or(EmbedderChoice::Lite, |weights| EmbedderChoice::Inception { weights }),
        ("lite", None) => EmbedderChoice::Lite,
        ("inception", None) => {
            let weights = env.ok_or_else(|| usage(format!("inception embedder needs a weights path or {INCEPTION_ENV}")))?;
            EmbedderChoice::Inception { weights }
        }
        ("inception", Some(p)) if !p.is_empty() => EmbedderChoice::Inception { weights: p.into() },
        _ => return Err(usage(format!("unknown embedder {arg:?}; use auto, lite or inception[:path]"))),
    })
}
