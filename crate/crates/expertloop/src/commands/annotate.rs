//! `annotate`: consult the expert backend on every turn pair of a split
//! and write the annotations plus a failure report.

use std::io::Write;

use crate::annotate::{annotate_corpus, write_failure_report, AnnotateError};
use crate::config::Config;

use super::{build_cache, create_writer, load_exemplar_batch, load_split, CliError, SplitName};

pub fn cmd_annotate(
    config: &Config,
    split: SplitName,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let corpus = load_split(config, split)?;
    let exemplars = load_exemplar_batch(config)?;
    let options = config.annotate_options(exemplars);
    let backend = config.expert.build_backend();
    let cache = build_cache(config)?;

    let run = annotate_corpus(&corpus, backend.as_ref(), &options, cache.as_ref()).map_err(
        |e| match e {
            AnnotateError::TooManyFailures { .. } => CliError::Backend(e.to_string()),
        },
    )?;

    let dir = config.resolve(&config.annotate.output_dir);
    let annotations_path = dir.join(format!("annotations-{}.jsonl", split.as_str()));
    let mut writer = create_writer(&annotations_path)?;
    for annotated in &run.annotated {
        let line =
            serde_json::to_string(annotated).map_err(|e| CliError::Data(e.to_string()))?;
        writeln!(writer, "{line}").map_err(|e| CliError::Data(e.to_string()))?;
    }

    let failures_path = dir.join(format!("failures-{}.jsonl", split.as_str()));
    let failure_writer = create_writer(&failures_path)?;
    write_failure_report(&run.failures, failure_writer)
        .map_err(|e| CliError::Data(e.to_string()))?;

    writeln!(
        out,
        "annotated {} turn pairs ({} failures) with {} -> {}",
        run.annotated.len(),
        run.failures.len(),
        backend.id(),
        annotations_path.display()
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}
