//! `eval-acute`: filter judgments, measure agreement, select questions,
//! and aggregate net win rates against the tasks manifest.

use std::io::Write;
use std::path::Path;

use crate::acute::{
    default_question_bank, evaluate_judgments, read_judgments_csv, read_judgments_jsonl,
    read_question_bank_json, read_tasks_json, write_acute_report_csv, write_acute_report_json,
    AcuteError,
};
use crate::config::Config;

use super::{create_writer, open_reader, CliError};

fn map_acute_error(error: AcuteError) -> CliError {
    match error {
        AcuteError::Io(ref io) => CliError::Data(format!("{error}: {io}")),
        _ => CliError::Data(error.to_string()),
    }
}

pub fn cmd_eval_acute(
    config: &Config,
    judgments_path: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let tasks_path = config.resolve(&config.acute.tasks_file);
    let tasks = read_tasks_json(open_reader(&tasks_path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", tasks_path.display())))?;

    let bank = match &config.acute.question_bank {
        None => default_question_bank(),
        Some(path) => {
            let path = config.resolve(path);
            read_question_bank_json(open_reader(&path)?)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
    };

    let judgments_path = config.resolve(judgments_path);
    let is_csv = judgments_path.extension().is_some_and(|ext| ext == "csv");
    let judgments = if is_csv {
        read_judgments_csv(open_reader(&judgments_path)?)
    } else {
        read_judgments_jsonl(open_reader(&judgments_path)?)
    }
    .map_err(|e| CliError::Data(format!("{}: {e}", judgments_path.display())))?;

    let report = evaluate_judgments(&bank, &tasks, &judgments, &config.acute.to_options())
        .map_err(map_acute_error)?;

    let dir = config.resolve(&config.acute.output_dir);
    let json_path = dir.join("acute-report.json");
    write_acute_report_json(&report, create_writer(&json_path)?).map_err(map_acute_error)?;
    let csv_path = dir.join("acute-report.csv");
    write_acute_report_csv(&report, create_writer(&csv_path)?).map_err(map_acute_error)?;

    let total = report
        .total_net_win_rate
        .map(|t| format!("{t:+.2}"))
        .unwrap_or_else(|| "n/a".into());
    writeln!(
        out,
        "kept {} of {} judgments; total net win rate {} -> {}",
        report.counts.kept,
        report.counts.kept + report.counts.filtered_duration + report.counts.filtered_justification,
        total,
        json_path.display()
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(())
}
