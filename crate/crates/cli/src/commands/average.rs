use lsc_core::dataio::{load_report, Report};
use lsc_core::metrics::{weighted_average, EvalResult, Metric};
use serde_json::Value;

use crate::args::AverageArgs;
use crate::common::path_value;
use crate::error::CliError;

pub fn run(args: &AverageArgs) -> Result<Report, CliError> {
    let mut report = Report::new("average");
    let mut weighted = Vec::new();
    for path in &args.reports {
        let source = load_report(path)?;
        let found = source
            .evaluations
            .iter()
            .find(|e| e.task == args.task && e.metric == Metric::Spearman);
        match found {
            Some(e) if e.n > 0 => weighted.push((e.value, e.n as f64)),
            _ => report
                .warnings
                .push(format!("{}: no {} Spearman evaluation", path.display(), args.task)),
        }
    }
    if weighted.is_empty() {
        return Err(CliError::Data(format!(
            "no report has a {} Spearman evaluation",
            args.task
        )));
    }
    let total = weighted.iter().map(|(_, w)| *w as usize).sum();
    report.evaluations.push(EvalResult::new(
        args.task.clone(),
        Metric::AvgW,
        weighted_average(&weighted)?,
        total,
    ));
    report.config.insert(
        "reports".into(),
        Value::Array(args.reports.iter().map(|p| path_value(p)).collect()),
    );
    report.config.insert("task".into(), args.task.clone().into());
    Ok(report)
}
