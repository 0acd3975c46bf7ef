use std::sync::Arc;

use dpforest::dp::neighbor_ratio_audit;
use dpforest::eval::{collect_diagnostics, cross_validate};
use dpforest::rng::{self, StreamDomain};
use dpforest::synth::{self, SynthPreset};
use dpforest::{
    load_dataset, load_schema, optimal_depth_for, save_dataset, train, Dataset, Epsilon,
    ForestModel, LabelCounts, RecordSource, TrainConfig,
};

use crate::args::{
    AuditArgs, Command, DepthArgs, EvalArgs, ForestArgs, GenArgs, PredictArgs, TrainArgs,
};
use crate::{write_file, Failure, Outcome};

pub fn dispatch(command: &Command) -> Result<Outcome, Failure> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Depth(a) => depth(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Audit(a) => audit(a),
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure {
        class: dpforest::ErrorClass::Internal,
        message: e.to_string(),
    })
}

fn gen(a: &GenArgs) -> Result<Outcome, Failure> {
    let preset = match (&a.preset, a.informative, a.random) {
        (Some(name), _, _) => SynthPreset::by_name(name)
            .ok_or_else(|| Failure::usage(format!("unknown preset `{name}` (SynthA to SynthG)")))?,
        (None, Some(i), Some(r)) => SynthPreset::new("custom", i, r),
        _ => {
            return Err(Failure::usage(
                "give --preset or both --informative and --random",
            ))
        }
    };
    let seed = resolve_seed(a.seed);
    let data = synth::generate(
        preset,
        a.n,
        &mut rng::substream(seed, StreamDomain::Synthetic, 0),
    )?;
    save_dataset(&data, &a.out)?;
    write_file(&a.schema_out, &data.schema().to_json())?;
    println!(
        "wrote {} records with {} features to {}",
        data.len(),
        preset.num_features(),
        a.out.display()
    );
    Ok(Outcome {
        seed: Some(seed),
        artifacts: vec![a.out.clone(), a.schema_out.clone()],
    })
}

fn depth(a: &DepthArgs) -> Result<Outcome, Failure> {
    let schema = load_schema(&a.schema)?;
    println!("{}", optimal_depth_for(&schema)?.depth);
    Ok(Outcome::default())
}

/// Load the data and build a training configuration from shared flags.
fn prepare(f: &ForestArgs) -> Result<(Dataset, TrainConfig), Failure> {
    let epsilon = Epsilon::new(f.epsilon)?;
    let schema = Arc::new(load_schema(&f.schema)?);
    let data = load_dataset(&f.data, schema)?;
    let mut config = TrainConfig::new(epsilon)
        .with_trees(f.trees)
        .with_sensitivity(f.sensitivity.into())
        .with_budget_mode(f.budget.into())
        .with_seed(resolve_seed(f.seed));
    if let Some(d) = f.depth {
        config = config.with_depth(d);
    }
    Ok((data, config))
}

fn train_cmd(a: &TrainArgs) -> Result<Outcome, Failure> {
    let (data, config) = prepare(&a.forest)?;
    let config = config.with_diagnostics(a.diagnostics.is_some());
    let out = train(&data, &config)?;
    out.model.save(&a.out)?;
    let mut artifacts = vec![a.out.clone()];
    if let Some(path) = &a.diagnostics {
        let report = collect_diagnostics([out.diagnostics.as_ref()])?;
        write_file(path, &to_json(&report)?)?;
        artifacts.push(path.clone());
    }
    println!(
        "trained {} trees of depth {} on {} records; privacy cost {}",
        out.model.trees().len(),
        out.model.config().depth,
        data.len(),
        out.ledger.composed_cost()
    );
    Ok(Outcome {
        seed: Some(config.seed),
        artifacts,
    })
}

fn predict(a: &PredictArgs) -> Result<Outcome, Failure> {
    let model = ForestModel::load(&a.model)?;
    let table = dpforest::data::load_unlabeled(&a.data, model.schema())?;
    let mut w = csv::Writer::from_path(&a.out)
        .map_err(|e| Failure::validation(format!("{}: {e}", a.out.display())))?;
    let csv_err = |e: csv::Error| Failure::validation(format!("{}: {e}", a.out.display()));
    let mut header = table.headers.clone();
    header.push("prediction".into());
    w.write_record(&header).map_err(csv_err)?;
    for (row, values) in table.rows.iter().zip(&table.values) {
        let label = model.schema().label_name(model.predict(values));
        w.write_record(row.iter().map(String::as_str).chain([label]))
            .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Failure::validation(format!("{}: {e}", a.out.display())))?;
    println!(
        "wrote {} predictions to {}",
        table.rows.len(),
        a.out.display()
    );
    Ok(Outcome {
        seed: None,
        artifacts: vec![a.out.clone()],
    })
}

fn eval(a: &EvalArgs) -> Result<Outcome, Failure> {
    let (data, config) = prepare(&a.forest)?;
    let report = cross_validate(&data, &config, a.folds, a.repeats)?;
    let json = to_json(&report)?;
    let artifacts = match &a.report {
        Some(path) => {
            write_file(path, &json)?;
            let acc = &report.metrics.accuracy;
            println!(
                "accuracy {:.4} ± {:.4} over {} folds",
                acc.mean,
                acc.std,
                acc.samples.len()
            );
            vec![path.clone()]
        }
        None => {
            println!("{json}");
            Vec::new()
        }
    };
    Ok(Outcome {
        seed: Some(config.seed),
        artifacts,
    })
}

/// Parse "A:3,B:2" into label names and counts.
fn parse_counts(text: &str) -> Result<(Vec<String>, Vec<u64>), Failure> {
    let mut labels = Vec::new();
    let mut counts = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (label, count) = item
            .rsplit_once(':')
            .ok_or_else(|| Failure::usage(format!("expected LABEL:COUNT, got `{item}`")))?;
        let label = label.trim();
        if labels.iter().any(|l| l == label) {
            return Err(Failure::usage(format!("label `{label}` given twice")));
        }
        let count = count
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("bad count in `{item}`")))?;
        labels.push(label.to_string());
        counts.push(count);
    }
    Ok((labels, counts))
}

fn audit(a: &AuditArgs) -> Result<Outcome, Failure> {
    let (labels, counts) = parse_counts(&a.counts)?;
    let epsilon = Epsilon::new(a.epsilon)?;
    let result = neighbor_ratio_audit(&LabelCounts::new(counts), epsilon, a.sensitivity.into())?;
    let report = result.report(&labels);
    let json = to_json(&report)?;
    let artifacts = match &a.report {
        Some(path) => {
            write_file(path, &json)?;
            println!(
                "max log ratio {:.6} for epsilon {} ({})",
                report.max_log_ratio,
                report.epsilon,
                if report.within_epsilon {
                    "within"
                } else {
                    "exceeds"
                }
            );
            vec![path.clone()]
        }
        None => {
            println!("{json}");
            Vec::new()
        }
    };
    Ok(Outcome {
        seed: None,
        artifacts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_parse() {
        let (l, c) = parse_counts("A:3, B:2").unwrap();
        assert_eq!(l, ["A", "B"]);
        assert_eq!(c, [3, 2]);
        assert!(parse_counts("A3").is_err());
        assert!(parse_counts("A:x").is_err());
        assert!(parse_counts("A:1,A:2").is_err());
    }
}
