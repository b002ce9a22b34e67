use std::path::Path;

use idshield::eval::{self, AttackSummary, EvalReport, SweepOptions};
use idshield::remap::{self, PcaRemapper, ReferenceSet};
use idshield::{mechanisms, synthdata, MechanismSpec, RandomStream, UnitVector};
use rayon::prelude::*;

use crate::config::{Command, RunConfig};
use crate::dpcheck::{self, DpCheckReport};
use crate::error::{CliError, CliResult};
use crate::formats::{self, EmbeddingRecord, Sidecar};
use crate::report::{self, Document, VERSION};

/// Executes `config`, writing its artifacts, and returns the text to print.
pub fn run(config: &RunConfig) -> CliResult<String> {
    if let Some(out) = &config.output {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            if !dir.is_dir() {
                return Err(CliError::usage(format!("output directory {} does not exist", dir.display())));
            }
        }
    }
    if let Some(input) = &config.input {
        if !input.is_file() {
            return Err(CliError::usage(format!("input {} does not exist", input.display())));
        }
    }
    match config.command {
        Command::Gen => gen(config),
        Command::Privatize => privatize(config),
        Command::FitRemap => fit_remap(config),
        Command::Eval => {
            let spec = config.mechanism()?;
            warn_reversal(&spec);
            evaluate(config, &[spec])
        }
        Command::Sweep => evaluate(config, &config.sweep_mechanisms()?),
        Command::Attack => attack(config),
        Command::CheckDp => check_dp(config),
    }
}

fn warn_reversal(spec: &MechanismSpec) {
    if let Some(w) = mechanisms::reversal_warning(spec) {
        eprintln!("warning: {w}");
    }
}

fn sidecar(config: &RunConfig) -> Sidecar {
    Sidecar {
        version: VERSION.to_string(),
        seed: config.seed(),
        config: config.clone(),
        identity_means: Default::default(),
        attribute_directions: Default::default(),
    }
}

fn gen(config: &RunConfig) -> CliResult<String> {
    let out = config.output()?;
    let identities = RunConfig::require(config.identities, "identities")?;
    let samples = RunConfig::require(config.samples, "samples")?;
    let dim = RunConfig::require(config.dim, "dim")?;
    let kappa = RunConfig::require(config.within_kappa, "within-kappa")?;
    let db = synthdata::generate(
        identities,
        samples,
        dim,
        kappa,
        &config.attributes,
        &mut RandomStream::new(config.seed()),
    )?;
    formats::write_embeddings(out, config.output_format()?, &formats::database_records(&db))?;
    let meta = Sidecar {
        identity_means: db.identity_means.iter().map(|(&id, m)| (id, m.as_slice().to_vec())).collect(),
        attribute_directions: db
            .attribute_directions
            .iter()
            .map(|(n, d)| (n.clone(), d.as_slice().to_vec()))
            .collect(),
        ..sidecar(config)
    };
    formats::write_json_compact(&formats::sidecar_path(out), &meta)?;
    Ok(format!("wrote {} records ({identities} identities, dim {dim}) to {}\n", db.len(), out.display()))
}

fn privatize(config: &RunConfig) -> CliResult<String> {
    let input = config.input()?;
    let out = config.output()?;
    let spec = config.mechanism()?;
    warn_reversal(&spec);
    let records = formats::read_embeddings(input, config.input_format()?)?;
    let seed = config.seed();

    let vectors: Vec<Vec<f64>> = match &config.remapper {
        Some(path) => {
            let doc: Document<PcaRemapper> = formats::read_json(path)?;
            let remapper = doc.result;
            remapper.validate().map_err(|e| CliError::data(path, e.to_string()))?;
            if remapper.source_dim() != records[0].vec.len() {
                return Err(CliError::data(
                    input,
                    format!(
                        "dimension {} does not match remapper source dimension {}",
                        records[0].vec.len(),
                        remapper.source_dim()
                    ),
                ));
            }
            records
                .par_iter()
                .enumerate()
                .map(|(i, r)| {
                    remap::privatize_remapped(&remapper, &r.vec, &spec, &mut RandomStream::derive(seed, &[i as u64]))
                })
                .collect::<idshield::Result<_>>()?
        }
        None => {
            let inputs = records
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    UnitVector::new(r.vec.clone()).map_err(|e| CliError::data(input, format!("record {}: {e}", i + 1)))
                })
                .collect::<CliResult<Vec<_>>>()?;
            mechanisms::privatize_batch(&spec, &inputs, seed)?
                .into_iter()
                .map(|p| p.vector)
                .collect()
        }
    };

    let released: Vec<EmbeddingRecord> = records
        .into_iter()
        .zip(vectors)
        .map(|(r, vec)| EmbeddingRecord { vec, ..r })
        .collect();
    formats::write_embeddings(out, config.output_format()?, &released)?;
    formats::write_json_compact(&formats::sidecar_path(out), &sidecar(config))?;
    Ok(format!("privatized {} records with {spec} to {}\n", released.len(), out.display()))
}

fn fit_remap(config: &RunConfig) -> CliResult<String> {
    let input = config.input()?;
    let out = config.output()?;
    let target_dim = RunConfig::require(config.target_dim, "target-dim")?;
    let records = formats::read_embeddings(input, config.input_format()?)?;
    let refs = ReferenceSet::new(records.into_iter().map(|r| (r.id, r.vec)).collect())?;
    let remapper = remap::fit(&refs, target_dim, config.j, config.lambda)?;
    let explained: f64 = remapper.explained_variance().iter().sum();
    let summary = format!(
        "fitted {} -> {} remapper on {} references (retained variance {:.4}) to {}\n",
        remapper.source_dim(),
        target_dim,
        refs.len(),
        explained,
        out.display()
    );
    formats::write_json(out, &Document::new(config, remapper))?;
    Ok(summary)
}

fn sweep_options(config: &RunConfig) -> SweepOptions {
    SweepOptions {
        queries_per_identity: config.queries_per_identity,
        draws_per_query: config.draws_per_query,
    }
}

fn write_with_table<T: serde::Serialize>(config: &RunConfig, result: T, table: &str) -> CliResult<()> {
    if let Some(out) = &config.output {
        formats::write_json(out, &Document::new(config, result))?;
        let mut txt = out.as_os_str().to_owned();
        txt.push(".txt");
        let table = table.to_string();
        formats::write_atomic(Path::new(&txt), |w| w.write_all(table.as_bytes()))?;
    }
    Ok(())
}

fn evaluate(config: &RunConfig, specs: &[MechanismSpec]) -> CliResult<String> {
    let input = config.input()?;
    let db = formats::load_database(input, config.input_format()?)?;
    let reports: Vec<EvalReport> =
        eval::privacy_utility_sweep(&db, specs, &config.k, sweep_options(config), config.seed())?;
    let table = report::eval_table(&reports);
    write_with_table(config, reports, &table)?;
    Ok(table)
}

fn attack(config: &RunConfig) -> CliResult<String> {
    let input = config.input()?;
    let spec = config.mechanism()?;
    warn_reversal(&spec);
    let db = formats::load_database(input, config.input_format()?)?;
    let series: Vec<AttackSummary> =
        eval::attack_series(&db, &spec, &config.m_grid, config.repetitions, config.seed())?;
    let table = format!("averaging attack, {spec}\n{}", report::attack_table(&series));
    write_with_table(config, series, &table)?;
    Ok(table)
}

fn check_dp(config: &RunConfig) -> CliResult<String> {
    let dim = RunConfig::require(config.dim, "dim")?;
    let epsilon = RunConfig::require(config.epsilon, "epsilon")?;
    let result: DpCheckReport = dpcheck::check_dp(dim, epsilon, config.trials, config.seed())?;
    let table = report::dp_table(&result);
    write_with_table(config, result, &table)?;
    Ok(table)
}
