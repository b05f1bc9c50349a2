use std::path::PathBuf;
use std::time::Instant;

use emfield_core::ladder::{field_vev, vacuum_expectation, word_scale, FieldSymbol, OperatorWord};
use emfield_core::sampler::{covariance_matrix, draw_samples, moment_report, CovarianceMatrix};
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{write_output, CheckBuilder, Environment, VerificationReport, Versions};
use crate::suites::{self, SuiteEnv};
use crate::Common;

pub struct Invocation<'a> {
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub suites: Vec<String>,
    pub seed: u64,
    pub deterministic: bool,
    pub jobs: Option<usize>,
    pub json: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl<'a> Invocation<'a> {
    pub fn new(command: &'static str, config: &'a RunConfig, common: &Common) -> Self {
        Invocation {
            command,
            config,
            suites: common.suite.clone(),
            seed: common.seed.or(config.seed).unwrap_or(0),
            deterministic: common.deterministic || config.deterministic,
            jobs: common.jobs,
            json: common.json.clone(),
            out: common.out.clone(),
        }
    }

    fn report(&self) -> VerificationReport {
        VerificationReport::new(
            self.command,
            Environment {
                grid: self.config.grid,
                seed: self.seed,
                constants: self.config.constants,
                deterministic: self.deterministic,
                jobs: self.jobs,
                versions: Versions {
                    emfield_core: emfield_core_version(),
                    emfield_cli: env!("CARGO_PKG_VERSION"),
                },
            },
        )
    }

    fn env(&self) -> Result<SuiteEnv<'a>, CliError> {
        Ok(SuiteEnv {
            config: self.config,
            seed: self.seed,
            grid: self.config.grid()?,
        })
    }

    fn reject_suite_flag(&self) -> Result<(), CliError> {
        if self.suites.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!("--suite is only accepted by `verify`, not `{}`", self.command)))
        }
    }
}

fn emfield_core_version() -> &'static str {
    // both crates share the workspace version
    env!("CARGO_PKG_VERSION")
}

fn finish(inv: &Invocation, report: &VerificationReport) -> Result<i32, CliError> {
    report.emit(inv.json.as_deref())?;
    eprintln!("{}", report.summary());
    Ok(report.exit_code())
}

pub fn verify(inv: &Invocation) -> Result<i32, CliError> {
    let names = inv.config.resolve_suites(&inv.suites)?;
    let env = inv.env()?;
    let mut report = inv.report();
    let mut results = Map::new();
    for name in names {
        let start = Instant::now();
        let out = suites::run(name, &env)?;
        report.record_timing(name, start.elapsed().as_secs_f64());
        report.extend(out.checks);
        if !out.results.is_null() {
            results.insert(name.to_string(), out.results);
        }
    }
    if !results.is_empty() {
        report.results = Value::Object(results);
    }
    finish(inv, &report)
}

pub fn single_suite(inv: &Invocation, name: &str) -> Result<i32, CliError> {
    inv.reject_suite_flag()?;
    let env = inv.env()?;
    let mut report = inv.report();
    let start = Instant::now();
    let out = suites::run(name, &env)?;
    report.record_timing(name, start.elapsed().as_secs_f64());
    report.extend(out.checks);
    report.results = out.results;
    finish(inv, &report)
}

fn complex(z: num_complex::Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn expect(inv: &Invocation) -> Result<i32, CliError> {
    inv.reject_suite_flag()?;
    let config = inv.config;
    if config.words.is_empty() && config.fields.is_empty() {
        return Err(CliError::Config("`expect` needs `words` or `fields` in the configuration".into()));
    }
    let grid = config.grid()?;
    let mut ctx = config.context(&grid)?;
    let b = CheckBuilder::new("expect");
    let mut report = inv.report();

    let mut word_results = Vec::new();
    let mut hermiticity = 0.0f64;
    for entries in &config.words {
        let word = OperatorWord::parse(entries, &ctx)?;
        let value = vacuum_expectation(&word, &ctx)?;
        let adjoint = vacuum_expectation(&word.adjoint(), &ctx)?;
        let scale = word_scale(&word, &ctx);
        if scale > 0.0 {
            hermiticity = hermiticity.max((adjoint - value.conj()).norm() / scale);
        }
        word_results.push(json!({
            "word": entries,
            "display": word.display(&ctx).to_string(),
            "value": complex(value),
            "scale": scale,
        }));
    }

    let mut field_results = Vec::new();
    for decls in &config.fields {
        let symbols = decls
            .iter()
            .map(|d| Ok(FieldSymbol::new(d.kind, ctx.lookup(&d.label)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        ctx.prepare_fields(&symbols)?;
        let value = field_vev(&symbols, &ctx)?;
        field_results.push(json!({ "fields": decls, "value": complex(value) }));
    }

    report.extend(vec![b.at_most(
        "state_hermiticity",
        hermiticity,
        inv.config.tolerances.commutator,
        1.0,
        json!({"words": config.words.len()}),
    )]);
    report.results = json!({ "words": word_results, "fields": field_results });
    finish(inv, &report)
}

fn covariance_csv(cov: &CovarianceMatrix) -> Vec<u8> {
    let mut s = String::from("label");
    for n in &cov.names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (i, n) in cov.names.iter().enumerate() {
        s.push_str(n);
        for j in 0..cov.dim() {
            s.push_str(&format!(",{:.16e}", cov.matrix[(i, j)]));
        }
        s.push('\n');
    }
    s.into_bytes()
}

fn build_covariance(inv: &Invocation) -> Result<(CovarianceMatrix, emfield_core::pairing::GramContext, Vec<emfield_core::pairing::LabelId>), CliError> {
    let grid = inv.config.grid()?;
    let mut ctx = inv.config.context(&grid)?;
    let labels = inv.config.sample_labels(&mut ctx, inv.seed)?;
    let cov = covariance_matrix(&mut ctx, &labels)?;
    Ok((cov, ctx, labels))
}

pub fn covariance(inv: &Invocation) -> Result<i32, CliError> {
    inv.reject_suite_flag()?;
    let (cov, _, _) = build_covariance(inv)?;
    write_output(inv.out.as_deref(), &covariance_csv(&cov))?;
    let env = inv.env()?;
    let mut report = inv.report();
    report.extend(suites::covariance_checks(&CheckBuilder::new("covariance"), &cov, &env));
    if let Some(path) = &inv.json {
        report.emit(Some(path))?;
    }
    eprintln!("{}", report.summary());
    Ok(report.exit_code())
}

pub fn sample(inv: &Invocation) -> Result<i32, CliError> {
    inv.reject_suite_flag()?;
    let (cov, ctx, labels) = build_covariance(inv)?;
    let rows = inv.config.samples.unwrap_or(crate::config::DEFAULT_SAMPLES);
    let batch = draw_samples(&cov, rows, inv.seed)?;
    let mut csv = Vec::new();
    batch.write_csv(&mut csv)?;
    write_output(inv.out.as_deref(), &csv)?;

    let env = inv.env()?;
    let mut report = inv.report();
    report.extend(suites::covariance_checks(&CheckBuilder::new("sample"), &cov, &env));
    if let Some(path) = &inv.json {
        let moments = moment_report(&batch, &cov, Some((&ctx, &labels)))?;
        report.results = json!({
            "rows": rows,
            "rng": batch.rng,
            "labels": cov.names,
            "moments": moments,
        });
        report.emit(Some(path))?;
    }
    eprintln!("{}", report.summary());
    Ok(report.exit_code())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn covariance_csv_layout() {
        let cov = CovarianceMatrix::from_matrix(
            vec!["a".into(), "b".into()],
            DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 2.0]),
        )
        .unwrap();
        let text = String::from_utf8(covariance_csv(&cov)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "label,a,b");
        assert_eq!(lines[1], "a,1.0000000000000000e0,1.0000000000000001e-1");
        assert_eq!(lines.len(), 3);
    }
}
