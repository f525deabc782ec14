//! Command-line arguments and dispatch to the library.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thermoformal::kms::{residual_sweep, telescoping_convergence_check};
use thermoformal::spectral::{
    convergence_report, eigen_measure, gibbs_measure, rpf_solve, spectral_gap_with, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use thermoformal::symbolic::{higher_block_recode, Recoded};
use thermoformal::thermo::{
    bowen_root, entropy_oracle, entropy_variational, equilibrium_check, pressure, pressure_dense_oracle,
    pressure_minmax, BOWEN_TOL,
};
use thermoformal::transfer::CylinderMeasure;
use thermoformal::{CylinderFunction, CylinderPotential, KmsInstance, MarkovMeasure, TransferOperator, Word};

use crate::config::{MeasureFile, Model, ModelConfig};
use crate::envelope::{Format, Table};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "thermoformal",
    version,
    about = "Thermodynamic formalism on subshifts of finite type"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Also write the JSON envelope to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EntropyMethod {
    Oracle,
    Variational,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Perron eigenvalue, eigenfunction, eigen-measure and spectral gap.
    Spectral {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Topological pressure `log λ`.
    Pressure {
        #[command(flatten)]
        common: Common,
        /// Compare with a dense eigen-decomposition.
        #[arg(long)]
        oracle: bool,
    },
    /// Gibbs (equilibrium) Markov chain and its cylinder weights.
    Gibbs {
        #[command(flatten)]
        common: Common,
        /// Length of the reported cylinders.
        #[arg(long, default_value_t = 2)]
        depth: usize,
    },
    /// Entropy of the Gibbs measure, or of a chain read with `--measure`.
    Entropy {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = EntropyMethod::Oracle)]
        method: EntropyMethod,
        /// Depth of the test functions for the variational method.
        #[arg(long, default_value_t = 1)]
        depth: usize,
        /// Markov chain file, e.g. a saved `gibbs` envelope.
        #[arg(long)]
        measure: Option<PathBuf>,
        #[arg(long)]
        oracle: bool,
    },
    /// Pressure as a supremum over chains of an infimum over test functions.
    Minmax {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        oracle: bool,
    },
    /// Root of `P(−β log H) = 0`.
    BowenRoot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// The eigen-measure state for `ρ = H^{−β}`.
    KmsMeasure {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        depth: usize,
    },
    /// KMS residuals of the eigen-measure state over all cylinder indicators.
    KmsCheck {
        #[command(flatten)]
        common: Common,
        /// Order of the approximately-proper condition.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Longest cylinder in the test basis.
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
    /// Decay of `L̃ⁿa − μ(a)` for the normalized operator.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 30)]
        n: usize,
        /// Depth of the test function `a(w) = Σ_t (t+1) w_t`.
        #[arg(long, default_value_t = 2)]
        depth: usize,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Spectral { common, .. }
            | Command::Pressure { common, .. }
            | Command::Gibbs { common, .. }
            | Command::Entropy { common, .. }
            | Command::Minmax { common, .. }
            | Command::BowenRoot { common, .. }
            | Command::KmsMeasure { common, .. }
            | Command::KmsCheck { common, .. }
            | Command::Convergence { common, .. } => common,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectral { .. } => "spectral",
            Command::Pressure { .. } => "pressure",
            Command::Gibbs { .. } => "gibbs",
            Command::Entropy { .. } => "entropy",
            Command::Minmax { .. } => "minmax",
            Command::BowenRoot { .. } => "bowen-root",
            Command::KmsMeasure { .. } => "kms-measure",
            Command::KmsCheck { .. } => "kms-check",
            Command::Convergence { .. } => "convergence",
        }
    }
}

/// What a command produced, before timing and digesting.
pub struct Report {
    /// Resolved inputs: canonical config, effective flags and any auxiliary files.
    pub inputs: Value,
    pub outputs: Value,
    pub diagnostics: Value,
    pub table: Option<Table>,
}

fn read(path: &PathBuf, what: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{what} {}: {e}", path.display())))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("--{name} must be a positive number, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<usize, CliError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("--{name} must be at least 1")))
    }
}

fn words_json(words: impl Iterator<Item = Word>) -> Vec<Vec<usize>> {
    words.map(|w| w.0).collect()
}

/// `0 1 2` for the word `012`; also used as the CSV word column.
fn word_label(w: &[usize]) -> String {
    w.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
}

fn matrix_json(m: &thermoformal::nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn recoded(pot: &CylinderPotential) -> Result<Recoded, CliError> {
    Ok(higher_block_recode(&pot.canonical())?)
}

/// Block labels when the potential had to be recoded.
fn blocks_json(r: &Recoded) -> Value {
    if r.original_depth > 2 {
        json!(words_json(r.blocks.iter()))
    } else {
        Value::Null
    }
}

fn insert_blocks(outputs: &mut Value, r: &Recoded) {
    let b = blocks_json(r);
    if !b.is_null() {
        outputs["blocks"] = b;
    }
}

fn weights_table(m: &CylinderMeasure) -> (Value, Table) {
    let words = words_json(m.words().iter());
    let table = Table {
        headers: vec!["word".into(), "weight".into()],
        rows: words
            .iter()
            .zip(m.weights())
            .map(|(w, x)| vec![json!(word_label(w)), json!(x)])
            .collect(),
    };
    (
        json!({ "depth": m.depth(), "words": words, "weights": m.weights() }),
        table,
    )
}

/// Cylinder weights of a block chain pulled back to words of the original alphabet.
fn original_cylinders(r: &Recoded, chain: &MarkovMeasure, depth: usize) -> Result<CylinderMeasure, CliError> {
    let spec = r.potential.spec();
    let original = r.blocks.spec();
    if r.original_depth <= 2 {
        debug_assert!(spec.alphabet_size() == original.alphabet_size());
        return Ok(chain.cylinder_measure(depth)?);
    }
    let full = depth.max(r.original_depth - 1);
    let words = original.word_set(full)?;
    let weights = words
        .iter()
        .map(|w| {
            let block = r.encode_word(w.symbols()).expect("admissible word");
            chain.cylinder_weight(block.symbols())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CylinderMeasure::new(words, weights)?.marginal(depth)?)
}

/// `H` and `β` on a two-coordinate presentation.
fn kms_instance(model: &Model) -> Result<(KmsInstance, Recoded), CliError> {
    let log_h = CylinderPotential::from_log(model.h.map(f64::ln))?;
    let r = recoded(&log_h)?;
    let h = r.potential.log_weights().map(f64::exp);
    Ok((KmsInstance::new(&h, model.beta)?, r))
}

pub fn execute(command: &Command) -> Result<Report, CliError> {
    let common = command.common();
    log::debug!("{} with model {}", command.name(), common.model.display());
    let config = ModelConfig::parse(&read(&common.model, "model")?)?;
    let config_json = serde_json::to_value(&config).expect("config serializes");
    let model = config.build()?;
    let rpf_tol = model
        .config
        .tolerances
        .as_ref()
        .and_then(|t| t.rpf)
        .unwrap_or(DEFAULT_TOL);
    let bowen_tol = model
        .config
        .tolerances
        .as_ref()
        .and_then(|t| t.bowen)
        .unwrap_or(BOWEN_TOL);

    let mut aux = json!({});
    let (flags, outputs, diagnostics, table) = match command {
        Command::Spectral { tol, .. } => {
            let tol = positive("tol", tol.unwrap_or(rpf_tol))?;
            let r = recoded(&model.potential)?;
            let op = TransferOperator::new(&r.potential)?;
            let sd = rpf_solve(&op, tol, DEFAULT_MAX_ITER)?;
            let mut outputs = json!({
                "lambda": sd.lambda,
                "phi": sd.phi.values(),
                "nu": sd.nu.weights(),
                "pressure": sd.lambda.ln(),
                "gap": spectral_gap_with(&op, &sd),
            });
            insert_blocks(&mut outputs, &r);
            let diagnostics = json!({
                "iterations": sd.iterations,
                "phi_residual": sd.phi_residual,
                "nu_residual": sd.nu_residual,
            });
            (json!({ "tol": tol }), outputs, diagnostics, None)
        }
        Command::Pressure { oracle, .. } => {
            let p = pressure(&model.potential)?;
            let mut outputs = json!({ "pressure": p });
            if *oracle {
                let o = pressure_dense_oracle(&model.potential)?;
                outputs["oracle"] = json!(o);
                outputs["difference"] = json!((p - o).abs());
            }
            (json!({ "oracle": oracle }), outputs, json!({}), None)
        }
        Command::Gibbs { depth, .. } => {
            let depth = at_least_one("depth", *depth)?;
            let r = recoded(&model.potential)?;
            let op = TransferOperator::new(&r.potential)?;
            let sd = rpf_solve(&op, rpf_tol, DEFAULT_MAX_ITER)?;
            let g = gibbs_measure(&sd, &op)?;
            let cylinders = original_cylinders(&r, &g.markov, depth)?;
            let (weights, table) = weights_table(&cylinders);
            let mut outputs = json!({
                "lambda": sd.lambda,
                "stationary": g.markov.stationary(),
                "transition": matrix_json(g.markov.transition()),
                "cylinder_weights": weights,
            });
            insert_blocks(&mut outputs, &r);
            let diagnostics = json!({ "stationarity_defect": g.markov.stationarity_defect() });
            (json!({ "depth": depth }), outputs, diagnostics, Some(table))
        }
        Command::Entropy {
            method,
            depth,
            measure,
            oracle,
            ..
        } => {
            let depth = at_least_one("depth", *depth)?;
            let r = recoded(&model.potential)?;
            let mu = match measure {
                Some(path) => {
                    let file = MeasureFile::parse(&read(path, "measure")?)?;
                    aux = json!({ "measure": file });
                    file.build(r.potential.spec())?
                }
                None => {
                    let op = TransferOperator::new(&r.potential)?;
                    gibbs_measure(&rpf_solve(&op, rpf_tol, DEFAULT_MAX_ITER)?, &op)?.markov
                }
            };
            let (value, diagnostics) = match method {
                EntropyMethod::Oracle => (entropy_oracle(&mu), json!({})),
                EntropyMethod::Variational => {
                    let res = entropy_variational(&mu, &r.potential, depth)?;
                    let d = &res.diagnostics;
                    (
                        res.value,
                        json!({
                            "iterations": d.iterations,
                            "gradient_norm": d.gradient_norm,
                            "fd_relative_error": d.fd_relative_error,
                        }),
                    )
                }
            };
            let method_name = match method {
                EntropyMethod::Oracle => "oracle",
                EntropyMethod::Variational => "variational",
            };
            let mut outputs = json!({ "method": method_name, "value": value });
            if *method == EntropyMethod::Variational {
                outputs["depth"] = json!(depth);
            }
            if *oracle {
                let h = entropy_oracle(&mu);
                outputs["oracle"] = json!(h);
                outputs["difference"] = json!((value - h).abs());
            }
            let flags = json!({ "method": method_name, "depth": depth, "oracle": oracle });
            (flags, outputs, diagnostics, None)
        }
        Command::Minmax {
            depth,
            restarts,
            seed,
            oracle,
            ..
        } => {
            let depth = at_least_one("depth", *depth)?;
            let restarts = at_least_one("restarts", *restarts)?;
            let seed = seed.or(model.config.seed).unwrap_or(0);
            let res = pressure_minmax(&model.potential, depth, restarts, seed)?;
            let chain = res.measure.as_ref().expect("min-max returns its chain");
            let mut outputs = json!({
                "value": res.value,
                "depth": depth,
                "best_restart": res.diagnostics.best_restart,
                "stationary": chain.stationary(),
                "transition": matrix_json(chain.transition()),
            });
            insert_blocks(&mut outputs, &recoded(&model.potential)?);
            if *oracle {
                let p = pressure(&model.potential)?;
                outputs["pressure"] = json!(p);
                outputs["difference"] = json!((res.value - p).abs());
            }
            let finals: Vec<Value> = res
                .diagnostics
                .outer_traces
                .iter()
                .map(|t| t.last().map_or(Value::Null, |v| json!(v)))
                .collect();
            let diagnostics = json!({
                "outer_iterations": res.diagnostics.iterations,
                "gradient_norm": res.diagnostics.gradient_norm,
                "fd_relative_error": res.diagnostics.fd_relative_error,
                "restart_values": finals,
            });
            let flags = json!({ "depth": depth, "restarts": restarts, "seed": seed, "oracle": oracle });
            (flags, outputs, diagnostics, None)
        }
        Command::BowenRoot { tol, .. } => {
            let tol = positive("tol", tol.unwrap_or(bowen_tol))?;
            let root = bowen_root(&model.h, tol)?;
            let outputs = json!({ "beta": root.beta, "pressure": root.pressure });
            (
                json!({ "tol": tol }),
                outputs,
                json!({ "iterations": root.iterations }),
                None,
            )
        }
        Command::KmsMeasure { depth, .. } => {
            let depth = at_least_one("depth", *depth)?;
            let (inst, r) = kms_instance(&model)?;
            let state = inst.eigen_state()?;
            let chain = state.gibbs_form(&inst.k)?;
            let block_measure = eigen_measure(&inst.spectral, &inst.operator, depth.max(1))?;
            let cylinders = if r.original_depth > 2 {
                original_eigen_cylinders(&r, &state, depth)?
            } else {
                block_measure
            };
            let (weights, table) = weights_table(&cylinders);
            let mut outputs = json!({
                "beta": inst.beta,
                "lambda": inst.lambda(),
                "k": inst.k.values(),
                "marginal": state.marginal(),
                "cylinder_weights": weights,
                "gibbs_stationary": chain.stationary(),
            });
            insert_blocks(&mut outputs, &r);
            let diagnostics = json!({ "normalization_defect": inst.normalized.normalization_defect() });
            (json!({ "depth": depth }), outputs, diagnostics, Some(table))
        }
        Command::KmsCheck { n, depth, .. } => {
            let n = at_least_one("n", *n)?;
            let depth = at_least_one("depth", *depth)?;
            let (inst, r) = kms_instance(&model)?;
            let state = inst.eigen_state()?;
            let sweep = residual_sweep(&inst, &state, depth, n)?;
            let eq = equilibrium_check(&state.gibbs_form(&inst.k)?, &inst.rho)?;
            let mut outputs = json!({
                "beta": inst.beta,
                "lambda": inst.lambda(),
                "crossed_product_residual": sweep.crossed,
                "crossed_product_worst": sweep.crossed_word.0,
                "approx_proper_residual": sweep.approx,
                "approx_proper_worst": sweep.approx_word.0,
                "max_residual": sweep.crossed.max(sweep.approx),
                "equilibrium_gap": eq.gap,
            });
            insert_blocks(&mut outputs, &r);
            let diagnostics = json!({
                "basis_size": sweep.basis_size,
                "form_disagreement": sweep.form_disagreement,
            });
            (json!({ "n": n, "depth": depth }), outputs, diagnostics, None)
        }
        Command::Convergence { n, depth, .. } => {
            let n = at_least_one("n", *n)?;
            let depth = at_least_one("depth", *depth)?;
            let (inst, r) = kms_instance(&model)?;
            let a = CylinderFunction::from_fn(inst.spec(), depth, |w| {
                w.iter().enumerate().map(|(t, &s)| ((t + 1) * s) as f64).sum()
            })?;
            let report = convergence_report(&inst.normalized, &a, n)?;
            let tel = telescoping_convergence_check(&inst, &inst.eigen_state()?, &a, n)?;
            let rows = (0..=n)
                .map(|i| {
                    let bound = if i >= 1 { json!(tel.bounds[i - 1]) } else { Value::Null };
                    vec![json!(i), json!(report.errors[i]), bound]
                })
                .collect();
            let table = Table {
                headers: vec!["n".into(), "error".into(), "telescoping_bound".into()],
                rows,
            };
            let mut outputs = json!({
                "gap": report.gap,
                "mean": report.mean,
                "errors": report.errors,
                "empirical_rate": report.empirical_rate,
                "constant": report.constant,
                "bound_holds": report.bound_holds,
                "telescoping": {
                    "fixed_point_residual": tel.fixed_point_residual,
                    "bounds": tel.bounds,
                    "bound_holds": tel.bound_holds,
                    "final_bound": tel.final_bound,
                    "converged": tel.converged,
                },
            });
            insert_blocks(&mut outputs, &r);
            (json!({ "n": n, "depth": depth }), outputs, json!({}), Some(table))
        }
    };
    let mut inputs = json!({ "config": config_json, "flags": flags });
    if let Value::Object(extra) = aux {
        for (k, v) in extra {
            inputs[k] = v;
        }
    }
    Ok(Report {
        inputs,
        outputs,
        diagnostics,
        table,
    })
}

/// Eigen-state weights on original words when `H` was recoded.
fn original_eigen_cylinders(
    r: &Recoded,
    state: &thermoformal::KmsState,
    depth: usize,
) -> Result<CylinderMeasure, CliError> {
    let original = r.blocks.spec();
    let full = depth.max(r.original_depth - 1);
    let words = original.word_set(full)?;
    let weights = words
        .iter()
        .map(|w| {
            let block = r.encode_word(w.symbols()).expect("admissible word");
            state.weight(block.symbols())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CylinderMeasure::new(words, weights)?.marginal(depth)?)
}
