//! Command-line harness: function-spec ingestion, experiment
//! orchestration, run-record persistence and plot-data emission.
//!
//! Every subcommand honors `--seed`; two runs with identical arguments
//! produce identical output files (timestamps live only in the run
//! record written next to each output). `JUNTALAB_THREADS` caps the
//! estimator worker count (default 1).

mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use io::{AnyError, RunRecord};
use juntalab::boolfour;
use juntalab::corpus;
use juntalab::estim::{ProductDist, RngStream, SampleSet, SampleSource};
use juntalab::junta::{self, CriterionCfg, Schedule};
use juntalab::learn::{self, FunctionOracle, Model};
use juntalab::setfn::Point;
use juntalab::verify::{self, LowerBound, QueryTestConfig, TestVerdict};

#[derive(Parser)]
#[command(name = "juntalab", version, about = "Junta approximation, learning and testing for submodular/XOS set functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// RNG seed; identical seeds replay bit-identically.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum JuntaMode {
    Additive,
    Multiplicative,
    Product,
    Pseudo,
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnAlg {
    Pac,
    Pmac,
    Xos,
    Agnostic,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestMode {
    Examples,
    Queries,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Inequalities,
    Boosting,
    Concentration,
    Lowerbounds,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Linear,
    Xos,
    L2,
    Product,
}

#[derive(Subcommand)]
enum Command {
    /// Exact Fourier report for a function spec (n <= 24).
    Analyze {
        #[arg(long = "fn")]
        func: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a junta-selection driver and write the model JSON.
    Junta {
        #[arg(long = "fn")]
        func: PathBuf,
        #[arg(long, value_enum)]
        mode: JuntaMode,
        #[arg(long, default_value_t = 0.4)]
        eps: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Grid parameter for pseudo-Boolean inputs.
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Common marginal for the product-distribution mode.
        #[arg(long, default_value_t = 0.5)]
        marginal: f64,
        /// Monte-Carlo criterion samples beyond the exact cap.
        #[arg(long, default_value_t = 800)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run a learner against a function spec (or a sample CSV for the
    /// agnostic mode) and write the model JSON.
    Learn {
        #[arg(long = "fn")]
        func: PathBuf,
        #[arg(long, value_enum)]
        alg: LearnAlg,
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Junta-size parameter for detection.
        #[arg(long, default_value_t = 4)]
        s: usize,
        /// Subset size for the proper learner.
        #[arg(long)]
        t: Option<usize>,
        /// Sample budget override (detection and fitting).
        #[arg(long)]
        samples: Option<usize>,
        /// Node budget for the PMAC tree.
        #[arg(long, default_value_t = 4096)]
        budget: usize,
        /// Sample CSV for the agnostic mode (labels may be noisy).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Spectral l1 ball for the agnostic mode.
        #[arg(long, default_value_t = 4.0)]
        w: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run a verification suite over the built-in corpus and write the
    /// CSV report.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value = "builtin")]
        corpus: String,
        #[command(flatten)]
        common: Common,
    },
    /// Test a function spec for submodularity.
    Test {
        #[arg(long = "fn")]
        func: PathBuf,
        #[arg(long, value_enum)]
        mode: TestMode,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run one lower-bound experiment and write the CSV report.
    Lowerbound {
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long, default_value_t = 4)]
        a: usize,
        #[arg(long, default_value_t = 2)]
        junta: usize,
        #[arg(long, default_value_t = 4)]
        s: usize,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Draw (or exhaustively enumerate) labeled samples to CSV.
    Sample {
        #[arg(long = "fn")]
        func: PathBuf,
        #[arg(long, default_value_t = 1024)]
        samples: usize,
        #[arg(long, default_value_t = false)]
        exhaustive: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a saved model at a point.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Assignment as a bitmask.
        #[arg(long)]
        point: u64,
        #[arg(long)]
        n: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn out_or(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn record(
    command: &str,
    config: serde_json::Value,
    outputs: &[&Path],
    metrics: serde_json::Value,
    started: u128,
) -> Result<(), AnyError> {
    let rec = RunRecord {
        command: command.to_string(),
        config,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        metrics,
        started_at_ms: started,
        finished_at_ms: io::now_ms(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    if let Some(primary) = outputs.first() {
        io::write_run_record(primary, &rec)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), AnyError> {
    match cli.command {
        Command::Analyze { func, common } => {
            let started = io::now_ms();
            let (_, f) = io::load_function(&func)?;
            let spectrum = boolfour::transform(&f)?;
            let infl1 = boolfour::influences(&f, 1.0)?;
            let infl2 = boolfour::influences(&f, 2.0)?;
            let report = json!({
                "n": f.n(),
                "mean": spectrum.coeff(0),
                "variance": boolfour::variance(&f)?,
                "spectral_l1": spectrum.spectral_l1(),
                "degree": spectrum.degree(),
                "influence_l1": infl1,
                "influence_l2": infl2,
                "spectrum": spectrum,
            });
            let out = out_or(&common, "analyze.json");
            io::save_json(&out, &report)?;
            println!("analyze: n = {}, degree = {}, wrote {}", f.n(), report["degree"], out.display());
            record(
                "analyze",
                json!({"fn": func.display().to_string(), "seed": common.seed}),
                &[&out],
                json!({"degree": report["degree"], "variance": report["variance"]}),
                started,
            )
        }
        Command::Junta { func, mode, eps, gamma, k, marginal, samples, common } => {
            let started = io::now_ms();
            let (_, f) = io::load_function(&func)?;
            let mut rng = RngStream::new(common.seed).rng();
            let cfg = CriterionCfg { samples, ..Default::default() };
            let out = out_or(&common, "model.json");
            let (mode_name, metrics) = match mode {
                JuntaMode::Additive => {
                    let model = junta::approximate_junta(&f, eps, &Schedule::default(), &cfg, &mut rng)?;
                    let metrics = json!({
                        "vars": model.vars,
                        "error_l2": model.provenance.measured_error_l2,
                    });
                    io::save_json(&out, &model)?;
                    println!(
                        "junta additive: |J| = {}, measured l2 error = {:?}",
                        model.vars.len(),
                        model.provenance.measured_error_l2
                    );
                    ("additive", metrics)
                }
                JuntaMode::Multiplicative => {
                    let model = junta::multiplicative_junta(&f, gamma, eps, &cfg, &mut rng)?;
                    let metrics = json!({
                        "vars": model.vars,
                        "success_prob": model.provenance.measured_success_prob,
                    });
                    io::save_json(&out, &model)?;
                    println!(
                        "junta multiplicative: |J| = {}, measured success = {:?}",
                        model.vars.len(),
                        model.provenance.measured_success_prob
                    );
                    ("multiplicative", metrics)
                }
                JuntaMode::Product => {
                    let dist = ProductDist::new(vec![marginal; f.n()])?;
                    let alpha = eps * eps / 16.0;
                    let eta = 1.0 / (16.0 * f.n() as f64 / (eps * eps)).max(2.0).log2();
                    let trace = junta::select_product(&f, &dist, alpha, eta, &cfg, &mut rng)?;
                    let metrics = json!({
                        "vars": trace.selected_vars(),
                        "cap": 2.0 * trace.phase_cap,
                    });
                    io::save_json(&out, &trace)?;
                    println!("junta product: J = {:?}", trace.selected_vars());
                    ("product", metrics)
                }
                JuntaMode::Pseudo => {
                    let model = junta::pseudo_boolean_junta(&f, k, eps, &cfg, &mut rng)?;
                    let metrics = json!({
                        "vars": model.vars,
                        "disagreement": model.provenance.measured_disagreement,
                    });
                    io::save_json(&out, &model)?;
                    println!(
                        "junta pseudo: |J| = {}, disagreement = {:?}",
                        model.vars.len(),
                        model.provenance.measured_disagreement
                    );
                    ("pseudo", metrics)
                }
            };
            record(
                "junta",
                json!({
                    "fn": func.display().to_string(), "mode": mode_name, "eps": eps,
                    "gamma": gamma, "k": k, "marginal": marginal, "samples": samples,
                    "seed": common.seed,
                }),
                &[&out],
                metrics,
                started,
            )
        }
        Command::Learn { func, alg, eps, gamma, s, t, samples, budget, data, w, common } => {
            let started = io::now_ms();
            let (_, f) = io::load_function(&func)?;
            let mut rng = RngStream::new(common.seed).rng();
            let out = out_or(&common, "model.json");
            let pac_cfg = learn::PacConfig {
                s: Some(s),
                t,
                t_cap: 4,
                detect_samples: samples.or(Some(60_000)),
                lp_samples: samples.or(Some(16_000)),
                subset_cap: 100_000,
            };
            let (alg_name, model, metrics) = match alg {
                LearnAlg::Pac => {
                    let mut oracle = FunctionOracle::uniform(&f);
                    let outcome = learn::pac_proper(&mut oracle, eps, &pac_cfg, &mut rng)?;
                    let metrics = json!({
                        "accepted": outcome.accepted,
                        "vars": outcome.vars,
                        "empirical_error": outcome.empirical_error,
                    });
                    ("pac", Model::Junta(outcome.model), metrics)
                }
                LearnAlg::Pmac => {
                    let cfg = learn::PmacConfig { budget, inner: pac_cfg, ..Default::default() };
                    let mut oracle = FunctionOracle::uniform(&f);
                    let tree = learn::pmac(&mut oracle, gamma, eps, &cfg, &mut rng)?;
                    let metrics = json!({
                        "nodes": tree.node_count,
                        "depth": tree.depth(),
                        "budget_hit": tree.budget_hit,
                        "success_prob": if f.n() <= 16 { Some(learn::pmac_success(&f, &tree, gamma)?) } else { None },
                    });
                    ("pmac", Model::Pmac(tree), metrics)
                }
                LearnAlg::Xos => {
                    let cfg = learn::LowInflConfig {
                        reg_samples: samples,
                        ..Default::default()
                    };
                    let mut oracle = FunctionOracle::uniform(&f);
                    let poly = learn::low_influence_regression(&mut oracle, 1.0, eps, &cfg, &mut rng)?;
                    let metrics = json!({
                        "terms": poly.terms.len(),
                        "degree": poly.degree,
                        "support": poly.support,
                    });
                    ("xos", Model::Polynomial(poly), metrics)
                }
                LearnAlg::Agnostic => {
                    let sample_set = match &data {
                        Some(path) => io::load_samples(path, f.n(), SampleSource::Uniform)?,
                        None => {
                            let dist = ProductDist::uniform(f.n());
                            SampleSet::draw(&f, &dist, samples.unwrap_or(4096), &mut rng)?
                        }
                    };
                    let poly = learn::agnostic_l1(&sample_set, 1.0, eps, w, &Default::default())?;
                    let metrics = json!({
                        "terms": poly.terms.len(),
                        "spectral_l1": poly.spectral_l1(),
                    });
                    ("agnostic", Model::Polynomial(poly), metrics)
                }
            };
            io::save_json(&out, &model)?;
            println!("learn {alg_name}: wrote {}", out.display());
            record(
                "learn",
                json!({
                    "fn": func.display().to_string(), "alg": alg_name, "eps": eps, "gamma": gamma,
                    "s": s, "t": t, "samples": samples, "budget": budget, "w": w,
                    "data": data.map(|d| d.display().to_string()), "seed": common.seed,
                }),
                &[&out],
                metrics,
                started,
            )
        }
        Command::Verify { suite, corpus: corpus_name, common } => {
            let started = io::now_ms();
            if corpus_name != "builtin" {
                return Err(format!("unknown corpus `{corpus_name}`").into());
            }
            let out = out_or(&common, "verify.csv");
            let mut reports = Vec::new();
            let run_ineq = matches!(suite, Suite::Inequalities | Suite::All);
            let run_boost = matches!(suite, Suite::Boosting | Suite::All);
            let run_conc = matches!(suite, Suite::Concentration | Suite::All);
            let run_lb = matches!(suite, Suite::Lowerbounds | Suite::All);
            if run_ineq {
                reports.push(verify::run_structural_suite(&corpus::builtin())?);
            }
            if run_boost {
                let grid: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
                let mut instances = Vec::new();
                for seed in 0..100u64 {
                    let members = corpus::random_down_closed(12, common.seed.wrapping_add(seed));
                    let fam = verify::DownClosedFamily::new(12, members)?;
                    instances
                        .extend(verify::check_boosting(&fam, &grid, &format!("random{seed}"))?.instances);
                }
                reports.push(verify::CheckReport { check: "boosting_monotone".into(), instances });
            }
            if run_conc {
                let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
                let mut instances = Vec::new();
                for n in corpus::SUITE_DIMS {
                    for e in corpus::lipschitz(n) {
                        instances.extend(verify::check_concentration(&e.f, &grid, &e.name)?.instances);
                    }
                }
                reports.push(verify::CheckReport { check: "concentration".into(), instances });
            }
            if run_lb {
                reports.push(verify::lower_bound_suite(&LowerBound::Linear { a: 4, junta: 2 })?);
                reports.push(verify::lower_bound_suite(&LowerBound::L2Influence { n: 16 })?);
                reports.push(verify::lower_bound_suite(&LowerBound::Xos {
                    a: 3,
                    samples: 1_000_000,
                    seed: common.seed.wrapping_add(1),
                })?);
                reports.push(verify::lower_bound_suite(&LowerBound::ProductTight { s: 4 })?);
            }
            let mut buf = Vec::new();
            verify::reports_to_csv(&reports, &mut buf)?;
            std::fs::write(&out, &buf)?;
            let mut all_pass = true;
            for rep in &reports {
                let pass = rep.passed();
                all_pass &= pass;
                println!(
                    "{}: {} ({} instances, worst slack {})",
                    rep.check,
                    if pass { "PASS" } else { "FAIL" },
                    rep.instances.len(),
                    rep.worst_slack()
                );
            }
            record(
                "verify",
                json!({"suite": format!("{:?}", suite as u8), "corpus": corpus_name, "seed": common.seed}),
                &[&out],
                json!({"all_pass": all_pass}),
                started,
            )?;
            if all_pass {
                Ok(())
            } else {
                Err("verification suite reported violations".into())
            }
        }
        Command::Test { func, mode, eps, samples, common } => {
            let started = io::now_ms();
            let (_, f) = io::load_function(&func)?;
            let mut rng = RngStream::new(common.seed).rng();
            let out = out_or(&common, "test.json");
            let (verdict, detail) = match mode {
                TestMode::Examples => {
                    let cfg = learn::PacConfig {
                        s: Some(4),
                        t: None,
                        t_cap: 4,
                        detect_samples: samples.or(Some(60_000)),
                        lp_samples: samples.or(Some(16_000)),
                        subset_cap: 100_000,
                    };
                    let mut oracle = FunctionOracle::uniform(&f);
                    let (verdict, outcome) = verify::test_from_examples(&mut oracle, eps, &cfg, &mut rng)?;
                    (verdict, json!({"empirical_error": outcome.empirical_error, "vars": outcome.vars}))
                }
                TestMode::Queries => {
                    let cfg = QueryTestConfig {
                        detect_samples: samples.unwrap_or(60_000),
                        ..Default::default()
                    };
                    let outcome = verify::test_with_queries(&f, eps, &cfg, &mut rng)?;
                    let detail = json!({
                        "reduced_vars": outcome.reduced_vars,
                        "distance_estimate": outcome.distance_estimate,
                        "max_second_difference": outcome.max_second_difference,
                    });
                    (outcome.verdict, detail)
                }
            };
            let verdict_str = match verdict {
                TestVerdict::Yes => "YES",
                TestVerdict::No => "NO",
                TestVerdict::Inconclusive => "INCONCLUSIVE",
            };
            println!("{verdict_str}");
            io::save_json(&out, &json!({"verdict": verdict_str, "detail": detail}))?;
            record(
                "test",
                json!({
                    "fn": func.display().to_string(),
                    "mode": if matches!(mode, TestMode::Examples) { "examples" } else { "queries" },
                    "eps": eps, "samples": samples, "seed": common.seed,
                }),
                &[&out],
                json!({"verdict": verdict_str}),
                started,
            )
        }
        Command::Lowerbound { which, a, junta, s, samples, common } => {
            let started = io::now_ms();
            let out = out_or(&common, "lowerbound.csv");
            let lb = match which {
                Which::Linear => LowerBound::Linear { a, junta },
                Which::Xos => LowerBound::Xos { a, samples, seed: common.seed },
                Which::L2 => LowerBound::L2Influence { n: 16 },
                Which::Product => LowerBound::ProductTight { s },
            };
            let report = verify::lower_bound_suite(&lb)?;
            let mut buf = Vec::new();
            verify::reports_to_csv(std::slice::from_ref(&report), &mut buf)?;
            std::fs::write(&out, &buf)?;
            let r = &report.instances[0];
            println!(
                "lowerbound {}: {} (slack {})",
                r.instance,
                if report.passed() { "PASS" } else { "FAIL" },
                r.slack
            );
            record(
                "lowerbound",
                json!({"a": a, "junta": junta, "s": s, "samples": samples, "seed": common.seed}),
                &[&out],
                json!({"instance": r.instance, "slack": r.slack, "note": r.note}),
                started,
            )?;
            if report.passed() {
                Ok(())
            } else {
                Err("lower-bound floor not met".into())
            }
        }
        Command::Sample { func, samples, exhaustive, common } => {
            let started = io::now_ms();
            let (_, f) = io::load_function(&func)?;
            let out = out_or(&common, "samples.csv");
            let set = if exhaustive {
                SampleSet::exhaustive(&f)?
            } else {
                let dist = ProductDist::uniform(f.n());
                let mut rng = RngStream::new(common.seed).rng();
                SampleSet::draw(&f, &dist, samples, &mut rng)?
            };
            io::save_samples(&out, &set)?;
            println!("sample: wrote {} rows to {}", set.len(), out.display());
            record(
                "sample",
                json!({
                    "fn": func.display().to_string(), "samples": samples,
                    "exhaustive": exhaustive, "seed": common.seed,
                }),
                &[&out],
                json!({"rows": set.len()}),
                started,
            )
        }
        Command::Predict { model, point, n } => {
            let m = io::load_model(&model)?;
            let x = Point::new(point, n)?;
            println!("{}", learn::predict(&m, x));
            Ok(())
        }
    }
}
