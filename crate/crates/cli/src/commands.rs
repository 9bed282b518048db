use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use szbf::check::Lemma1Report;
use szbf::model::{Diagnostic, RegularityEstimate};
use szbf::rng::PRNG_ID;
use szbf::sampling::h_range;
use szbf::simulate::{draw_initial, simulate_path_indexed, ExitStats};
use szbf::stability::{LyapunovProfile, LyapunovReport, ProfileSettings};
use szbf::{
    check_lemma1, check_lyapunov_conditions, check_szbf, estimate_growth_constant, estimate_invariance,
    estimate_lipschitz, estimate_stability_profile, load_model, make_alpha, validate, BarrierSpec, CheckOptions,
    ClassKeFn, Conclusion, CouplingMode, InitialCondition, Point, Restriction, SamplingPlan, SdeModel,
    VerificationReport64,
};

use crate::args::{CheckArgs, Format, OutputArgs, PlanArgs, SimArgs, StabilityArgs};
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
/// Samples (growth) and pairs (Lipschitz) for the Assumption 1 estimates in `check`.
pub const REGULARITY_SAMPLES: usize = 10_000;
const ALPHA_RANGE_GRID: usize = 51;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Failed,
}

#[derive(Serialize)]
struct Envelope<'a, R> {
    schema_version: u32,
    command: &'a str,
    model: &'a str,
    seed: u64,
    prng: &'a str,
    result: R,
}

struct Loaded {
    model: SdeModel,
    spec: BarrierSpec,
    alpha: ClassKeFn,
}

fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let (model, spec) =
        load_model(&text, stem).map_err(|source| CliError::Model { path: path.to_path_buf(), source })?;
    let pts: Vec<Vec<f64>> = SamplingPlan::grid(ALPHA_RANGE_GRID)
        .points::<f64>(&spec.domain, &spec.h)?
        .into_iter()
        .map(Point::into_inner)
        .collect();
    let range = h_range(&spec.h, &pts)?;
    let alpha = make_alpha(&spec.alpha, range).map_err(szbf::Error::from)?;
    Ok(Loaded { model, spec, alpha })
}

fn plan_of(args: &PlanArgs, seed: u64) -> (SamplingPlan, CheckOptions) {
    let plan = SamplingPlan::grid(args.grid).with_random(args.samples, seed);
    let mode = if args.sum_only { CouplingMode::SumOnly } else { CouplingMode::PerChannel };
    (plan, CheckOptions { coupling_mode: mode, tol_factor: args.tol })
}

type CsvOut = csv::Writer<BufWriter<File>>;

/// Writes the JSON to `--out` or stdout; in CSV mode the CSV goes to `--out`
/// and the JSON to stdout.
fn deliver<R, F>(
    stdout: &mut dyn Write,
    output: &OutputArgs,
    envelope: &Envelope<'_, R>,
    write_csv: F,
) -> Result<(), CliError>
where
    R: Serialize,
    F: FnOnce(&mut CsvOut) -> Result<(), CliError>,
{
    let mut json = serde_json::to_string_pretty(envelope)?;
    json.push('\n');
    match output.format {
        Format::Json => match &output.out {
            Some(path) => std::fs::write(path, &json).map_err(|e| CliError::io(path, e))?,
            None => stdout.write_all(json.as_bytes()).map_err(|e| CliError::io("<stdout>", e))?,
        },
        Format::Csv => {
            let path = output
                .out
                .as_ref()
                .ok_or_else(|| CliError::Usage("--format csv requires --out PATH".into()))?;
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            let mut w = csv::Writer::from_writer(BufWriter::new(file));
            write_csv(&mut w)?;
            w.flush().map_err(|e| CliError::io(path, e))?;
            stdout.write_all(json.as_bytes()).map_err(|e| CliError::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn axis_names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

#[derive(Serialize)]
struct AssumptionEstimates {
    growth: RegularityEstimate,
    lipschitz: RegularityEstimate,
}

#[derive(Serialize)]
struct CheckResult<'a> {
    barrier: String,
    domain: String,
    diagnostics: Vec<Diagnostic>,
    assumption_1: AssumptionEstimates,
    report: &'a VerificationReport64,
}

fn verdict(conclusion: Conclusion) -> Outcome {
    // inconclusive fails the gate as well: nothing was verified
    match conclusion {
        Conclusion::CertifiedOnSamples => Outcome::Passed,
        Conclusion::Refuted | Conclusion::Inconclusive => Outcome::Failed,
    }
}

pub fn check(args: &CheckArgs, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    let Loaded { model, spec, alpha } = load(&args.model)?;
    let (plan, options) = plan_of(&args.plan, args.seed);
    let report: VerificationReport64 = check_szbf(&model, &spec.h, &alpha, &spec.domain, &plan, &options)?;
    let center = spec.domain.bounds().center();
    let result = CheckResult {
        barrier: spec.h.to_string(),
        domain: spec.domain.describe(),
        diagnostics: validate(&model, &center, 1e-12),
        assumption_1: AssumptionEstimates {
            growth: estimate_growth_constant(&model, &spec.domain, REGULARITY_SAMPLES, args.seed)?,
            lipschitz: estimate_lipschitz(&model, &spec.domain, REGULARITY_SAMPLES, args.seed)?,
        },
        report: &report,
    };
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        command: "check",
        model: model.name(),
        seed: args.seed,
        prng: PRNG_ID,
        result,
    };
    deliver(stdout, &args.output, &envelope, |w| {
        let n = model.dim();
        let m = model.noise_dim();
        let mut header: Vec<String> = axis_names("x", n).collect();
        header.extend(["h", "margin", "tol_i"].map(String::from));
        header.extend(axis_names("coupling", m));
        header.push("coupling_sum".into());
        w.write_record(&header)?;
        for r in &report.records {
            let mut row: Vec<String> = r.point.iter().map(f64::to_string).collect();
            row.extend([r.h, r.margin, r.tol_i].map(|v| v.to_string()));
            row.extend(r.couplings.iter().map(f64::to_string));
            row.push(r.coupling_sum.to_string());
            w.write_record(&row)?;
        }
        Ok(())
    })?;
    Ok(verdict(report.conclusion))
}

#[derive(Serialize)]
struct Lemma1Result<'a> {
    barrier: String,
    domain: String,
    report: &'a Lemma1Report<f64>,
}

pub fn lemma1(args: &CheckArgs, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    let Loaded { model, spec, alpha } = load(&args.model)?;
    let (plan, options) = plan_of(&args.plan, args.seed);
    let report = check_lemma1::<f64>(&model, &spec.h, &alpha, &spec.domain, &plan, &options)?;
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        command: "lemma1",
        model: model.name(),
        seed: args.seed,
        prng: PRNG_ID,
        result: Lemma1Result { barrier: spec.h.to_string(), domain: spec.domain.describe(), report: &report },
    };
    deliver(stdout, &args.output, &envelope, |w| {
        let n = model.dim();
        let mut header: Vec<String> = axis_names("x", n).collect();
        header.extend(["h", "margin_szbf", "margin_drift_only"].map(String::from));
        w.write_record(&header)?;
        for (a, b) in report.szbf.records.iter().zip(&report.drift_only.records) {
            let mut row: Vec<String> = a.point.iter().map(f64::to_string).collect();
            row.extend([a.h, a.margin, b.margin].map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        Ok(())
    })?;
    Ok(verdict(report.szbf.conclusion))
}

#[derive(Serialize)]
struct SimResult<'a> {
    barrier: String,
    initial_condition: String,
    stats: &'a ExitStats<f64>,
}

fn initial_condition(args: &SimArgs, spec: &BarrierSpec) -> Result<(InitialCondition<f64>, String), CliError> {
    match &args.x0 {
        Some(x0) => {
            let p = Point::new(x0.clone())
                .ok_or_else(|| CliError::Usage("--x0 must be a non-empty list of finite numbers".into()))?;
            let label = format!("fixed {:?}", p.coords());
            Ok((InitialCondition::Fixed(p), label))
        }
        None => Ok((
            InitialCondition::Uniform(spec.domain.clone()),
            format!("uniform over {} intersected with C", spec.domain.describe()),
        )),
    }
}

pub fn simulate(args: &SimArgs, stdout: &mut dyn Write, with_paths: bool) -> Result<Outcome, CliError> {
    let Loaded { model, spec, .. } = load(&args.model)?;
    if let Some(x0) = &args.x0 {
        if x0.len() != model.dim() {
            return Err(CliError::Usage(format!(
                "--x0 has {} coordinates, model has dimension {}",
                x0.len(),
                model.dim()
            )));
        }
    }
    let (init, label) = initial_condition(args, &spec)?;
    let s = &args.sim;
    let stats = estimate_invariance(&model, &spec.h, &init, s.paths, s.dt, s.horizon, args.seed)?;
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        command: if with_paths { "simulate" } else { "exit-prob" },
        model: model.name(),
        seed: args.seed,
        prng: PRNG_ID,
        result: SimResult { barrier: spec.h.to_string(), initial_condition: label, stats: &stats },
    };
    deliver(stdout, &args.output, &envelope, |w| {
        if !with_paths {
            w.write_record([
                "n_paths", "n_exited", "n_exploded", "exit_prob", "ci_lo", "ci_hi", "horizon", "dt", "seed",
            ])?;
            w.write_record([
                stats.n_paths.to_string(),
                stats.n_exited.to_string(),
                stats.n_exploded.to_string(),
                stats.empirical_exit_prob.to_string(),
                stats.wilson_ci_95.0.to_string(),
                stats.wilson_ci_95.1.to_string(),
                stats.horizon.to_string(),
                stats.dt.to_string(),
                stats.seed.to_string(),
            ])?;
            return Ok(());
        }
        let mut header = vec!["path".to_string(), "t".to_string()];
        header.extend(axis_names("x", model.dim()));
        header.push("h".into());
        w.write_record(&header)?;
        for i in 0..s.paths as u64 {
            let x0 = Point::new(draw_initial(&init, &spec.h, args.seed, i)?)
                .ok_or_else(|| CliError::Usage("initial point is not finite".into()))?;
            let path = simulate_path_indexed(&model, &x0, s.dt, s.horizon, args.seed, i)?;
            for (t, x) in path.times.iter().zip(&path.states) {
                let mut row = vec![i.to_string(), t.to_string()];
                row.extend(x.iter().map(f64::to_string));
                row.push(spec.h.eval(x).map(|v| v.to_string()).unwrap_or_default());
                w.write_record(&row)?;
            }
        }
        Ok(())
    })?;
    Ok(if stats.n_exited == 0 { Outcome::Passed } else { Outcome::Failed })
}

#[derive(Serialize)]
struct StabilityResult<'a> {
    barrier: String,
    domain: String,
    alpha: &'a ClassKeFn,
    lyapunov: &'a LyapunovReport<f64>,
    profile: &'a LyapunovProfile<f64>,
}

pub fn stability(args: &StabilityArgs, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    let Loaded { model, spec, alpha } = load(&args.model)?;
    let (plan, options) = plan_of(&args.plan, args.seed);
    let plan = plan.restricted(Restriction::Domain);
    let lyapunov =
        check_lyapunov_conditions::<f64>(&model, &spec.h, &alpha, &spec.domain, &plan, options.tol_factor)?;
    let settings = ProfileSettings {
        eps_levels: args.eps.clone(),
        init_distances: args.dist.clone(),
        n_paths: args.sim.paths,
        dt: args.sim.dt,
        horizon: args.sim.horizon,
        seed: args.seed,
    };
    let profile = estimate_stability_profile(&model, &spec.h, &spec.domain, &settings)?;
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        command: "stability",
        model: model.name(),
        seed: args.seed,
        prng: PRNG_ID,
        result: StabilityResult {
            barrier: spec.h.to_string(),
            domain: spec.domain.describe(),
            alpha: &alpha,
            lyapunov: &lyapunov,
            profile: &profile,
        },
    };
    deliver(stdout, &args.output, &envelope, |w| {
        let mut header = vec!["init_distance".to_string()];
        header.extend(profile.eps_levels.iter().map(|e| format!("eps={e}")));
        w.write_record(&header)?;
        for (d, row) in profile.init_distances.iter().zip(&profile.prob_matrix) {
            let mut rec = vec![d.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        Ok(())
    })?;
    Ok(verdict(lyapunov.conclusion))
}
