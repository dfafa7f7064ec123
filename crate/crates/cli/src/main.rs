//! Command-line front end: parses a sectioned problem file, dispatches
//! analyses, and emits deterministic human-readable or JSON reports.
//!
//! Exit codes: 0 verdict-positive, 1 verdict-negative (e.g. not involutive,
//! torsion found), 2 input errors, 3 sampling or singularity failures.

mod problem;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use pfaffian_core::fibration::PfaffianFibration;
use pfaffian_core::linalg::SamplingPolicy;
use pfaffian_core::relalg;
use pfaffian_core::symmetry;
use pfaffian_core::tableau::involutivity_test;
use pfaffian_core::Error as CoreError;

use problem::{parse_problem, ProblemError, ProblemFile};
use report::Report;

#[derive(Parser)]
#[command(
    name = "pfaffian",
    about = "Exact analysis of Pfaffian fibrations in coordinates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the fibration axioms for every fibration in the file.
    Validate(CommonArgs),
    /// Sampled integrability report: fibers, torsion, tableau characters.
    Analyze(CommonArgs),
    /// Tableau maps at sampled points with the randomized involutivity test.
    Tableau(CommonArgs),
    /// Build the prolonged fibration symbolically.
    Prolong(CommonArgs),
    /// Extract the underlying relative algebroid and verify its axioms.
    Algebroid(CommonArgs),
    /// Compare prolongation fibers with completion fibers at sampled points.
    Correspond(CommonArgs),
    /// Classify the file's diffeomorphisms and jet elements as symmetries.
    Symmetry(CommonArgs),
    /// Check the groupoid action conditions at sampled composable pairs.
    ActionCheck(CommonArgs),
    /// Evaluate the point-symmetry form identity on sampled jet data.
    IdentityCheck(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Problem file.
    file: PathBuf,
    /// Number of sampled points (or pairs, or identity samples).
    #[arg(long, default_value_t = 8)]
    samples: u32,
    /// Seed for all deterministic sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Height bound for sampled rationals.
    #[arg(long, default_value_t = 10)]
    height: u32,
    /// Emit the report as JSON.
    #[arg(long)]
    json: bool,
    /// Name of the fibration to analyze (defaults to the only one).
    #[arg(long)]
    fibration: Option<String>,
    /// Random flags tried by the involutivity search.
    #[arg(long, default_value_t = 24)]
    trials: u32,
}

impl CommonArgs {
    fn policy(&self) -> SamplingPolicy {
        SamplingPolicy {
            seed: self.seed,
            height_bound: self.height,
            max_retries: 128,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Validate(a) => ("validate", a),
        Command::Analyze(a) => ("analyze", a),
        Command::Tableau(a) => ("tableau", a),
        Command::Prolong(a) => ("prolong", a),
        Command::Algebroid(a) => ("algebroid", a),
        Command::Correspond(a) => ("correspond", a),
        Command::Symmetry(a) => ("symmetry", a),
        Command::ActionCheck(a) => ("action-check", a),
        Command::IdentityCheck(a) => ("identity-check", a),
    };
    let mut rep = Report::new(name, args.seed);
    let code = run(name, args, &mut rep);
    if args.json {
        println!("{}", rep.to_json());
    } else {
        print!("{}", rep.to_text());
    }
    std::process::exit(code);
}

fn core_error_code(e: &CoreError) -> i32 {
    match e {
        CoreError::SamplingExhausted(_)
        | CoreError::RankInstability(_)
        | CoreError::SingularPoint(_)
        | CoreError::SingularFrame(_) => 3,
        CoreError::Syntax { .. }
        | CoreError::UnknownCoordinate(_)
        | CoreError::ZeroDenominator
        | CoreError::PoleAtPoint
        | CoreError::SpecInvalid(_)
        | CoreError::ChartMismatch(_)
        | CoreError::DimensionMismatch(_) => 2,
        _ => 1,
    }
}

fn problem_error_code(e: &ProblemError) -> i32 {
    match e {
        ProblemError::Core { error, .. } => core_error_code(error),
        _ => 2,
    }
}

fn run(name: &str, args: &CommonArgs, rep: &mut Report) -> i32 {
    let text = match std::fs::read_to_string(&args.file) {
        Ok(t) => t,
        Err(e) => {
            rep.errors
                .push(format!("cannot read {}: {e}", args.file.display()));
            return 2;
        }
    };
    let pf = match parse_problem(&text, &args.policy()) {
        Ok(pf) => pf,
        Err(e) => {
            let code = problem_error_code(&e);
            rep.errors.push(e.to_string());
            return code;
        }
    };
    let result = match name {
        "validate" => cmd_validate(&pf, args, rep),
        "analyze" => cmd_analyze(&pf, args, rep),
        "tableau" => cmd_tableau(&pf, args, rep),
        "prolong" => cmd_prolong(&pf, args, rep),
        "algebroid" => cmd_algebroid(&pf, args, rep),
        "correspond" => cmd_correspond(&pf, args, rep),
        "symmetry" => cmd_symmetry(&pf, args, rep),
        "action-check" => cmd_action_check(&pf, args, rep),
        "identity-check" => cmd_identity_check(&pf, args, rep),
        _ => unreachable!(),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let code = core_error_code(&e);
            rep.errors.push(e.to_string());
            code
        }
    }
}

fn resolve_fibration<'a>(
    pf: &'a ProblemFile,
    args: &CommonArgs,
) -> Result<(String, &'a PfaffianFibration), CoreError> {
    let names = pf.fibration_names();
    let name = match &args.fibration {
        Some(n) => n.clone(),
        None => {
            if names.len() == 1 {
                names[0].clone()
            } else {
                return Err(CoreError::SpecInvalid(format!(
                    "need --fibration to pick among {names:?}"
                )));
            }
        }
    };
    match pf.fibrations.get(&name) {
        Some(Ok(f)) => Ok((name, f)),
        Some(Err(e)) => Err(e.clone()),
        None => Err(CoreError::SpecInvalid(format!(
            "unknown fibration `{name}`"
        ))),
    }
}

fn cmd_validate(pf: &ProblemFile, _args: &CommonArgs, rep: &mut Report) -> Result<bool, CoreError> {
    let names = pf.fibration_names();
    if names.is_empty() {
        return Err(CoreError::SpecInvalid("no fibrations in the file".into()));
    }
    let mut all = true;
    for name in names {
        match &pf.fibrations[&name] {
            Ok(f) => {
                rep.verdicts.insert(format!("valid_{name}"), true);
                rep.dimensions
                    .insert(format!("{name}_dim_base"), f.dim_base() as i64);
                rep.dimensions
                    .insert(format!("{name}_dim_vertical"), f.dim_vertical() as i64);
                rep.dimensions
                    .insert(format!("{name}_dim_quotient"), f.dim_quotient() as i64);
            }
            Err(e) => {
                all = false;
                rep.verdicts.insert(format!("valid_{name}"), false);
                rep.witnesses.push(format!("{name}: {e}"));
            }
        }
    }
    Ok(all)
}

fn cmd_analyze(pf: &ProblemFile, args: &CommonArgs, rep: &mut Report) -> Result<bool, CoreError> {
    let (_, f) = resolve_fibration(pf, args)?;
    let out = f.one_integrability_report(&args.policy(), args.samples, args.trials)?;
    rep.verdicts.insert(
        "one_integrable_on_samples".into(),
        out.one_integrable_on_samples,
    );
    rep.verdicts
        .insert("torsion_found".into(), out.torsion_found);
    if let Some(d) = out.fiber_dim {
        rep.dimensions.insert("fiber_dim".into(), d as i64);
    }
    for (k, pa) in out.points.iter().enumerate() {
        rep.push_point(format!("point_{k}"), &pa.point);
        rep.characters
            .insert(format!("point_{k}"), pa.characters.clone());
        rep.dimensions
            .insert(format!("point_{k}_partial_dim"), pa.partial_dim as i64);
        match pa.fiber_dim {
            Some(d) => {
                rep.dimensions
                    .insert(format!("point_{k}_fiber_dim"), d as i64);
            }
            None => {
                rep.witnesses
                    .push(format!("point_{k}: empty prolongation fiber (torsion)"));
            }
        }
        rep.verdicts.insert(
            format!("point_{k}_involutive"),
            pa.tableau_report.involutive_with_this_flag,
        );
    }
    Ok(out.one_integrable_on_samples && !out.torsion_found)
}

fn cmd_tableau(pf: &ProblemFile, args: &CommonArgs, rep: &mut Report) -> Result<bool, CoreError> {
    let (_, f) = resolve_fibration(pf, args)?;
    let policy = args.policy();
    rep.dimensions
        .insert("dim_g".into(), f.dim_vertical() as i64);
    rep.dimensions.insert("dim_v".into(), f.dim_base() as i64);
    rep.dimensions
        .insert("dim_w".into(), f.dim_quotient() as i64);
    let mut all = true;
    for k in 0..args.samples {
        let p = f.sample_valid_point(&policy.split(1000 + k as u64))?;
        let tau = f.tableau_map_at(&p)?;
        let report = involutivity_test(&tau, args.trials, args.seed ^ k as u64);
        rep.push_point(format!("point_{k}"), &p);
        rep.characters
            .insert(format!("point_{k}"), report.characters.clone());
        rep.dimensions
            .insert(format!("point_{k}_dim_g1"), report.dim_g1 as i64);
        rep.dimensions
            .insert(format!("point_{k}_dim_ker_tau"), report.dim_ker_tau as i64);
        rep.dimensions
            .insert(format!("point_{k}_bound"), report.bound as i64);
        rep.verdicts.insert(
            format!("point_{k}_involutive"),
            report.involutive_with_this_flag,
        );
        if !report.involutive_with_this_flag {
            all = false;
            rep.witnesses
                .push(format!("point_{k}: {}", report.verdict()));
        }
    }
    rep.verdicts.insert("involutive_witnessed".into(), all);
    Ok(all)
}

fn cmd_prolong(pf: &ProblemFile, args: &CommonArgs, rep: &mut Report) -> Result<bool, CoreError> {
    let (_, f) = resolve_fibration(pf, args)?;
    match f.prolong(&args.policy()) {
        Ok(prol) => {
            rep.verdicts.insert("prolongable".into(), true);
            rep.dimensions.insert("params".into(), prol.params as i64);
            rep.dimensions
                .insert("total_dim".into(), prol.fibration.total().dim() as i64);
            let coords: Vec<String> = prol
                .fibration
                .total()
                .coords()
                .iter()
                .map(|c| c.name().to_string())
                .collect();
            rep.witnesses.push(format!("chart: {}", coords.join(", ")));
            // correspondence table: w_k against the xi kernel basis entries
            let n = f.dim_base();
            let r = f.dim_vertical();
            for (k, kb) in prol.xi_kernel.iter().enumerate() {
                let mut entries = Vec::new();
                for a in 0..r {
                    for i in 0..n {
                        if !kb[(a, i)].is_zero() {
                            entries.push(format!("xi[v{a}][x{i}] = {}", kb[(a, i)]));
                        }
                    }
                }
                rep.witnesses
                    .push(format!("w_{}: {}", k + 1, entries.join("; ")));
            }
            for form in prol.fibration.pfaffian_forms() {
                let terms: Vec<String> = form
                    .terms()
                    .map(|(idx, c)| {
                        let names: Vec<&str> = idx
                            .iter()
                            .map(|&i| prol.fibration.total().coords()[i].name())
                            .collect();
                        format!("({c}) d{}", names.join("^d"))
                    })
                    .collect();
                rep.witnesses.push(format!("form: {}", terms.join(" + ")));
            }
            Ok(true)
        }
        Err(CoreError::NoGlobalParametrization(msg)) => {
            rep.verdicts.insert("prolongable".into(), false);
            rep.witnesses.push(msg);
            Ok(false)
        }
        Err(e) => Err(e),
    }
}

fn cmd_algebroid(pf: &ProblemFile, args: &CommonArgs, rep: &mut Report) -> Result<bool, CoreError> {
    let (_, f) = resolve_fibration(pf, args)?;
    let data = relalg::extract_algebroid(f)?;
    rep.verdicts.insert("extracted".into(), true);
    rep.dimensions.insert("rank".into(), data.rank() as i64);
    match relalg::check_structure(&data, &args.policy()) {
        Ok(s) => {
            rep.verdicts.insert("flatness".into(), s.flatness);
            rep.verdicts.insert("leibniz".into(), s.leibniz);
            rep.verdicts
                .insert("anchor_equation".into(), s.anchor_equation);
            rep.verdicts
                .insert("pushforward_is_de_rham".into(), s.pushforward_is_de_rham);
            Ok(s.flatness && s.leibniz && s.anchor_equation && s.pushforward_is_de_rham)
        }
        Err(CoreError::StructureViolation { check, witness }) => {
            rep.verdicts.insert(check.clone(), false);
            rep.witnesses.push(witness);
            Ok(false)
        }
        Err(e) => Err(e),
    }
}

fn cmd_correspond(
    pf: &ProblemFile,
    args: &CommonArgs,
    rep: &mut Report,
) -> Result<bool, CoreError> {
    let (_, f) = resolve_fibration(pf, args)?;
    let data = relalg::extract_algebroid(f)?;
    let policy = args.policy();
    let mut all = true;
    for k in 0..args.samples {
        let p = f.sample_valid_point(&policy.split(2000 + k as u64))?;
        rep.push_point(format!("point_{k}"), &p);
        match relalg::correspondence_check(f, &data, &p) {
            Ok(c) => {
                rep.verdicts
                    .insert(format!("point_{k}_fibers_equal"), c.fibers_equal);
                if let Some(d) = c.prolongation_dim {
                    rep.dimensions
                        .insert(format!("point_{k}_fiber_dim"), d as i64);
                } else {
                    rep.witnesses.push(format!("point_{k}: both fibers empty"));
                }
            }
            Err(CoreError::CorrespondenceMismatch(msg)) => {
                all = false;
                rep.verdicts
                    .insert(format!("point_{k}_fibers_equal"), false);
                rep.witnesses.push(msg);
            }
            Err(e) => return Err(e),
        }
        match relalg::algebroid_tableau_at(f, &data, &p) {
            Ok(_) => {
                rep.verdicts
                    .insert(format!("point_{k}_tableau_identified"), true);
            }
            Err(CoreError::CorrespondenceMismatch(msg)) => {
                all = false;
                rep.verdicts
                    .insert(format!("point_{k}_tableau_identified"), false);
                rep.witnesses.push(msg);
            }
            Err(e) => return Err(e),
        }
    }
    rep.verdicts.insert("correspondence".into(), all);
    Ok(all)
}

fn cmd_symmetry(pf: &ProblemFile, args: &CommonArgs, rep: &mut Report) -> Result<bool, CoreError> {
    let (_, f) = resolve_fibration(pf, args)?;
    if pf.diffeos.is_empty() && pf.jet_elements.is_empty() {
        return Err(CoreError::SpecInvalid(
            "no diffeos or jet elements in the file".into(),
        ));
    }
    let mut all = true;
    for (name, phi) in &pf.diffeos {
        let v = symmetry::classify_symmetry(f, phi)?;
        rep.verdicts.insert(format!("{name}_internal"), v.internal);
        rep.verdicts.insert(format!("{name}_pfaffian"), v.pfaffian);
        if let Some(w) = v.witness {
            rep.witnesses.push(format!("{name}: {w}"));
        }
        if !v.internal {
            all = false;
        }
    }
    for (name, jet) in &pf.jet_elements {
        let v = symmetry::jet_membership(f, jet)?;
        rep.verdicts.insert(format!("{name}_in_g_c"), v.internal);
        rep.verdicts.insert(format!("{name}_in_g_c_pi"), v.pfaffian);
        if let Some(w) = v.witness {
            rep.witnesses.push(format!("{name}: {w}"));
        }
        if !v.internal {
            all = false;
        }
    }
    Ok(all)
}

fn cmd_action_check(
    pf: &ProblemFile,
    args: &CommonArgs,
    rep: &mut Report,
) -> Result<bool, CoreError> {
    let (_, f) = resolve_fibration(pf, args)?;
    if pf.actions.is_empty() {
        return Err(CoreError::SpecInvalid("no actions in the file".into()));
    }
    let mut all = true;
    for (name, spec) in &pf.actions {
        let out = symmetry::check_action(f, spec, &args.policy(), args.samples)?;
        rep.verdicts
            .insert(format!("{name}_internal"), out.internal);
        rep.verdicts
            .insert(format!("{name}_pfaffian"), out.pfaffian);
        if let Some(w) = out.witness {
            rep.witnesses.push(format!("{name}: {w}"));
        }
        if !out.internal {
            all = false;
        }
    }
    Ok(all)
}

fn cmd_identity_check(
    pf: &ProblemFile,
    args: &CommonArgs,
    rep: &mut Report,
) -> Result<bool, CoreError> {
    let mut ran = 0;
    let mut all = true;
    for (kind, name) in &pf.order {
        if kind != "map" {
            continue;
        }
        let q = &pf.maps[name];
        match symmetry::point_symmetry_identity(q, args.samples, args.seed, args.height) {
            Ok(out) => {
                ran += 1;
                rep.verdicts
                    .insert(format!("{name}_all_equal"), out.all_equal);
                rep.verdicts
                    .insert(format!("{name}_containment"), out.containment_holds);
                if !(out.all_equal && out.containment_holds) {
                    all = false;
                }
            }
            Err(CoreError::NotAProjection(_)) => {
                rep.witnesses
                    .push(format!("{name}: skipped (not a coordinate projection)"));
            }
            Err(e) => return Err(e),
        }
    }
    if ran == 0 {
        return Err(CoreError::SpecInvalid(
            "no coordinate-projection maps to check".into(),
        ));
    }
    Ok(all)
}
