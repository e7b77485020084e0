//! Command-line interface.
//!
//! Subcommands:
//!
//! * `group-check` — structural checks of the 24-element principal-frame
//!   symmetry group and of the frame covering over a reference (or supplied)
//!   body.
//! * `equilibrium` — solve for the synchronous relative equilibrium and
//!   report its configuration and transversal spectrum.
//! * `simulate` — integrate a perturbed trajectory and write it as CSV.
//! * `verify` — run the dissipative convergence experiment and print one
//!   pass/fail line per threshold.
//! * `sweep` — solve the equilibrium across a list of stiffness values in
//!   parallel and tabulate the branch.
//!
//! All floating-point output uses 17 significant digits so runs can be
//! compared bit-for-bit. Exit codes: 0 success, 2 invalid input, 3 a check
//! ran and failed, 4 numerical failure.

use std::fs::File;
use std::io::{BufWriter, Write as IoWrite};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::body::load_point_cloud;
use crate::config::load_model;
use crate::dynamics::{ModelParams, SimOptions};
use crate::equilibrium::{
    find_equilibrium, lasalle_experiment, ConvergenceReport, Equilibrium, LasalleThresholds,
    PerturbationSpec, Verdict,
};
use crate::error::{Error, Result};
use crate::integrate::Method;
use crate::kinematics::{chiral_octahedral_group, covering_fiber, inertia_from_body,
    principal_axes, Rotation3, DEFAULT_GAP_TOL};

/// Distance below which two rotations count as the same group element.
const GROUP_DISTINCT_TOL: f64 = 1e-9;
/// Tolerance for reconstructing a tensor from a fiber representative.
const FIBER_RECONSTRUCT_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "tidelock",
    version,
    about = "Numerical laboratory for a deformable satellite in planar orbit"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the principal-frame symmetry group and the 24-fold covering.
    GroupCheck(GroupCheckArgs),
    /// Solve for the synchronous relative equilibrium.
    Equilibrium(EquilibriumArgs),
    /// Integrate a perturbed trajectory and write CSV.
    Simulate(SimulateArgs),
    /// Run the dissipative convergence experiment with pass/fail verdicts.
    Verify(VerifyArgs),
    /// Solve the equilibrium branch across several stiffness values.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// JSON model configuration (built-in reference model when omitted).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override the elastic stiffness parameter.
    #[arg(long, value_name = "X")]
    epsilon: Option<f64>,
    /// Override the isotropic friction strength (0 removes friction).
    #[arg(long, value_name = "X")]
    eta: Option<f64>,
}

impl ModelArgs {
    fn load(&self) -> Result<ModelParams> {
        load_model(self.config.as_deref(), self.epsilon, self.eta)
    }
}

#[derive(Debug, Args)]
struct GroupCheckArgs {
    /// Point-cloud body file (CSV: x, y, z, mass); a generic diagonal
    /// tensor is checked when omitted.
    #[arg(long, value_name = "FILE")]
    body: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EquilibriumArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Write the solution as JSON.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Adaptive embedded 5(4) pair with dense output.
    Adaptive,
    /// Fixed-step implicit midpoint (energy-drift-free without friction).
    Midpoint,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// End time of the run.
    #[arg(long = "t-end", value_name = "T", default_value_t = 1000.0)]
    t_end: f64,
    /// Perturbation size applied to the equilibrium.
    #[arg(long, value_name = "X", default_value_t = 1e-3)]
    perturb: f64,
    /// Seed for a random perturbation direction (uniform component mix
    /// when omitted).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Integration method.
    #[arg(long, value_enum, default_value_t = MethodArg::Adaptive)]
    method: MethodArg,
    /// Relative tolerance (adaptive method).
    #[arg(long, value_name = "X", default_value_t = 1e-9)]
    rtol: f64,
    /// Absolute tolerance (adaptive method).
    #[arg(long, value_name = "X", default_value_t = 1e-12)]
    atol: f64,
    /// Step size (midpoint method).
    #[arg(long, value_name = "H", default_value_t = 5e-4)]
    dt: f64,
    /// Sampling interval for the CSV record; 0 records every accepted step.
    #[arg(long = "record-interval", value_name = "T", default_value_t = 1.0)]
    record_interval: f64,
    /// Output CSV path (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// End time of the experiment.
    #[arg(long = "t-end", value_name = "T", default_value_t = 1e4)]
    t_end: f64,
    /// Perturbation size applied to the equilibrium.
    #[arg(long, value_name = "X", default_value_t = 1e-3)]
    perturb: f64,
    /// Seed for a random perturbation direction.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated stiffness values, e.g. 1e-2,1e-3,1e-4.
    #[arg(long, value_name = "LIST", value_delimiter = ',', required = true)]
    epsilons: Vec<f64>,
    /// Output CSV path (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Entry point for the binary: parse `std::env::args` and dispatch.
pub fn run() -> Result<()> {
    dispatch(Cli::parse())
}

/// Entry point for in-process tests.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)
        .map_err(|e| Error::Config(format!("argument parsing failed: {e}")))?;
    dispatch(cli)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GroupCheck(args) => group_check(&args),
        Command::Equilibrium(args) => equilibrium_cmd(&args),
        Command::Simulate(args) => simulate_cmd(&args),
        Command::Verify(args) => verify_cmd(&args),
        Command::Sweep(args) => sweep_cmd(&args),
    }
}

fn check_line(name: &str, pass: bool, detail: &str) -> Result<()> {
    println!("{}  {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    if pass {
        Ok(())
    } else {
        Err(Error::Verification(format!("{name}: {detail}")))
    }
}

fn group_check(args: &GroupCheckArgs) -> Result<()> {
    let table = chiral_octahedral_group();
    check_line(
        "group order",
        table.len() == 24,
        &format!("{} elements generated", table.len()),
    )?;

    let mut distinct = true;
    for (i, gi) in table.iter().enumerate() {
        for gj in table.iter().skip(i + 1) {
            if gi.distance(gj) <= GROUP_DISTINCT_TOL {
                distinct = false;
            }
        }
    }
    check_line("group distinctness", distinct, "pairwise distances > 1e-9")?;

    let contains = |r: &Rotation3| table.iter().any(|g| g.distance(r) <= GROUP_DISTINCT_TOL);
    let closure = table
        .iter()
        .all(|a| table.iter().all(|b| contains(&a.compose(b))));
    check_line("group closure", closure, "all pairwise products in table")?;
    let inverses = table.iter().all(|a| contains(&a.inverse()));
    check_line("group inverses", inverses, "all inverses in table")?;

    let (frame, moments) = match &args.body {
        Some(path) => {
            let body = load_point_cloud(path)?;
            let tensor = inertia_from_body(&body);
            let (frame, moments) = principal_axes(&tensor, DEFAULT_GAP_TOL)?;
            println!(
                "body {}: principal moments {:.6e} {:.6e} {:.6e}",
                path.display(),
                moments[0],
                moments[1],
                moments[2]
            );
            (frame, moments)
        }
        None => (Rotation3::identity(), [1.0, 2.0, 3.0]),
    };

    let fiber = covering_fiber(&frame, &moments);
    check_line(
        "fiber size",
        fiber.len() == 24,
        &format!("{} representatives", fiber.len()),
    )?;
    let mut fiber_distinct = true;
    for (i, (ri, mi)) in fiber.iter().enumerate() {
        for (rj, mj) in fiber.iter().skip(i + 1) {
            let same_frame = ri.distance(rj) <= GROUP_DISTINCT_TOL;
            let same_moments = mi
                .iter()
                .zip(mj)
                .all(|(a, b)| (a - b).abs() <= GROUP_DISTINCT_TOL);
            if same_frame && same_moments {
                fiber_distinct = false;
            }
        }
    }
    check_line(
        "fiber distinctness",
        fiber_distinct,
        "24 distinct frame/moment pairs",
    )?;

    let base = frame.matrix()
        * nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(
            moments[0], moments[1], moments[2],
        ))
        * frame.matrix().transpose();
    let scale = moments.iter().fold(1.0_f64, |a, m| a.max(m.abs()));
    let mut worst = 0.0_f64;
    for (r, m) in &fiber {
        let rec = r.matrix()
            * nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::new(m[0], m[1], m[2]))
            * r.matrix().transpose();
        worst = worst.max((rec - base).amax());
    }
    check_line(
        "fiber reconstruction",
        worst <= FIBER_RECONSTRUCT_TOL * scale,
        &format!("worst defect {worst:.3e}"),
    )?;
    Ok(())
}

/// Serializable equilibrium summary for `equilibrium --out`.
#[derive(Debug, Serialize)]
struct EquilibriumSummary {
    epsilon: f64,
    p: f64,
    r_bar: f64,
    j_bar: [f64; 3],
    z_bar: Vec<f64>,
    mean_motion: f64,
    residual_norm: f64,
    transversal_hessian_eigs: Vec<f64>,
}

impl EquilibriumSummary {
    fn new(params: &ModelParams, eq: &Equilibrium) -> Self {
        EquilibriumSummary {
            epsilon: eq.epsilon,
            p: eq.p,
            r_bar: eq.r_bar,
            j_bar: eq.j_bar,
            z_bar: eq.z_bar.iter().copied().collect(),
            mean_motion: eq.mean_motion(&params.gravity),
            residual_norm: eq.residual_norm,
            transversal_hessian_eigs: eq.transversal_hessian_eigs.clone(),
        }
    }
}

fn print_equilibrium(summary: &EquilibriumSummary) {
    println!("R     = {:.16e}", summary.r_bar);
    println!(
        "J     = [{:.16e}, {:.16e}, {:.16e}]",
        summary.j_bar[0], summary.j_bar[1], summary.j_bar[2]
    );
    let z: Vec<String> = summary.z_bar.iter().map(|z| format!("{z:.16e}")).collect();
    println!("z     = [{}]", z.join(", "));
    println!("rate  = {:.16e}", summary.mean_motion);
    println!("resid = {:.3e}", summary.residual_norm);
    let eigs: Vec<String> = summary
        .transversal_hessian_eigs
        .iter()
        .map(|e| format!("{e:.6e}"))
        .collect();
    println!("transversal hessian eigenvalues: [{}]", eigs.join(", "));
}

fn equilibrium_cmd(args: &EquilibriumArgs) -> Result<()> {
    let params = args.model.load()?;
    let eq = find_equilibrium(&params)?;
    let summary = EquilibriumSummary::new(&params, &eq);
    print_equilibrium(&summary);
    if let Some(path) = &args.out {
        let file = File::create(path)?;
        serde_json::to_writer_pretty(BufWriter::new(file), &summary)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn perturbation(size: f64, seed: Option<u64>) -> PerturbationSpec {
    match seed {
        None => PerturbationSpec::uniform(size),
        Some(seed) => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            // Random direction on the perturbed slots, rejection-sampled to
            // avoid the corner bias of the cube.
            let dir = loop {
                let v: [f64; 4] = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ];
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.2 && norm <= 1.0 {
                    break [v[0] / norm, v[1] / norm, v[2] / norm, v[3] / norm];
                }
            };
            PerturbationSpec {
                delta_r: size * dir[0],
                delta_gamma: size * dir[1],
                delta_r_dot: size * dir[2],
                delta_chi_dot: size * dir[3],
            }
        }
    }
}

fn run_experiment(
    params: &ModelParams,
    method: Method,
    t_end: f64,
    record_interval: f64,
    perturb: f64,
    seed: Option<u64>,
) -> Result<(Equilibrium, ConvergenceReport)> {
    let eq = find_equilibrium(params)?;
    let mut opts = SimOptions::new(method, t_end);
    opts.record_interval = record_interval;
    let report = lasalle_experiment(
        params,
        &eq,
        &perturbation(perturb, seed),
        &opts,
        &LasalleThresholds::default(),
    )?;
    Ok((eq, report))
}

fn simulate_cmd(args: &SimulateArgs) -> Result<()> {
    let params = args.model.load()?;
    let method = match args.method {
        MethodArg::Adaptive => Method::DormandPrince {
            rtol: args.rtol,
            atol: args.atol,
        },
        MethodArg::Midpoint => Method::ImplicitMidpoint { dt: args.dt },
    };
    let (_, report) = run_experiment(
        &params,
        method,
        args.t_end,
        args.record_interval,
        args.perturb,
        args.seed,
    )?;
    let record = &report.record;
    match &args.out {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            record.write_csv(&mut out)?;
            out.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            record.write_csv(&mut out)?;
            out.flush()?;
        }
    }
    eprintln!(
        "status {:?}, {} samples, {} steps (+{} rejected), final manifold distance {:.3e}",
        record.status,
        record.len(),
        record.steps_accepted,
        record.steps_rejected,
        report.final_manifold_distance
    );
    Ok(())
}

fn verify_cmd(args: &VerifyArgs) -> Result<()> {
    let params = args.model.load()?;
    if params.dissipation.is_none() {
        return Err(Error::Config(
            "verify needs a dissipative model; pass --eta or a config with friction".into(),
        ));
    }
    let (_, report) = run_experiment(
        &params,
        Method::DormandPrince {
            rtol: 1e-9,
            atol: 1e-12,
        },
        args.t_end,
        1.0,
        args.perturb,
        args.seed,
    )?;
    print_report(&report)?;
    Ok(())
}

/// Print one pass/fail line per convergence criterion; error on failure.
fn print_report(report: &ConvergenceReport) -> Result<()> {
    let th = &report.thresholds;
    println!(
        "initial manifold distance {:.6e}",
        report.initial_manifold_distance
    );
    let mut all = check_line(
        "energy monotone",
        report.energy_monotone,
        &format!(
            "max per-step increase {:.3e} (threshold {:.1e} of scale)",
            report.max_energy_increase, th.energy_step
        ),
    )
    .is_ok();
    all &= check_line(
        "manifold convergence",
        report.manifold_converged,
        &format!(
            "final distance {:.3e} (threshold {:.1e})",
            report.final_manifold_distance, th.manifold_distance
        ),
    )
    .is_ok();
    all &= check_line(
        "orientation lock",
        report.gamma_converged,
        &format!(
            "final gamma {:.3e} (threshold {:.1e})",
            report.final_gamma, th.gamma
        ),
    )
    .is_ok();
    all &= check_line(
        "circularization",
        report.eccentricity_converged,
        &format!(
            "final eccentricity {:.3e} (threshold {:.1e})",
            report.final_eccentricity, th.eccentricity
        ),
    )
    .is_ok();
    all &= check_line(
        "internal rest",
        report.internal_speeds_converged,
        &format!(
            "final internal speed {:.3e} (threshold {:.1e})",
            report.final_internal_speed, th.internal_speed
        ),
    )
    .is_ok();
    match report.verdict {
        Verdict::Pass => {
            println!("verdict: PASS");
            Ok(())
        }
        Verdict::Fail => {
            println!("verdict: FAIL");
            debug_assert!(!all);
            Err(Error::Verification("convergence experiment failed".into()))
        }
        Verdict::Inconclusive => {
            println!("verdict: INCONCLUSIVE (run did not complete)");
            Err(Error::Verification(format!(
                "experiment inconclusive: {:?}",
                report.record.status
            )))
        }
    }
}

fn sweep_cmd(args: &SweepArgs) -> Result<()> {
    let base = args.model.load()?;
    if args.epsilons.is_empty() {
        return Err(Error::Config("sweep needs at least one stiffness".into()));
    }
    // Solve each branch point in its own thread; order is preserved.
    let results: Vec<Result<Equilibrium>> = std::thread::scope(|scope| {
        let handles: Vec<_> = args
            .epsilons
            .iter()
            .map(|&eps| {
                let base = &base;
                scope.spawn(move || {
                    let mut params = base.clone();
                    params.elastic = params.elastic.with_epsilon(eps)?;
                    find_equilibrium(&params)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let n = base.elastic.n();
    let mut header: Vec<String> = vec![
        "epsilon".into(),
        "R".into(),
        "J1".into(),
        "J2".into(),
        "J3".into(),
    ];
    for j in 0..n {
        header.push(format!("z{}", j + 1));
    }
    header.extend(["rate", "residual", "min_hessian_eig"].map(String::from));
    let mut lines = vec![header.join(",")];
    for (eps, res) in args.epsilons.iter().zip(results) {
        let eq = res.map_err(|e| {
            Error::Verification(format!("branch point epsilon = {eps:.3e} failed: {e}"))
        })?;
        let mut row = vec![
            format!("{eps:.16e}"),
            format!("{:.16e}", eq.r_bar),
            format!("{:.16e}", eq.j_bar[0]),
            format!("{:.16e}", eq.j_bar[1]),
            format!("{:.16e}", eq.j_bar[2]),
        ];
        for z in eq.z_bar.iter() {
            row.push(format!("{z:.16e}"));
        }
        row.push(format!("{:.16e}", eq.mean_motion(&base.gravity)));
        row.push(format!("{:.3e}", eq.residual_norm));
        let min_eig = eq
            .transversal_hessian_eigs
            .first()
            .copied()
            .unwrap_or(f64::NAN);
        row.push(format!("{min_eig:.16e}"));
        lines.push(row.join(","));
    }
    let text = lines.join("\n") + "\n";
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text)?;
            println!("wrote {} branch points to {}", args.epsilons.len(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
