use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use qudit_cnot::cavity::{cooperativity, reflection_steady_state_oracle, CavityParams, PhysicalParams};
use qudit_cnot::circuit::{builtin_paper_circuit, parse_circuit_bytes, Circuit};
use qudit_cnot::metrics::{
    self, builtin_calibration, conversion_matrix, ideal_cnot44, min_conversion, r_grid, ConversionConvention,
};
use qudit_cnot::protocol::{gate_action, run_protocol, verify, CHECKPOINT_TOL};
use qudit_cnot::report::protocol_json;
use qudit_cnot::state::{QuditAmplitudes, Spin, SpinConfig};

/// Simulator for a photon-mediated CNOT between two four-level qudits.
///
/// Qudit amplitudes are always given from the highest level down:
/// `a1,a2,a3,a4` means a1|3> + a2|2> + a3|1> + a4|0>.
#[derive(Parser)]
#[command(name = "qudit-cnot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every stage of the circuit against the analytic states and the
    /// feed-forward and truth-table fixtures (ideal reflections).
    Verify(VerifyArgs),
    /// Probability of the correct output for each of the 16 basis inputs.
    TruthTable(TruthTableArgs),
    /// Run one input through the circuit and write the JSON report.
    Simulate(SimulateArgs),
    /// Efficiency, fidelity and minimum conversion over a grid of r.
    Sweep(SweepArgs),
    /// Cavity reflection coefficients from the closed form and from the
    /// steady-state equations of motion.
    Reflection(ReflectionArgs),
}

#[derive(Args)]
struct CircuitArg {
    /// Netlist file; the built-in CNOT circuit when omitted.
    #[arg(long)]
    circuit: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    circuit: CircuitArg,
    /// Reflection amplitude (r↓ = r, r↑ = −r). Checkpoints exist only at
    /// r = 1; any other value prints the gate metrics instead.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Number of random inputs besides the uniform one.
    #[arg(long, default_value_t = 128)]
    trials: usize,
}

#[derive(Args)]
struct TruthTableArgs {
    #[command(flatten)]
    circuit: CircuitArg,
    /// Reflection amplitude in [0, 1] (r↓ = r, r↑ = −r).
    #[arg(long)]
    r: f64,
    /// Print the full 16×16 conversion matrix as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    circuit: CircuitArg,
    /// Reflection coefficient for spin down, e.g. `0.98` or `0.9+0.1i`.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    r_down: String,
    /// Reflection coefficient for spin up.
    #[arg(long, default_value = "-1", allow_hyphen_values = true)]
    r_up: String,
    /// Control amplitudes a1,a2,a3,a4 for |3>,|2>,|1>,|0>.
    #[arg(long, allow_hyphen_values = true)]
    control: String,
    /// Target amplitudes g1,g2,g3,g4 for |3>,|2>,|1>,|0>.
    #[arg(long, allow_hyphen_values = true)]
    target: String,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    circuit: CircuitArg,
    #[arg(long)]
    r_min: f64,
    #[arg(long)]
    r_max: f64,
    /// Number of grid points, endpoints included.
    #[arg(long)]
    steps: usize,
    /// CSV output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReflectionArgs {
    /// Cooperativity.
    #[arg(long = "C", conflicts_with_all = ["g", "gamma", "kappa"])]
    cooperativity: Option<f64>,
    /// Spin-up detuning in units of γ/2.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta_up: f64,
    /// Spin-down detuning in units of γ/2.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta_down: f64,
    /// Cavity detuning in units of κ/2.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    delta_c: f64,
    /// Spin–cavity coupling.
    #[arg(long, requires_all = ["gamma", "kappa"])]
    g: Option<f64>,
    /// Spin decay rate.
    #[arg(long)]
    gamma: Option<f64>,
    /// Cavity decay rate.
    #[arg(long)]
    kappa: Option<f64>,
    /// Cavity frequency relative to the photon.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    omega_c: f64,
    /// Spin-down transition frequency relative to the photon.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    omega_down: f64,
    /// Spin-up transition frequency relative to the photon.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    omega_up: f64,
    /// Read the physical rates and frequencies as multiples of 2π GHz.
    #[arg(long)]
    two_pi_ghz: bool,
}

/// Failure kinds mapped onto exit codes.
enum Failure {
    /// A check ran and did not pass.
    Check(anyhow::Error),
    /// Bad input: flags, files, netlists, parameters.
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::TruthTable(a) => cmd_truth_table(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Reflection(a) => cmd_reflection(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_circuit(arg: &CircuitArg) -> anyhow::Result<Circuit> {
    let Some(path) = &arg.circuit else {
        return Ok(builtin_paper_circuit());
    };
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_circuit_bytes(&bytes).map_err(|diags| {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}:{d}", path.display())).collect();
        anyhow!("{} does not parse\n{}", path.display(), lines.join("\n"))
    })
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => io::stdout()
            .write_all(text.as_bytes())
            .context("writing to standard output"),
    }
}

fn check_r(r: f64) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&r) {
        bail!("--r must be in [0, 1], got {r}");
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    let circuit = load_circuit(&a.circuit)?;
    check_r(a.r)?;
    if a.r != 1.0 {
        println!("checkpoints skipped: they are defined only for r = 1");
        let cal = builtin_calibration();
        let m = metrics::evaluate(&circuit, a.r, &cal.definition).map_err(anyhow::Error::from)?;
        println!("r               {:.6}", m.r);
        println!("efficiency      {:.6}  ({})", m.efficiency, cal.definition.efficiency_set);
        println!("fidelity        {:.6}  ({})", m.fidelity, cal.definition.fidelity_set);
        println!("min conversion  {:.6}", m.min_conversion);
        return Ok(());
    }
    let report = verify(&circuit, a.trials, 0x00c0_ffee).map_err(|e| Failure::Check(e.into()))?;
    let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
    println!("{} inputs, tolerance {CHECKPOINT_TOL:.0e}", report.trials);
    for (stage, d) in report.stage_max.iter().enumerate() {
        println!("stage {stage}: max distance {d:.3e}  {}", mark(*d < CHECKPOINT_TOL));
    }
    println!(
        "feed-forward: max distance {:.3e}  {}",
        report.feed_forward_max,
        mark(report.feed_forward_max < CHECKPOINT_TOL)
    );
    println!(
        "truth table: max error {:.3e}  {}",
        report.truth_table_max_error,
        mark(report.truth_table_max_error < CHECKPOINT_TOL)
    );
    println!(
        "branch probabilities: max |sum - 1| {:.3e}  {}",
        report.norm_max_error,
        mark(report.norm_max_error < 1e-12)
    );
    println!("{}/7 checkpoints pass", report.stages_passed());
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .stage_max
            .iter()
            .enumerate()
            .filter(|(_, d)| **d >= CHECKPOINT_TOL)
            .map(|(s, _)| s.to_string())
            .collect();
        if failed.is_empty() {
            Err(Failure::Check(anyhow!("verification failed")))
        } else {
            Err(Failure::Check(anyhow!("verification failed at stage {}", failed.join(", "))))
        }
    }
}

fn cmd_truth_table(a: TruthTableArgs) -> Result<(), Failure> {
    let circuit = load_circuit(&a.circuit)?;
    check_r(a.r)?;
    let convention = builtin_calibration().definition.conversion;
    let runs = gate_action(&circuit, &[CavityParams::symmetric(a.r); 4]).map_err(anyhow::Error::from)?;
    let matrix = conversion_matrix(&runs);
    let min = min_conversion(&matrix, convention);
    if a.json {
        let v = serde_json::json!({
            "r": a.r,
            "convention": convention,
            "matrix": matrix,
            "min_conversion": min,
        });
        println!("{}", serde_json::to_string_pretty(&v).context("encoding JSON")?);
        return Ok(());
    }
    println!("input     ideal     probability");
    for (i, row) in matrix.iter().enumerate() {
        let cfg = SpinConfig::from_index(i);
        let (c, t) = ideal_cnot44(cfg.control(), cfg.target());
        let hit = row[SpinConfig::from_qudits(c, t).index()];
        let p = match convention {
            ConversionConvention::LossInclusive => hit,
            ConversionConvention::DetectionConditioned => hit / row.iter().sum::<f64>(),
        };
        println!("|{},{}>     |{c},{t}>     {p:.4}", cfg.control(), cfg.target());
    }
    println!("minimum   {min:.4}");
    Ok(())
}

fn parse_complex(s: &str) -> anyhow::Result<Complex64> {
    let t = s.trim();
    t.parse::<Complex64>()
        .map_err(|_| anyhow!("`{t}` is not a complex number"))
}

fn parse_qudit(flag: &str, s: &str) -> anyhow::Result<QuditAmplitudes> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        bail!("--{flag} needs four comma-separated amplitudes, got {}", parts.len());
    }
    let mut amps = [Complex64::new(0.0, 0.0); 4];
    for (a, p) in amps.iter_mut().zip(&parts) {
        *a = parse_complex(p).with_context(|| format!("--{flag}"))?;
    }
    let q = QuditAmplitudes::from_descending(amps);
    let norm_sq = q.norm_sq();
    if (norm_sq - 1.0).abs() > 1e-6 {
        eprintln!("warning: --{flag} has squared norm {norm_sq}; renormalized");
    }
    q.normalized()
        .ok_or_else(|| anyhow!("--{flag} amplitudes are all zero"))
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Failure> {
    let circuit = load_circuit(&a.circuit)?;
    let r_down = parse_complex(&a.r_down).context("--r-down")?;
    let r_up = parse_complex(&a.r_up).context("--r-up")?;
    let control = parse_qudit("control", &a.control)?;
    let target = parse_qudit("target", &a.target)?;
    let params = [CavityParams::with_reflections(r_down, r_up); 4];
    let result = run_protocol(&circuit, &params, &control, &target).map_err(anyhow::Error::from)?;
    let text = serde_json::to_string_pretty(&protocol_json(&result)).context("encoding JSON")?;
    write_output(a.out.as_deref(), &(text + "\n"))?;
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let circuit = load_circuit(&a.circuit)?;
    let grid = r_grid(a.r_min, a.r_max, a.steps).map_err(anyhow::Error::from)?;
    let def = builtin_calibration().definition;
    let rows = metrics::sweep(&grid, &circuit, &def).map_err(anyhow::Error::from)?;
    let mut buf = Vec::new();
    metrics::write_sweep_csv(&rows, &mut buf).map_err(anyhow::Error::from)?;
    write_output(a.out.as_deref(), &String::from_utf8(buf).context("CSV encoding")?)?;
    Ok(())
}

fn cmd_reflection(a: ReflectionArgs) -> Result<(), Failure> {
    let physical = match (a.g, a.gamma, a.kappa) {
        (Some(g), Some(gamma), Some(kappa)) => {
            let scale = if a.two_pi_ghz { 2.0 * std::f64::consts::PI } else { 1.0 };
            PhysicalParams {
                g: g * scale,
                kappa: kappa * scale,
                gamma: gamma * scale,
                omega: 0.0,
                omega_c: a.omega_c * scale,
                omega_down: a.omega_down * scale,
                omega_up: a.omega_up * scale,
            }
        }
        (None, None, None) => {
            let c = a
                .cooperativity
                .ok_or_else(|| anyhow!("give either --C or all of --g, --gamma, --kappa"))?;
            let p = CavityParams::new(c, a.delta_down, a.delta_up, a.delta_c).map_err(anyhow::Error::from)?;
            PhysicalParams::from_dimensionless(&p).map_err(anyhow::Error::from)?
        }
        _ => return Err(anyhow!("--g, --gamma and --kappa must be given together").into()),
    };
    let params = physical.to_cavity_params().map_err(anyhow::Error::from)?;
    println!("C         {:.6}", cooperativity(&physical));
    println!(
        "detuning  down {:.6}  up {:.6}  cavity {:.6}",
        params.delta_down, params.delta_up, params.delta_c
    );
    println!("          formula                    steady state               |r|");
    for (name, spin) in [("r_down", Spin::Down), ("r_up", Spin::Up)] {
        let f = qudit_cnot::cavity::reflection_coefficient(&params, spin).map_err(anyhow::Error::from)?;
        let o = reflection_steady_state_oracle(&physical, spin).map_err(anyhow::Error::from)?;
        println!(
            "{name:<8}  {:>+.6} {:>+.6}i     {:>+.6} {:>+.6}i     {:.6}",
            f.re,
            f.im,
            o.re,
            o.im,
            f.norm()
        );
    }
    Ok(())
}
