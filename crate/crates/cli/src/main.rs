use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use szego_cli::eval::{self, parse_complex, parse_complex_list, parse_reals, ThetaArgs};
use szego_cli::freeze::{freeze, DEFAULT_ORACLE_MULTIPLIER};
use szego_cli::spec::{env_policy, read_json, CurveKind, PolicySpec, RunSpec};
use szego_cli::{all_passed, verify, write_json, CliError, EXIT_FAILED, EXIT_PASS};
use szego_core::identities::JsonComplex;

#[derive(Parser)]
#[command(name = "szego", version, about = "Theta functions, prime forms and Szegő kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a single quantity and print it as JSON.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run the verification suites selected by a run spec.
    Verify {
        spec: PathBuf,
        /// Report path; overrides the spec's `output`. Default: stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Recompute regression fixtures in oracle mode.
    FreezeFixtures {
        spec: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Multiplier applied to the oracle's lattice radius.
        #[arg(long, default_value_t = DEFAULT_ORACLE_MULTIPLIER)]
        oracle_radius: usize,
        #[command(flatten)]
        policy: PolicyArgs,
    },
}

#[derive(Args, Clone, Default)]
struct PolicyArgs {
    #[arg(long)]
    theta_tolerance: Option<f64>,
    #[arg(long)]
    max_radius: Option<usize>,
    #[arg(long)]
    ring_radius: Option<f64>,
    #[arg(long)]
    contour_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl PolicyArgs {
    fn spec(&self) -> PolicySpec {
        PolicySpec {
            theta_tolerance: self.theta_tolerance,
            max_radius: self.max_radius,
            ring_radius: self.ring_radius,
            contour_samples: self.contour_samples,
            seed: self.seed,
        }
    }
}

#[derive(Clone)]
struct ComplexList(Vec<Complex64>);

fn complex_list(s: &str) -> Result<ComplexList, String> {
    parse_complex_list(s).map(ComplexList)
}

#[derive(Clone)]
struct Reals(Vec<f64>);

fn reals(s: &str) -> Result<Reals, String> {
    parse_reals(s).map(Reals)
}

fn index_pair(s: &str) -> Result<(usize, usize), String> {
    match s.split(',').map(|p| p.trim().parse::<usize>()).collect::<Result<Vec<_>, _>>() {
        Ok(v) if v.len() == 2 => Ok((v[0], v[1])),
        _ => Err(format!("expected j,k but got {s:?}")),
    }
}

#[derive(Clone)]
struct Orders(Vec<usize>);

fn orders(s: &str) -> Result<Orders, String> {
    s.split(',').map(|p| p.trim().parse::<usize>().map_err(|_| format!("invalid order {p:?}"))).collect::<Result<_, _>>().map(Orders)
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Theta with characteristic; prints {"re","im"}.
    Theta {
        /// Row-major entries of tau, `re,im` separated by `;`.
        #[arg(long, value_parser = complex_list, allow_hyphen_values = true)]
        tau: ComplexList,
        #[arg(long, value_parser = complex_list, allow_hyphen_values = true)]
        z: ComplexList,
        /// Characteristic `a` as reals in {0, 1/2}, separated by `,`.
        #[arg(long, value_parser = reals)]
        a: Option<Reals>,
        #[arg(long, value_parser = reals)]
        b: Option<Reals>,
        /// Derivative orders in each z coordinate, separated by `,`.
        #[arg(long, value_parser = orders)]
        dz: Option<Orders>,
        /// Differentiate once in tau_jk.
        #[arg(long, value_parser = index_pair)]
        dtau: Option<(usize, usize)>,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Prime form E(x, y).
    PrimeForm(PointArgs),
    /// Szegő kernel s(x, y); one value per bundle component.
    Szego(PointArgs),
    /// Coefficients c_{-1}, c_0, c_1 of s(x, x + u) at u = 0.
    Expansion {
        #[command(flatten)]
        curve: CurveArgs,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        x: Complex64,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: Option<Complex64>,
        #[command(flatten)]
        policy: PolicyArgs,
    },
}

#[derive(Args, Clone)]
struct CurveArgs {
    #[arg(long, value_enum, default_value = "torus")]
    curve: CurveArg,
    #[arg(long, value_parser = complex_list, allow_hyphen_values = true)]
    tau: Option<ComplexList>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CurveArg {
    Sphere,
    Torus,
}

impl CurveArgs {
    fn model(&self) -> Result<szego_core::curves::CurveModel, CliError> {
        let kind = match self.curve {
            CurveArg::Sphere => CurveKind::Sphere,
            CurveArg::Torus => CurveKind::Torus,
        };
        eval::curve(kind, self.tau.as_ref().map(|t| t.0.as_slice()))
    }
}

#[derive(Args, Clone)]
struct PointArgs {
    #[command(flatten)]
    curve: CurveArgs,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    x: Complex64,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    y: Complex64,
    /// Bundle components, separated by `;`. Default: the trivial bundle.
    #[arg(long, value_parser = complex_list, allow_hyphen_values = true)]
    z: Option<ComplexList>,
    #[command(flatten)]
    policy: PolicyArgs,
}

fn policy(args: &PolicyArgs) -> Result<szego_cli::spec::Policy, CliError> {
    args.spec().over(env_policy()?).resolve()
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string(value).map_err(|e| CliError::Output { path: "stdout".into(), message: e.to_string() })?;
    println!("{text}");
    Ok(())
}

fn run_eval(cmd: EvalCommand) -> Result<i32, CliError> {
    match cmd {
        EvalCommand::Theta { tau, z, a, b, dz, dtau, policy: p } => {
            let args = ThetaArgs { tau: tau.0, z: z.0, a: a.map(|v| v.0), b: b.map(|v| v.0), dz: dz.map(|d| d.0), dtau };
            let v = eval::eval_theta(&args, &policy(&p)?)?;
            print_json(&JsonComplex::from(v))?;
        }
        EvalCommand::PrimeForm(args) => {
            let v = eval::eval_prime_form(&args.curve.model()?, args.x, args.y, &policy(&args.policy)?)?;
            print_json(&JsonComplex::from(v))?;
        }
        EvalCommand::Szego(args) => {
            let zs = args.z.map(|z| z.0).unwrap_or_default();
            let v = eval::eval_szego(&args.curve.model()?, &zs, args.x, args.y, &policy(&args.policy)?)?;
            let out: Vec<JsonComplex> = v.into_iter().map(JsonComplex::from).collect();
            if out.len() == 1 {
                print_json(&out[0])?;
            } else {
                print_json(&out)?;
            }
        }
        EvalCommand::Expansion { curve, x, z, policy: p } => {
            print_json(&eval::eval_expansion(&curve.model()?, z, x, &policy(&p)?)?)?;
        }
    }
    Ok(EXIT_PASS)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Eval(cmd) => run_eval(cmd),
        Command::Verify { spec, output, policy } => {
            let run_spec: RunSpec = read_json(&spec)?;
            let entries = verify(&run_spec, policy.spec())?;
            match output.or(run_spec.output) {
                Some(path) => write_json(&entries, &path)?,
                None => print_json(&entries)?,
            }
            Ok(if all_passed(&entries) { EXIT_PASS } else { EXIT_FAILED })
        }
        Command::FreezeFixtures { spec, output, oracle_radius, policy } => {
            let run_spec: RunSpec = read_json(&spec)?;
            let seed = policy.spec().over(run_spec.policy.over(env_policy()?)).resolve()?.seed;
            let date = chrono::Utc::now().format("%Y-%m-%d").to_string();
            let file = freeze(&run_spec, oracle_radius, seed, date)?;
            match output {
                Some(path) => write_json(&file, &path)?,
                None => print_json(&file)?,
            }
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
