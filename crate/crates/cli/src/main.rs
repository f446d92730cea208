use clap::{Args, Parser, Subcommand};
use qtree::circuits::{build_gate_circuit, export_qasm, qasm_file_name, Variant};
use qtree::decoder::decode_record;
use qtree::estimator::estimate_from_records;
use qtree::pool::{parse_grid, pool_run_with, Resampling};
use qtree::sampler::{sample_shots, Backend, DEFAULT_MAX_DEPTH};
use qtree::theory::{find_critical_point_in, front_velocity, scaling_fit, velocity};
use qtree::tree::{parse_instances, parse_records, write_instances, write_records, InstanceSet, RecordLine};
use qtree_cli::plot::render;
use qtree_cli::table::{
    curve_line, estimate_line, parse_curves, parse_estimates, CurveRow, EstimateRow, CURVE_COLUMNS, ESTIMATE_COLUMNS,
};
use qtree_cli::Provenance;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

type CliResult<T> = Result<T, String>;

#[derive(Parser)]
#[command(name = "qtree", version, about = "Monitored quantum trees: sampling, decoding, pool curves and linearized theory")]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "QTREE_WORKERS")]
    workers: Option<usize>,
    /// Omit the timestamp from output headers.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample measurement records from random tree circuits.
    Simulate(SimulateArgs),
    /// Decode records into Bloch vectors of the root qubit.
    Decode(DecodeArgs),
    /// Estimate Z for every depth up to the recorded one.
    Estimate(EstimateArgs),
    /// Order-parameter curves from the pool method.
    Pool(PoolArgs),
    /// Critical point of the linearized recursion.
    Critical(CriticalArgs),
    /// Linearized front velocity.
    Velocity(VelocityArgs),
    /// Fit of -ln Z_typ ~ t^a on a pool curve.
    Scaling(ScalingArgs),
    /// Write gate-level circuits as OpenQASM 2.0.
    ExportQasm(ExportArgs),
    /// Render curves and estimates as SVG.
    Plot(PlotArgs),
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    t: Option<u32>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 100)]
    n_circuits: u64,
    #[arg(long, default_value_t = 100)]
    n_shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// statevector or branch.
    #[arg(long, default_value = "branch")]
    backend: String,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    max_depth: u32,
    /// Existing instance file; replaces --t, --theta and --n-circuits.
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Where to write the generated instances.
    #[arg(long)]
    instances_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct DecodeArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EstimateArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct PoolArgs {
    /// start:stop:count, inclusive, in radians.
    #[arg(long)]
    theta_grid: String,
    #[arg(long)]
    t_max: u32,
    #[arg(long, default_value_t = 100_000)]
    pool_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// with-replacement or distinct-pair.
    #[arg(long, default_value = "with-replacement")]
    resampling: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct CriticalArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 10_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    lo: f64,
    #[arg(long, default_value_t = std::f64::consts::PI)]
    hi: f64,
    /// Also write the result as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct VelocityArgs {
    #[arg(long)]
    theta: f64,
    /// Fixed λ; without it the minimum over λ ≤ 1 is reported.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct ScalingArgs {
    #[arg(long)]
    curves: PathBuf,
    #[arg(long)]
    theta: f64,
    #[arg(long, default_value_t = 50)]
    t_min: u32,
    #[arg(long)]
    t_max: Option<u32>,
}

#[derive(Args, Serialize)]
struct ExportArgs {
    #[arg(long)]
    t: Option<u32>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    n_circuits: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Weak-measurement ancillas.
    #[arg(long, default_value_t = 1)]
    l: usize,
    /// standard or native.
    #[arg(long, default_value = "standard")]
    variant: String,
    #[arg(long)]
    instances: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Serialize)]
struct PlotArgs {
    #[arg(long)]
    curves: PathBuf,
    #[arg(long)]
    estimates: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "")]
    title: String,
}

fn provenance<T: Serialize>(command: &str, args: &T, cli: &Cli) -> Provenance {
    let config = serde_json::to_value(args).unwrap_or(serde_json::Value::Null);
    Provenance::new(command, config, !cli.no_timestamp)
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> CliResult<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_instances(path: &Path) -> CliResult<InstanceSet> {
    parse_instances(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_records(path: &Path) -> CliResult<Vec<RecordLine>> {
    parse_records(&read(path)?).map(|(_, r)| r).map_err(|e| format!("{}: {e}", path.display()))
}

fn io<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn simulate(a: &SimulateArgs, cli: &Cli) -> CliResult<()> {
    let p = provenance("simulate", a, cli);
    let backend: Backend = a.backend.parse().map_err(io)?;
    let mut set = match &a.instances {
        Some(path) => load_instances(path)?,
        None => {
            let (t, theta) = a.t.zip(a.theta).ok_or("--t and --theta are required without --instances")?;
            InstanceSet::generate(t, theta, a.seed, a.n_circuits).map_err(io)?
        }
    };
    if let Some(path) = &a.instances_out {
        set.producer = Some(p.to_json());
        let mut w = create(path)?;
        write_instances(&mut w, &set).map_err(io)?;
        w.flush().map_err(io)?;
    }
    let lines = set
        .circuits
        .par_iter()
        .map(|c| {
            let recs = sample_shots(&c.instance, c.id, a.n_shots, a.seed, backend, a.max_depth)?;
            Ok(recs.into_iter().enumerate().map(|(s, record)| RecordLine { circuit_id: c.id, shot: s as u64, record }).collect())
        })
        .collect::<qtree::Result<Vec<Vec<RecordLine>>>>()
        .map_err(io)?;
    let mut w = create(&a.out)?;
    write_records(&mut w, Some(&p.to_json()), &lines.concat()).map_err(io)?;
    w.flush().map_err(io)
}

fn decode(a: &DecodeArgs, cli: &Cli) -> CliResult<()> {
    let p = provenance("decode", a, cli);
    let set = load_instances(&a.instances)?;
    let records = load_records(&a.records)?;
    let rows = records
        .par_iter()
        .map(|r| {
            let inst = set.get(r.circuit_id).ok_or_else(|| format!("records reference unknown circuit {}", r.circuit_id))?;
            let d = decode_record(inst, &r.record).map_err(io)?;
            Ok(json!({"circuit_id": r.circuit_id, "shot": r.shot, "nx": d.n.nx, "ny": d.n.ny, "nz": d.n.nz, "z": d.z}))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut w = create(&a.out)?;
    writeln!(w, "{}", json!({"format_version": qtree::tree::FORMAT_VERSION, "producer": p.to_json()})).map_err(io)?;
    for r in rows {
        writeln!(w, "{r}").map_err(io)?;
    }
    w.flush().map_err(io)
}

fn estimate(a: &EstimateArgs, cli: &Cli) -> CliResult<()> {
    let p = provenance("estimate", a, cli);
    let set = load_instances(&a.instances)?;
    let records = load_records(&a.records)?;
    let results = estimate_from_records(&set, &records).map_err(io)?;
    let mut w = create(&a.out)?;
    write!(w, "{}{ESTIMATE_COLUMNS}\n", p.comment_header()).map_err(io)?;
    for r in results {
        let row = EstimateRow { t: r.t, theta: r.theta, z_hat: r.z_hat, se: r.se, n_circuits: r.n_circuits, n_shots: r.n_shots };
        writeln!(w, "{}", estimate_line(&row)).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn pool(a: &PoolArgs, cli: &Cli) -> CliResult<()> {
    let p = provenance("pool", a, cli);
    let grid = parse_grid(&a.theta_grid).map_err(io)?;
    let resampling = match a.resampling.as_str() {
        "with-replacement" => Resampling::WithReplacement,
        "distinct-pair" => Resampling::DistinctPair,
        other => return Err(format!("unknown resampling `{other}` (expected with-replacement or distinct-pair)")),
    };
    let mut w = create(&a.out)?;
    write!(w, "{}{CURVE_COLUMNS}\n", p.comment_header()).map_err(io)?;
    let mut failed = None;
    pool_run_with(&grid, a.t_max, a.pool_size, a.seed, resampling, |c| {
        let row = CurveRow { theta: c.theta, t: c.t, z_mean: c.z_mean, z_typ: c.z_typ, se: c.se, pool_size: c.pool_size };
        if let Err(e) = writeln!(w, "{}", curve_line(&row)) {
            failed.get_or_insert(e);
        }
    })
    .map_err(io)?;
    if let Some(e) = failed {
        return Err(e.to_string());
    }
    w.flush().map_err(io)
}

fn critical(a: &CriticalArgs, cli: &Cli) -> CliResult<()> {
    let p = provenance("critical", a, cli);
    let r = find_critical_point_in(a.lo, a.hi, a.lambda, a.samples, a.tol, a.seed).map_err(io)?;
    println!("theta_c = {:.6} ± {:.6} (95%)", r.theta_c, r.ci_halfwidth);
    println!("residual = {:e} ± {:e}, slope = {:.6}, evaluations = {}", r.residual, r.residual_se, r.slope, r.evaluations);
    if let Some(path) = &a.out {
        let doc = json!({
            "producer": p.to_json(),
            "theta_c": r.theta_c,
            "ci_halfwidth": r.ci_halfwidth,
            "residual": r.residual,
            "residual_se": r.residual_se,
            "slope": r.slope,
            "n_samples": r.n_samples,
        });
        let mut w = create(path)?;
        writeln!(w, "{}", serde_json::to_string_pretty(&doc).map_err(io)?).map_err(io)?;
        w.flush().map_err(io)?;
    }
    Ok(())
}

fn velocity_cmd(a: &VelocityArgs) -> CliResult<()> {
    match a.lambda {
        Some(lambda) => {
            let v = velocity(a.theta, lambda, a.samples, a.seed).map_err(io)?;
            println!("v(theta = {}, lambda = {lambda}) = {:.6} ± {:.6}", a.theta, v.v, v.mc_error);
        }
        None => {
            let f = front_velocity(a.theta, a.samples, a.seed).map_err(io)?;
            println!("v(theta = {}) = {:.6} ± {:.6} at lambda* = {:.4}", a.theta, f.v, f.mc_error, f.lambda_star);
        }
    }
    Ok(())
}

fn scaling(a: &ScalingArgs) -> CliResult<()> {
    let curves = parse_curves(&read(&a.curves)?).map_err(|e| format!("{}: {e}", a.curves.display()))?;
    let series: Vec<(f64, f64)> = curves
        .iter()
        .filter(|c| (c.theta - a.theta).abs() <= 1e-9 && c.t >= a.t_min && a.t_max.is_none_or(|m| c.t <= m))
        .map(|c| (c.t as f64, c.z_typ.ln()))
        .collect();
    if series.is_empty() {
        return Err(format!("no curve rows at theta = {} in the t window", a.theta));
    }
    let f = scaling_fit(&series).map_err(io)?;
    println!("exponent = {:.4} ± {:.4} over {} points (rms residual {:.2e})", f.slope, f.slope_stderr, f.n_points, f.rms_residual);
    Ok(())
}

fn export(a: &ExportArgs) -> CliResult<()> {
    let variant: Variant = a.variant.parse().map_err(io)?;
    let set = match &a.instances {
        Some(path) => load_instances(path)?,
        None => {
            let (t, theta) = a.t.zip(a.theta).ok_or("--t and --theta are required without --instances")?;
            InstanceSet::generate(t, theta, a.seed, a.n_circuits).map_err(io)?
        }
    };
    fs::create_dir_all(&a.out_dir).map_err(|e| format!("{}: {e}", a.out_dir.display()))?;
    for c in &set.circuits {
        let circuit = build_gate_circuit(&c.instance, a.l, variant).map_err(io)?;
        let path = a.out_dir.join(qasm_file_name(&circuit.meta));
        fs::write(&path, export_qasm(&circuit)).map_err(|e| format!("{}: {e}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn plot(a: &PlotArgs, cli: &Cli) -> CliResult<()> {
    let p = provenance("plot", a, cli);
    let curves = parse_curves(&read(&a.curves)?).map_err(|e| format!("{}: {e}", a.curves.display()))?;
    let estimates = match &a.estimates {
        Some(path) => parse_estimates(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?,
        None => Vec::new(),
    };
    let svg = render(&curves, &estimates, &a.title)?;
    let comment = format!("<!-- {} -->\n", p.to_json().to_string().replace("--", "- -"));
    let (head, body) = svg.split_once('\n').unwrap_or((&svg, ""));
    fs::write(&a.out, format!("{head}\n{comment}{body}")).map_err(|e| format!("{}: {e}", a.out.display()))
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err("--workers must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(io)?;
    }
    match &cli.command {
        Command::Simulate(a) => simulate(a, cli),
        Command::Decode(a) => decode(a, cli),
        Command::Estimate(a) => estimate(a, cli),
        Command::Pool(a) => pool(a, cli),
        Command::Critical(a) => critical(a, cli),
        Command::Velocity(a) => velocity_cmd(a),
        Command::Scaling(a) => scaling(a),
        Command::ExportQasm(a) => export(a),
        Command::Plot(a) => plot(a, cli),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("qtree: {msg}");
            ExitCode::from(1)
        }
    }
}
