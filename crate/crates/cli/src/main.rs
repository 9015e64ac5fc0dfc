use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use deconv::asymptotics::{
    approximation_ratio, corrected_sd, edge_integral, ratio_curve, theoretical_sd, write_ratio_csv,
};
use deconv::bandwidth::mise_grid_search;
use deconv::config::StudyFile;
use deconv::simulation::{histogram_export, run_study, table_render, TableKind};
use deconv::{AsymptoticSpec, Error, ErrorModel, EstimatorConfig, GridSpec, Kernel, TargetDensity};

/// Deconvolution kernel density estimation under Gaussian measurement error.
#[derive(Debug, Parser)]
#[command(name = "deconv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the density of contaminated data on an FFT grid.
    Estimate(EstimateArgs),
    /// Exact MISE over h = 0.01, ..., 1.00 and its minimiser.
    Mise(MiseArgs),
    /// Theoretical and corrected standard deviations of the estimator.
    Asym(AsymArgs),
    /// Edge-integral approximation ratio over a range of bandwidths.
    Ratio(RatioArgs),
    /// Run the Monte Carlo studies described by a scenario file.
    Study(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Shared {
    /// Kernel: fan, sinc or wand.
    #[arg(long, default_value = "fan")]
    kernel: String,
    /// Standard deviation of the Gaussian error.
    #[arg(long, default_value_t = 0.4)]
    noise_sd: f64,
    /// Output file (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// One observation per line, or a CSV whose first column holds them.
    data: PathBuf,
    #[command(flatten)]
    shared: Shared,
    /// Bandwidth; required unless --target is given.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Pick the MISE-optimal bandwidth for this target: normal, chisq3 or mixture.
    #[arg(long)]
    target: Option<String>,
    /// Grid size, a power of two.
    #[arg(long, default_value_t = 1024)]
    points: usize,
    #[arg(long, requires = "hi", allow_hyphen_values = true)]
    lo: Option<f64>,
    #[arg(long, requires = "lo", allow_hyphen_values = true)]
    hi: Option<f64>,
}

#[derive(Debug, Args)]
struct MiseArgs {
    #[command(flatten)]
    shared: Shared,
    /// normal, chisq3 or mixture.
    #[arg(long)]
    target: String,
    #[arg(long)]
    n: usize,
}

#[derive(Debug, Args)]
struct AsymArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    bandwidth: f64,
    #[arg(long)]
    n: usize,
}

#[derive(Debug, Args)]
struct RatioArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long, default_value_t = 0.02)]
    h_min: f64,
    #[arg(long, default_value_t = 1.0)]
    h_max: f64,
    #[arg(long, default_value_t = 0.02)]
    h_step: f64,
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// Scenario file, TOML or JSON.
    config: PathBuf,
    /// Override every scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the report, tables and histograms.
    #[arg(long, default_value = "study-out")]
    out: PathBuf,
    /// Override every scenario's replication count.
    #[arg(long)]
    replications: Option<usize>,
}

enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Mise(a) => mise(a),
        Command::Asym(a) => asym(a),
        Command::Ratio(a) => ratio(a),
        Command::Study(a) => study(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn models(shared: &Shared) -> Result<(Kernel<f64>, ErrorModel<f64>), Failure> {
    Ok((
        Kernel::by_name(&shared.kernel)?,
        ErrorModel::gaussian(shared.noise_sd)?,
    ))
}

fn read_data(path: &Path) -> Result<Vec<f64>, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.split(',').next().unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => data.push(v),
            // a header line
            Err(_) if i == 0 => {}
            _ => {
                return Err(Failure::Usage(format!(
                    "{}:{}: not a finite number: `{field}`",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if data.is_empty() {
        return Err(Failure::Usage(format!(
            "{}: no observations",
            path.display()
        )));
    }
    Ok(data)
}

fn estimate(a: EstimateArgs) -> Outcome {
    let (kernel, noise) = models(&a.shared)?;
    let data = read_data(&a.data)?;
    let h = match (a.bandwidth, &a.target) {
        (Some(h), _) => h,
        (None, Some(t)) => {
            let target = TargetDensity::by_name(t)?;
            mise_grid_search(&kernel, &noise, &target, data.len())?.argmin_h
        }
        (None, None) => {
            return Err(Failure::Usage(
                "--bandwidth is required unless --target selects the MISE-optimal one".into(),
            ))
        }
    };
    let mut config = EstimatorConfig::new(kernel, noise, h)?;
    let grid = match (a.lo, a.hi) {
        (Some(lo), Some(hi)) => GridSpec::new(lo, hi, a.points)?,
        _ => GridSpec::around_data(&data, h, a.shared.noise_sd, a.points)?,
    };
    config = config.with_grid(grid);
    let est = config.estimate_grid_fft(&data)?;
    let mut out = output(a.shared.out.as_deref())?;
    match a.shared.format {
        Format::Csv => est.write_csv(&mut out)?,
        Format::Json => writeln!(out, "{}", est.to_json()?)?,
    }
    out.flush()?;
    Ok(())
}

fn mise(a: MiseArgs) -> Outcome {
    let (kernel, noise) = models(&a.shared)?;
    let target = TargetDensity::by_name(&a.target)?;
    let curve = mise_grid_search(&kernel, &noise, &target, a.n)?;
    let mut out = output(a.shared.out.as_deref())?;
    match a.shared.format {
        Format::Csv => curve.write_csv(&mut out)?,
        Format::Json => {
            let mise: Vec<Option<f64>> = curve
                .mise
                .iter()
                .map(|m| m.is_finite().then_some(*m))
                .collect();
            let doc = json!({ "h": curve.bandwidths, "mise": mise, "argmin_h": curve.argmin_h, "n": curve.n });
            writeln!(out, "{doc}")?;
        }
    }
    out.flush()?;
    if a.shared.out.is_some() {
        println!("argmin h = {}", curve.argmin_h);
    }
    Ok(())
}

fn asym(a: AsymArgs) -> Outcome {
    let (kernel, noise) = models(&a.shared)?;
    let spec = AsymptoticSpec::new(&kernel, &noise, a.bandwidth, a.n, 0.0)?;
    let rows = [
        ("theoretical_sd", theoretical_sd(&spec)?),
        (
            "corrected_sd",
            corrected_sd(&kernel, &noise, a.bandwidth, a.n)?,
        ),
        (
            "approximation_ratio",
            approximation_ratio(&kernel, &noise, a.bandwidth)?,
        ),
        (
            "edge_integral",
            edge_integral(&kernel, &noise, a.bandwidth)?,
        ),
    ];
    let mut out = output(a.shared.out.as_deref())?;
    match a.shared.format {
        Format::Csv => {
            writeln!(out, "quantity,value")?;
            for (name, v) in rows {
                writeln!(out, "{name},{v}")?;
            }
        }
        Format::Json => {
            let mut doc = serde_json::Map::new();
            doc.insert("h".into(), json!(a.bandwidth));
            doc.insert("n".into(), json!(a.n));
            for (name, v) in rows {
                doc.insert(name.into(), json!(v));
            }
            writeln!(out, "{}", serde_json::Value::Object(doc))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn ratio(a: RatioArgs) -> Outcome {
    if !(a.h_min > 0.0 && a.h_min < a.h_max && a.h_step > 0.0) {
        return Err(Failure::Usage(format!(
            "need 0 < --h-min < --h-max and --h-step > 0, got {}..{} step {}",
            a.h_min, a.h_max, a.h_step
        )));
    }
    let (kernel, noise) = models(&a.shared)?;
    let count = ((a.h_max - a.h_min) / a.h_step + 1e-9).floor() as usize;
    // rounded to the step's decimals so the h column prints cleanly
    let bandwidths: Vec<f64> = (0..=count)
        .map(|i| ((a.h_min + a.h_step * i as f64) * 1e12).round() / 1e12)
        .collect();
    let curve = ratio_curve(&kernel, &noise, &bandwidths);
    let mut out = output(a.shared.out.as_deref())?;
    match a.shared.format {
        Format::Csv => write_ratio_csv(&curve, &mut out)?,
        Format::Json => {
            let (h, r): (Vec<f64>, Vec<Option<f64>>) = curve.into_iter().unzip();
            writeln!(
                out,
                "{}",
                json!({ "kernel": kernel.name(), "h": h, "ratio": r })
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn table_name(kind: TableKind) -> &'static str {
    match kind {
        TableKind::Estimates => "estimates",
        TableKind::Fan(deconv::StatisticVariant::Plain) => "fan-plain",
        TableKind::Fan(deconv::StatisticVariant::SampleVariance) => "fan-sample-variance",
    }
}

fn study(a: StudyArgs) -> Outcome {
    let mut file = StudyFile::load(&a.config)?;
    if let Some(seed) = a.seed {
        file = file.with_seed(seed);
    }
    if let Some(r) = a.replications {
        if r == 0 {
            return Err(Failure::Usage("--replications must be at least 1".into()));
        }
        for s in &mut file.scenarios {
            s.replications = r;
        }
    }
    let stem = a
        .config
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("study")
        .to_string();
    fs::create_dir_all(&a.out)?;

    let mut reports = Vec::with_capacity(file.scenarios.len());
    for scenario in &file.scenarios {
        eprintln!(
            "running {} ({} replications)",
            scenario.label, scenario.replications
        );
        reports.push(run_study(scenario)?);
    }

    let json = serde_json::to_string_pretty(&reports).map_err(Error::from)?;
    fs::write(a.out.join(format!("{stem}.json")), json)?;

    if let Some(title) = &file.title {
        println!("{title}");
    }
    for &kind in &file.tables {
        let table = table_render(&reports, kind, file.row_label)?;
        fs::write(
            a.out.join(format!("{stem}_{}.csv", table_name(kind))),
            table.to_csv()?,
        )?;
        println!("[{}]", table_name(kind));
        print!("{}", table.to_text());
    }
    for (i, report) in reports.iter().enumerate() {
        for j in 0..report.points.len() {
            let hist = histogram_export(report, j, file.histogram_bins)?;
            let f = File::create(a.out.join(format!("{stem}_hist_{i}_{j}.csv")))?;
            hist.write_csv(BufWriter::new(f))?;
        }
    }
    Ok(())
}
