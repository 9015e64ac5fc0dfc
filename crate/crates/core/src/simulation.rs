//! Monte Carlo studies: repeated sampling from `g = f * k`, estimation at a
//! few points and the summaries behind the result tables and histograms.
//!
//! Replication `r` draws from `ChaCha8Rng::seed_from_u64(master_seed)` on
//! stream `r`, so a report is bit-identical for any thread count.

use std::fmt::Write as _;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    corrected_sd, cosine_variance_stat, fan_statistic_from_terms, theoretical_sd, AsymptoticSpec,
    StatisticVariant,
};
use crate::bandwidth::mise_grid_search;
use crate::estimator::{expected_estimate, EstimateGrid, EstimatorConfig, GridSpec};
use crate::targets::{nsr, sample_convolved};
use crate::{Error, ErrorModel, Kernel, Result, TargetDensity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BandwidthChoice {
    Fixed(f64),
    /// Minimiser of the exact MISE on `h = 0.01, …, 1.00`.
    MiseOptimal,
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    /// Row label in rendered tables.
    pub label: String,
    pub target: TargetDensity<f64>,
    pub noise: ErrorModel<f64>,
    pub kernel: Kernel<f64>,
    pub n: usize,
    pub replications: usize,
    pub bandwidth: BandwidthChoice,
    pub eval_points: Vec<f64>,
    pub master_seed: u64,
    /// Evaluate `f_nh` on the FFT grid (interpolated at the points) instead
    /// of by quadrature, and record the ISE of every replication.
    pub use_fft: bool,
    /// Fixed FFT grid; chosen per sample when `None`.
    pub grid: Option<GridSpec<f64>>,
}

impl StudyConfig {
    pub fn new(
        target: TargetDensity<f64>,
        noise: ErrorModel<f64>,
        n: usize,
        bandwidth: BandwidthChoice,
    ) -> Self {
        Self {
            label: target.name().to_string(),
            target,
            noise,
            kernel: Kernel::fan(),
            n,
            replications: 500,
            bandwidth,
            eval_points: vec![0.0, 0.92],
            master_seed: 0,
            use_fft: false,
            grid: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid("replications", "must be at least 1"));
        }
        if self.eval_points.is_empty() {
            return Err(Error::invalid("eval_points", "must not be empty"));
        }
        if self.n < 2 {
            return Err(Error::invalid(
                "n",
                format!("must be at least 2, got {}", self.n),
            ));
        }
        if let BandwidthChoice::Fixed(h) = self.bandwidth {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::invalid(
                    "bandwidth",
                    format!("must be positive, got {h}"),
                ));
            }
        }
        if let Some(x) = self.eval_points.iter().find(|x| !x.is_finite()) {
            return Err(Error::invalid(
                "eval_points",
                format!("non-finite point {x}"),
            ));
        }
        Ok(())
    }
}

/// Replication samples of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub mean: f64,
    /// Sample standard deviation, divisor `R - 1` (zero when `R = 1`).
    pub sd: f64,
    pub samples: Vec<f64>,
}

impl SampleSummary {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let r = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / r;
        let sd = if samples.len() > 1 {
            (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd, samples }
    }

    /// Standard error of the mean.
    pub fn mean_se(&self) -> f64 {
        self.sd / (self.samples.len() as f64).sqrt()
    }

    /// Large-sample standard error of the standard deviation,
    /// `sd · √((κ - 1) / (4R))` with the sample kurtosis `κ`.
    pub fn sd_se(&self) -> f64 {
        let r = self.samples.len() as f64;
        if self.sd == 0.0 {
            return 0.0;
        }
        let m4 = self
            .samples
            .iter()
            .map(|v| (v - self.mean).powi(4))
            .sum::<f64>()
            / r;
        let kurtosis = m4 / self.sd.powi(4);
        self.sd * ((kurtosis - 1.0).max(0.0) / (4.0 * r)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub x: f64,
    pub true_density: f64,
    /// `E f_nh(x)`, the centering of the fan statistic.
    pub expected_estimate: f64,
    pub estimate: SampleSummary,
    pub fan_plain: SampleSummary,
    pub fan_sample_variance: SampleSummary,
    pub cosine_variance: SampleSummary,
}

impl PointReport {
    pub fn fan(&self, variant: StatisticVariant) -> &SampleSummary {
        match variant {
            StatisticVariant::Plain => &self.fan_plain,
            StatisticVariant::SampleVariance => &self.fan_sample_variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub label: String,
    pub target: String,
    pub kernel: String,
    pub noise_sd: f64,
    pub n: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub bandwidth: f64,
    /// `None` when the formula overflows.
    pub theoretical_sd: Option<f64>,
    pub corrected_sd: Option<f64>,
    pub nsr: f64,
    pub points: Vec<PointReport>,
    /// Per-replication ISE on the FFT grid (FFT mode only).
    pub ise: Option<SampleSummary>,
    /// The first replication's estimate on the FFT grid (FFT mode only).
    pub example_curve: Option<Curve>,
}

impl StudyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Replication {
    estimates: Vec<f64>,
    fan_plain: Vec<f64>,
    fan_sample_variance: Vec<f64>,
    cosine: Vec<f64>,
    ise: Option<f64>,
    curve: Option<EstimateGrid<f64>>,
}

fn interpolate(grid: &EstimateGrid<f64>, x: f64) -> f64 {
    let pts = &grid.points;
    let (lo, hi) = (pts[0], pts[pts.len() - 1]);
    if x < lo || x > hi {
        return 0.0;
    }
    let step = (hi - lo) / (pts.len() - 1) as f64;
    let i = (((x - lo) / step).floor() as usize).min(pts.len() - 2);
    let frac = (x - pts[i]) / step;
    grid.values[i] * (1.0 - frac) + grid.values[i + 1] * frac
}

fn replicate(
    config: &StudyConfig,
    estimator: &EstimatorConfig<f64>,
    centering: &[f64],
    index: usize,
) -> Result<Replication> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(index as u64);
    let data = sample_convolved(&config.target, &config.noise, config.n, &mut rng)?;
    let h = estimator.bandwidth();

    let curve = if config.use_fft {
        Some(estimator.estimate_grid_fft(&data)?)
    } else {
        None
    };
    let ise = curve
        .as_ref()
        .map(|g| g.integrated_squared_error(|x| config.target.pdf(x)));

    let k = config.eval_points.len();
    let mut rep = Replication {
        estimates: Vec::with_capacity(k),
        fan_plain: Vec::with_capacity(k),
        fan_sample_variance: Vec::with_capacity(k),
        cosine: Vec::with_capacity(k),
        ise,
        curve: None,
    };
    for (&x, &c) in config.eval_points.iter().zip(centering) {
        let terms = estimator.kernel_terms(&data, x)?;
        let estimate = match &curve {
            Some(g) => interpolate(g, x),
            None => terms.iter().sum::<f64>() / terms.len() as f64,
        };
        rep.estimates.push(estimate);
        rep.fan_plain.push(fan_statistic_from_terms(
            &terms,
            c,
            StatisticVariant::Plain,
        )?);
        rep.fan_sample_variance.push(fan_statistic_from_terms(
            &terms,
            c,
            StatisticVariant::SampleVariance,
        )?);
        rep.cosine.push(cosine_variance_stat(&data, x, h)?);
    }
    if index == 0 {
        rep.curve = curve;
    }
    Ok(rep)
}

/// Bandwidth actually used by a study.
pub fn resolve_bandwidth(config: &StudyConfig) -> Result<f64> {
    match config.bandwidth {
        BandwidthChoice::Fixed(h) => Ok(h),
        BandwidthChoice::MiseOptimal => {
            Ok(mise_grid_search(&config.kernel, &config.noise, &config.target, config.n)?.argmin_h)
        }
    }
}

pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let h = resolve_bandwidth(config)?;
    let mut estimator = EstimatorConfig::new(config.kernel.clone(), config.noise.clone(), h)?;
    if let Some(grid) = config.grid {
        estimator = estimator.with_grid(grid);
    }
    estimator.check_overflow()?;

    let centering: Vec<f64> = config
        .eval_points
        .iter()
        .map(|&x| expected_estimate(&config.kernel, &config.target, h, x))
        .collect();

    let outcomes: Vec<Result<Replication>> = (0..config.replications)
        .into_par_iter()
        .map(|r| replicate(config, &estimator, &centering, r))
        .collect();
    let mut reps = Vec::with_capacity(outcomes.len());
    for (index, outcome) in outcomes.into_iter().enumerate() {
        reps.push(outcome.map_err(|e| Error::Replication {
            index,
            source: Box::new(e),
        })?);
    }

    let column = |i: usize, pick: fn(&Replication) -> &Vec<f64>| -> SampleSummary {
        SampleSummary::from_samples(reps.iter().map(|r| pick(r)[i]).collect())
    };
    let points = config
        .eval_points
        .iter()
        .enumerate()
        .map(|(i, &x)| PointReport {
            x,
            true_density: config.target.pdf(x),
            expected_estimate: centering[i],
            estimate: column(i, |r| &r.estimates),
            fan_plain: column(i, |r| &r.fan_plain),
            fan_sample_variance: column(i, |r| &r.fan_sample_variance),
            cosine_variance: column(i, |r| &r.cosine),
        })
        .collect();

    let ise = config
        .use_fft
        .then(|| SampleSummary::from_samples(reps.iter().filter_map(|r| r.ise).collect()));
    let example_curve = reps[0].curve.as_ref().map(|g| Curve {
        x: g.points.clone(),
        f: g.values.clone(),
    });

    let spec = AsymptoticSpec::new(
        &config.kernel,
        &config.noise,
        h,
        config.n,
        config.eval_points[0],
    )?;
    Ok(StudyReport {
        label: config.label.clone(),
        target: config.target.name().to_string(),
        kernel: config.kernel.name().to_string(),
        noise_sd: config.noise.sd(),
        n: config.n,
        replications: config.replications,
        master_seed: config.master_seed,
        bandwidth: h,
        theoretical_sd: theoretical_sd(&spec).ok(),
        corrected_sd: corrected_sd(&config.kernel, &config.noise, h, config.n).ok(),
        nsr: nsr(&config.target, &config.noise)?,
        points,
        ise,
        example_curve,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins spanning the samples; the last bin is closed.
    pub fn from_samples(samples: &[f64], bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::invalid(
                "bins",
                format!("need at least 2 bins, got {bins}"),
            ));
        }
        if samples.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            lo -= 0.5;
            hi += 0.5;
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for &v in samples {
            let i = (((v - lo) / width).floor() as usize).min(bins - 1);
            counts[i] += 1;
        }
        Ok(Self { edges, counts })
    }

    pub fn mode_bin(&self) -> usize {
        let max = *self.counts.iter().max().unwrap_or(&0);
        self.counts.iter().position(|&c| c == max).unwrap_or(0)
    }

    /// Columns `lower,upper,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lower", "upper", "count"])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([
                self.edges[i].to_string(),
                self.edges[i + 1].to_string(),
                c.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Histogram of the stored `f_nh(x)` samples at `point_index`.
pub fn histogram_export(
    report: &StudyReport,
    point_index: usize,
    bins: usize,
) -> Result<Histogram> {
    let point = report
        .points
        .get(point_index)
        .ok_or(Error::IndexOutOfRange {
            index: point_index,
            len: report.points.len(),
        })?;
    Histogram::from_samples(&point.estimate.samples, bins)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    /// `μ̂_i, σ̂_i` of `f_nh(x_i)` with `σ, σ̃`.
    Estimates,
    /// `μ̂_i, σ̂_i` of the self-normalised statistic.
    Fan(StatisticVariant),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowLabel {
    /// `f` column holding each study's label.
    #[default]
    Label,
    /// `n` column.
    SampleSize,
    /// `NSR` column, in percent.
    Nsr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Right-aligned columns, numbers rounded to four decimals.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = std::iter::once(self.header.clone())
            .chain(self.rows.iter().map(|r| {
                r.iter()
                    .map(|c| match c.parse::<f64>() {
                        Ok(v) if c.contains('.') || c.contains('e') => format!("{v:.4}"),
                        _ => c.clone(),
                    })
                    .collect()
            }))
            .collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| {
                cells
                    .iter()
                    .map(|r| r[j].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:>w$}"))
                .collect();
            let _ = writeln!(out, "{}", line.join("  "));
        }
        out
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per report. Columns: label, `h`, `μ̂_1..μ̂_k`, `σ̂_1..σ̂_k`, and
/// `σ, σ̃` for [`TableKind::Estimates`].
pub fn table_render(reports: &[StudyReport], kind: TableKind, label: RowLabel) -> Result<Table> {
    let first = reports
        .first()
        .ok_or(Error::invalid("reports", "nothing to render"))?;
    let k = first.points.len();
    if let Some(r) = reports.iter().find(|r| r.points.len() != k) {
        return Err(Error::invalid(
            "reports",
            format!("`{}` has {} points, expected {k}", r.label, r.points.len()),
        ));
    }
    let mut header = vec![match label {
        RowLabel::Label => "f".to_string(),
        RowLabel::SampleSize => "n".to_string(),
        RowLabel::Nsr => "NSR".to_string(),
    }];
    header.push("h".into());
    header.extend((1..=k).map(|i| format!("mu{i}")));
    header.extend((1..=k).map(|i| format!("sd{i}")));
    if kind == TableKind::Estimates {
        header.push("sigma".into());
        header.push("sigma_corrected".into());
    }

    let rows = reports
        .iter()
        .map(|r| {
            let summaries: Vec<&SampleSummary> = r
                .points
                .iter()
                .map(|p| match kind {
                    TableKind::Estimates => &p.estimate,
                    TableKind::Fan(v) => p.fan(v),
                })
                .collect();
            let mut row = vec![match label {
                RowLabel::Label => r.label.clone(),
                RowLabel::SampleSize => r.n.to_string(),
                RowLabel::Nsr => format!("{:.0}%", r.nsr),
            }];
            row.push(r.bandwidth.to_string());
            row.extend(summaries.iter().map(|s| s.mean.to_string()));
            row.extend(summaries.iter().map(|s| s.sd.to_string()));
            if kind == TableKind::Estimates {
                row.push(opt_cell(r.theoretical_sd));
                row.push(opt_cell(r.corrected_sd));
            }
            row
        })
        .collect();
    Ok(Table { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_config(replications: usize) -> StudyConfig {
        let mut c = StudyConfig::new(
            TargetDensity::standard_normal(),
            ErrorModel::gaussian(0.4).unwrap(),
            30,
            BandwidthChoice::Fixed(0.3),
        );
        c.replications = replications;
        c.master_seed = 11;
        c
    }

    #[test]
    fn single_replication() {
        let report = run_study(&small_config(1)).unwrap();
        for p in &report.points {
            assert_eq!(p.estimate.samples.len(), 1);
            assert_eq!(p.estimate.mean, p.estimate.samples[0]);
            assert_eq!(p.estimate.sd, 0.0);
        }
    }

    #[test]
    fn same_seed_same_report() {
        let a = run_study(&small_config(20)).unwrap();
        let b = run_study(&small_config(20)).unwrap();
        assert_eq!(a, b);
        let mut other = small_config(20);
        other.master_seed = 12;
        let c = run_study(&other).unwrap();
        assert_ne!(a.points[0].estimate.samples, c.points[0].estimate.samples);
        assert_eq!(a.theoretical_sd, c.theoretical_sd);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_study(&small_config(24)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn report_matches_asymptotics() {
        let report = run_study(&small_config(2)).unwrap();
        let (k, m) = (Kernel::fan(), ErrorModel::gaussian(0.4).unwrap());
        let spec = AsymptoticSpec::new(&k, &m, 0.3, 30, 0.0).unwrap();
        assert_eq!(report.theoretical_sd, Some(theoretical_sd(&spec).unwrap()));
        assert_eq!(
            report.corrected_sd,
            Some(corrected_sd(&k, &m, 0.3, 30).unwrap())
        );
        assert_abs_diff_eq!(report.nsr, 16.0, epsilon = 1e-12);
    }

    #[test]
    fn fft_mode_records_ise_and_curve() {
        let mut c = small_config(4);
        c.use_fft = true;
        let fft = run_study(&c).unwrap();
        let quad = run_study(&small_config(4)).unwrap();
        assert_eq!(fft.ise.as_ref().unwrap().samples.len(), 4);
        assert!(fft.example_curve.is_some() && quad.example_curve.is_none());
        for (a, b) in fft.points.iter().zip(&quad.points) {
            for (u, v) in a.estimate.samples.iter().zip(&b.estimate.samples) {
                assert!((u - v).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn replication_failure_carries_index() {
        let mut c = small_config(3);
        // noiseless draws from a point mass make every Z_j equal
        c.target = TargetDensity::Normal {
            mean: 0.0,
            sd: 1e-300,
        };
        c.noise = ErrorModel::supersmooth(|t: f64| (-0.08 * t * t).exp(), 0.4, 1.0, 0.0, 2.0, 12.5)
            .unwrap()
            .with_sampler(|_| 0.0);
        match run_study(&c) {
            Err(Error::Replication { index: 0, source }) => assert!(source.is_numeric()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_configs() {
        let mut c = small_config(0);
        assert!(run_study(&c).is_err());
        c.replications = 1;
        c.eval_points.clear();
        assert!(run_study(&c).is_err());
    }

    #[test]
    fn histogram() {
        let report = run_study(&small_config(40)).unwrap();
        let hist = histogram_export(&report, 0, 8).unwrap();
        assert_eq!(hist.counts.iter().sum::<usize>(), 40);
        assert_eq!(hist.edges.len(), 9);
        assert!(histogram_export(&report, 0, 1).is_err());
        assert!(matches!(
            histogram_export(&report, 2, 8),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
        let flat = Histogram::from_samples(&[1.0; 5], 3).unwrap();
        assert_eq!(flat.counts.iter().sum::<usize>(), 5);
        let mut buf = Vec::new();
        hist.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("lower,upper,count\n"));
    }

    #[test]
    fn tables_round_trip() {
        let reports = vec![run_study(&small_config(5)).unwrap(), {
            let mut c = small_config(5);
            c.n = 40;
            run_study(&c).unwrap()
        }];
        let est = table_render(&reports, TableKind::Estimates, RowLabel::SampleSize).unwrap();
        assert_eq!(est.header.len(), 8);
        assert_eq!(est.rows.len(), 2);
        let fan = table_render(
            &reports,
            TableKind::Fan(StatisticVariant::Plain),
            RowLabel::Label,
        )
        .unwrap();
        assert_eq!(fan.header.len(), 6);

        let csv = est.to_csv().unwrap();
        let mut rdr = csv::Reader::from_reader(csv.as_bytes());
        let parsed: Vec<Vec<f64>> = rdr
            .records()
            .map(|r| r.unwrap().iter().map(|c| c.parse().unwrap()).collect())
            .collect();
        for (row, r) in parsed.iter().zip(&reports) {
            assert_eq!(row[0], r.n as f64);
            assert_eq!(row[1], r.bandwidth);
            assert_eq!(row[2], r.points[0].estimate.mean);
            assert_eq!(row[5], r.points[1].estimate.sd);
            assert_eq!(row[6], r.theoretical_sd.unwrap());
            assert_eq!(row[7], r.corrected_sd.unwrap());
        }
        let text = est.to_text();
        assert_eq!(text.lines().count(), 3);
        assert!(table_render(&[], TableKind::Estimates, RowLabel::Label).is_err());
    }

    #[test]
    fn summary_statistics() {
        let s = SampleSummary::from_samples(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert_abs_diff_eq!(s.sd, (5.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.mean_se(), s.sd / 2.0, epsilon = 1e-15);
    }
}
