mod args;
mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use pvdtw::synth::FaultProfile;
use pvdtw::{BandConstraint, DayModel, DiagnoseConfig, DiagnosisReport, Error, KMeansConfig};

use args::{
    Cli, ClusterArgs, Command, DiagnoseArgs, DistArgs, KMeansArgs, MatrixFormat, PrepArgs, ReportArgs, SynthArgs,
};

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::TooFewPanels { .. }
            | Error::TooManyClusters { .. }
            | Error::LabelingRequiresTwoClusters(_)
            | Error::InvalidConfig(_)
            | Error::InvalidWindow(_) => Failure::Usage(e.to_string()),
            other => Failure::Data(other.into()),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage<T>(message: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(message.into()))
}

struct Log {
    quiet: bool,
}

impl Log {
    fn stage(&self, message: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("pvdtw: {}", message.as_ref());
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match config::expand(argv) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            eprintln!("run `pvdtw --help` for usage");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return usage("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("starting worker pool")?;
    }
    let log = Log { quiet: cli.quiet };
    match cli.command {
        Command::Synth(a) => synth(a, &log),
        Command::Dist(a) => dist(a, &log),
        Command::Cluster(a) => cluster(a, &log),
        Command::Diagnose(a) => diagnose(a, &log),
        Command::Report(a) => report(a, &log),
    }
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Outcome {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .context("writing to stdout")?;
        }
    }
    Ok(())
}

fn json_bytes(value: &impl serde::Serialize) -> Outcome<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).context("encoding json")?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn synth(a: SynthArgs, log: &Log) -> Outcome {
    if a.panels == 0 {
        return usage("--panels must be at least 1");
    }
    if a.faulty + a.snail > a.panels {
        return usage(format!(
            "--faulty {} plus --snail {} exceeds --panels {}",
            a.faulty, a.snail, a.panels
        ));
    }
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return usage(format!("--noise must be a non-negative fraction, got {}", a.noise));
    }
    let day = DayModel {
        sunrise_min: a.sunrise,
        sunset_min: a.sunset,
        peak_current: a.peak,
        noise_sigma: a.noise * a.peak,
        ..DayModel::default()
    };
    let healthy = a.panels - a.faulty - a.snail;
    let profiles: Vec<FaultProfile> = (0..a.panels)
        .map(|i| {
            if i < healthy {
                FaultProfile::Healthy
            } else if i < healthy + a.snail {
                FaultProfile::SnailTrail { scale: a.snail_scale }
            } else {
                FaultProfile::BrokenGlass { scale: a.scale }
            }
        })
        .collect();
    for p in &profiles {
        p.validate()?;
    }
    let (fleet, truth) = pvdtw::generate_fleet(a.panels, &profiles, &day, a.seed)?;
    log.stage(format!(
        "generated {} panels ({} broken glass, {} snail trail), seed {}",
        a.panels, a.faulty, a.snail, a.seed
    ));

    let mut csv = Vec::new();
    pvdtw::write_csv(&fleet, &mut csv)?;
    emit(a.output.as_deref(), &csv)?;
    if let Some(p) = &a.output {
        log.stage(format!("wrote {}", p.display()));
    }

    let labels = a.labels.or_else(|| a.output.as_ref().map(|p| sidecar(p)));
    if let Some(p) = labels {
        emit(Some(&p), &json_bytes(&truth)?)?;
        log.stage(format!("wrote labels to {}", p.display()));
    }
    Ok(())
}

fn sidecar(output: &Path) -> PathBuf {
    let stem = output.file_stem().unwrap_or_default().to_string_lossy();
    output.with_file_name(format!("{stem}.labels.json"))
}

fn band(radius: Option<usize>) -> BandConstraint {
    radius.map_or(BandConstraint::Unconstrained, BandConstraint::Radius)
}

fn kmeans_config(a: &KMeansArgs) -> Outcome<KMeansConfig> {
    if a.k == 0 {
        return usage("--k must be at least 1");
    }
    if a.n_init == 0 {
        return usage("--n-init must be at least 1");
    }
    if a.max_iter == 0 {
        return usage("--max-iter must be at least 1");
    }
    if !(a.dba_tol >= 0.0 && a.dba_tol.is_finite()) {
        return usage(format!("--dba-tol must be non-negative, got {}", a.dba_tol));
    }
    Ok(KMeansConfig {
        k: a.k,
        max_iter: a.max_iter,
        seed: a.seed,
        band: band(a.band),
        dba_max_iter: a.dba_max_iter,
        dba_tol: a.dba_tol,
        n_init: a.n_init,
    })
}

fn diagnose_config(kmeans: KMeansConfig, p: &PrepArgs) -> Outcome<DiagnoseConfig> {
    if p.period <= 0 {
        return usage(format!("--period must be positive, got {}", p.period));
    }
    Ok(DiagnoseConfig {
        kmeans,
        max_gap: p.max_gap,
        period: p.period,
        normalize: p.normalize,
        trim_dark: p.trim_dark,
    })
}

fn load(path: &Path, config: &DiagnoseConfig, log: &Log) -> Outcome<pvdtw::pipeline::Prepared> {
    let fleet = pvdtw::ingest_csv(path)?;
    log.stage(format!(
        "read {} panels from {}{}",
        fleet.len(),
        path.display(),
        if fleet.is_grid_aligned() {
            ""
        } else {
            " (resampling to grid)"
        }
    ));
    let prepared = pvdtw::prepare(&fleet, config)?;
    log.stage(format!(
        "prepared {} panels x {} samples",
        prepared.raw.len(),
        prepared.raw.series_len()?
    ));
    Ok(prepared)
}

fn dist(a: DistArgs, log: &Log) -> Outcome {
    let config = diagnose_config(KMeansConfig::default(), &a.prep)?;
    let format = a
        .format
        .unwrap_or_else(|| match a.output.as_ref().and_then(|p| p.extension()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => MatrixFormat::Json,
            _ => MatrixFormat::Csv,
        });
    let prepared = load(&a.input, &config, log)?;
    if prepared.clustered.len() < 2 {
        return usage(format!(
            "need at least 2 panels for a distance matrix, {} has {}",
            a.input.display(),
            prepared.clustered.len()
        ));
    }
    let matrix = pvdtw::distance_matrix(&prepared.clustered, band(a.band))?;
    log.stage(format!(
        "computed {0}x{0} distance matrix, band {1}",
        matrix.n(),
        band(a.band)
    ));
    let mut bytes = Vec::new();
    match format {
        MatrixFormat::Csv => matrix.write_csv(&mut bytes)?,
        MatrixFormat::Json => matrix.write_json(&mut bytes)?,
    }
    emit(a.output.as_deref(), &bytes)
}

fn cluster(a: ClusterArgs, log: &Log) -> Outcome {
    let config = diagnose_config(kmeans_config(&a.kmeans)?, &a.prep)?;
    let prepared = load(&a.input, &config, log)?;
    let model = pvdtw::fit(&prepared.clustered, &config.kmeans)?;
    log.stage(format!(
        "fitted k={} in {} iterations, inertia {}{}",
        model.k,
        model.n_iter,
        model.inertia,
        if model.converged { "" } else { " (not converged)" }
    ));
    emit(a.output.as_deref(), &json_bytes(&model)?)
}

fn diagnose(a: DiagnoseArgs, log: &Log) -> Outcome {
    let config = diagnose_config(kmeans_config(&a.kmeans)?, &a.prep)?;
    if config.kmeans.k != 2 {
        return usage(format!("diagnose needs --k 2, got {}", config.kmeans.k));
    }
    if let Some(w) = a.window {
        if w < 3 {
            return usage(format!("--window must be at least 3 samples, got {w}"));
        }
    }
    if a.stride == 0 {
        return usage("--stride must be at least 1");
    }
    let prepared = load(&a.input, &config, log)?;
    let report = match a.window {
        Some(w) => {
            let r = pvdtw::windowed_diagnose(&prepared.raw, w, a.stride, &config)?;
            log.stage(format!(
                "voted over {} windows of {w} samples",
                r.window.as_ref().map_or(0, |s| s.windows)
            ));
            r
        }
        None => pvdtw::diagnose(&prepared.raw, &config)?,
    };
    log.stage(format!(
        "{} healthy, {} abnormal",
        report.count(pvdtw::Verdict::Healthy),
        report.count(pvdtw::Verdict::Abnormal)
    ));

    let mut json = Vec::new();
    report.write_json(&mut json)?;
    emit(a.output.as_deref(), &json)?;
    if let Some(p) = &a.output {
        log.stage(format!("wrote {}", p.display()));
    }
    if let Some(p) = &a.plot {
        let mut csv = Vec::new();
        pvdtw::write_plot_csv(&report, &prepared.raw, &mut csv)?;
        emit(Some(p), &csv)?;
        log.stage(format!("wrote plot data to {}", p.display()));
    }
    match (&a.summary, &a.output) {
        (Some(p), _) => emit(Some(p), report.summary().as_bytes())?,
        (None, Some(_)) => emit(None, report.summary().as_bytes())?,
        (None, None) => {}
    }
    Ok(())
}

fn report(a: ReportArgs, _log: &Log) -> Outcome {
    let file = fs::File::open(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let report: DiagnosisReport = serde_json::from_reader(std::io::BufReader::new(file))
        .with_context(|| format!("{}: not a diagnosis report", a.report.display()))?;
    emit(a.output.as_deref(), report.summary().as_bytes())
}
