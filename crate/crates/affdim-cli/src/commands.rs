use crate::report::{calibrations, csv_table, fmt_f64, Artifacts, Report, ReportHeader};
use crate::Command;
use affdim_core::config::SystemSpec;
use affdim_core::convolution::{
    entropy_growth_experiment, random_translation_cloud, DEFAULT_CONV_TARGET,
};
use affdim_core::dimension::{
    estimate_h3, ly_budget, lyapunov_dimension, shannon, verify_main, VerifyBudget, VerifyVerdict,
};
use affdim_core::entropy::{entropy, entropy_dimension, projection_entropy_sweep};
use affdim_core::frames::DyadicFrame;
use affdim_core::ifs::IfsSystem;
use affdim_core::spectral::{furstenberg_measure, lyapunov_exponents, stationarity_residual};
use affdim_core::{fixtures, Error};
use serde::Serialize;
use std::collections::BTreeMap;

pub struct Run {
    pub config_path: Option<String>,
    pub fixture: Option<String>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub nmax: Option<u32>,
    pub out_dir: String,
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(std::io::Error),
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "io: {e}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult<T> = Result<T, CliError>;

impl Run {
    fn system(&self) -> CliResult<(IfsSystem, serde_json::Value)> {
        let spec = match (&self.fixture, &self.config_path) {
            (Some(name), None) => {
                let system = fixtures::by_name(name).ok_or_else(|| {
                    CliError::Usage(format!(
                        "unknown fixture {name:?}; available: {}",
                        fixtures::FIXTURE_NAMES.join(", ")
                    ))
                })?;
                SystemSpec::from_system(&system)
            }
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)?;
                SystemSpec::parse(&text)?
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "pass either --fixture or --config, not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Usage(
                    "a system is required: --fixture F1..F4 or --config FILE".into(),
                ))
            }
        };
        let system = spec.build()?;
        let echo = serde_json::to_value(&spec).expect("spec serializes");
        Ok((system, echo))
    }

    fn require_seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::Usage("--seed is required for stochastic commands".into()))
    }

    fn header(&self, command: &str, echo: serde_json::Value) -> ReportHeader {
        ReportHeader {
            tool: "affdim",
            version: affdim_core::VERSION,
            command: command.into(),
            seed: self.seed,
            system: echo,
            metric: "frobenius-3x3-embedding",
            calibrations: calibrations(),
            tolerances: self.tolerances.clone(),
        }
    }

    fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}

pub fn dispatch(command: &Command, run: &Run) -> CliResult<u8> {
    match command {
        Command::Validate => cmd_validate(run),
        Command::Sample => cmd_sample(run),
        Command::Lyapunov => cmd_lyapunov(run),
        Command::Furstenberg => cmd_furstenberg(run),
        Command::Separation => cmd_separation(run),
        Command::Entropy => cmd_entropy(run),
        Command::Dimension => cmd_dimension(run),
        Command::Verify => cmd_verify(run),
        Command::Convolve => cmd_convolve(run),
        Command::Fixtures => cmd_fixtures(run),
    }
}

fn cmd_validate(run: &Run) -> CliResult<u8> {
    let (system, echo) = run.system()?;
    let report = system.validate();
    let mut artifacts = Artifacts::new(&run.out_dir)?;
    artifacts.write_json(
        "validate.json",
        &Report {
            header: run.header("validate", echo),
            result: &report,
        },
    )?;
    for check in &report.checks {
        println!(
            "{:32} {}  {}",
            check.name,
            if check.passed { "pass" } else { "FAIL" },
            check.detail
        );
    }
    println!(
        "validation: {}",
        if report.all_passed { "all checks pass" } else { "failures present" }
    );
    Ok(if report.all_passed { 0 } else { 2 })
}

fn cmd_sample(run: &Run) -> CliResult<u8> {
    let (system, echo) = run.system()?;
    let seed = run.require_seed()?;
    let n = run.samples.unwrap_or(100_000);
    let depth = run.nmax.unwrap_or(12) + 10;
    let samples = system.sample_attractor(n, depth, seed)?;
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| {
            vec![
                fmt_f64(s.point.x),
                fmt_f64(s.point.y),
                s.word.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(""),
            ]
        })
        .collect();
    #[derive(Serialize)]
    struct Summary {
        samples: usize,
        depth_target: u32,
        mean_word_length: f64,
    }
    let mean_len =
        samples.iter().map(|s| s.word.len() as f64).sum::<f64>() / samples.len() as f64;
    let mut artifacts = Artifacts::new(&run.out_dir)?;
    artifacts.write_csv("samples.csv", &csv_table(&["x", "y", "word"], &rows))?;
    artifacts.write_json(
        "sample.json",
        &Report {
            header: run.header("sample", echo),
            result: Summary {
                samples: n,
                depth_target: depth,
                mean_word_length: mean_len,
            },
        },
    )?;
    println!("sampled {n} points (mean coding length {mean_len:.2}) -> samples.csv");
    Ok(0)
}

fn cmd_lyapunov(run: &Run) -> CliResult<u8> {
    let (system, echo) = run.system()?;
    let seed = run.require_seed()?;
    let trials = 16;
    let length = run.samples.unwrap_or(100_000);
    let est = lyapunov_exponents(&system, trials, length, seed)?;
    let mut artifacts = Artifacts::new(&run.out_dir)?;
    artifacts.write_json(
        "lyapunov.json",
        &Report {
            header: run.header("lyapunov", echo),
            result: &est,
        },
    )?;
    println!(
        "chi1 = {:.6} +- {:.2e}, chi2 = {:.6} (sum exact {:.6})",
        est.chi1, est.stderr1, est.chi2, est.sum_exact
    );
    Ok(0)
}

fn cmd_furstenberg(run: &Run) -> CliResult<u8> {
    let (system, echo) = run.system()?;
    let seed = run.require_seed()?;
    let samples = run.samples.unwrap_or(20_000);
    let burnin = 200;
    let eta = furstenberg_measure(&system, false, samples, burnin, seed)?;
    let eta_star = furstenberg_measure(&system, true, samples, burnin, seed ^ 1)?;
    let res_eta = stationarity_residual(&system, &eta, false);
    let res_eta_star = stationarity_residual(&system, &eta_star, true);
    let bins = 256usize;
    let hist = |m: &affdim_core::measure::ProjectiveCloud| -> Vec<f64> {
        let mut h = vec![0.0; bins];
        for &(p, w) in m.atoms() {
            let idx =
                ((p.angle() / std::f64::consts::PI) * bins as f64).floor() as usize;
            h[idx.min(bins - 1)] += w;
        }
        h
    };
    let h_eta = hist(&eta);
    let h_eta_star = hist(&eta_star);
    let rows: Vec<Vec<String>> = (0..bins)
        .map(|i| {
            vec![
                fmt_f64((i as f64 + 0.5) * std::f64::consts::PI / bins as f64),
                fmt_f64(h_eta[i]),
                fmt_f64(h_eta_star[i]),
            ]
        })
        .collect();
    #[derive(Serialize)]
    struct Summary {
        samples: usize,
        burnin: usize,
        eta_residual: f64,
        eta_star_residual: f64,
    }
    let mut artifacts = Artifacts::new(&run.out_dir)?;
    artifacts.write_csv(
        "furstenberg.csv",
        &csv_table(&["angle", "eta_mass", "eta_star_mass"], &rows),
    )?;
    artifacts.write_json(
        "furstenberg.json",
        &Report {
            header: run.header("furstenberg", echo),
            result: Summary {
                samples,
                burnin,
                eta_residual: res_eta,
                eta_star_residual: res_eta_star,
            },
        },
    )?;
    println!("eta residual {res_eta:.4}, eta* residual {res_eta_star:.4} -> furstenberg.csv");
    Ok(0)
}

fn cmd_separation(run: &Run) -> CliResult<u8> {
    let (system, echo) = run.system()?;
    let n_max = run.nmax.unwrap_or(8);
    let report = affdim_core::separation::separation_report(&system, n_max, 1 << 22)?;
    // Cumulative slope over levels up to each n.
    let mut rows = Vec::new();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for rec in &report.records {
        let d = if report.coincidence {
            rec.min_distance_distinct
        } else {
            rec.min_distance
        };
        let mut slope_so_far = f64::NAN;
        if let Some(d) = d {
            if rec.n >= 3 && d > 0.0 {
                pts.push((rec.n as f64, d.log2()));
            }
            if pts.len() >= 2 {
                let n = pts.len() as f64;
                let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
                let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
                let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
                let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                slope_so_far = sxy / sxx;
            }
        }
        rows.push(vec![
            rec.n.to_string(),
            rec.word_count.to_string(),
            rec.min_distance.map(fmt_f64).unwrap_or_default(),
            fmt_f64(slope_so_far),
        ]);
    }
    let mut artifacts = Artifacts::new(&run.out_dir)?;
    artifacts.write_csv(
        "separation.csv",
        &csv_table(&["n", "count", "min_distance", "slope_so_far"], &rows),
    )?;
    artifacts.write_json(
        "separation.json",
        &Report {
            header: run.header("separation", echo),
            result: &report,
        },
    )?;
    println!(
        "mode {:?}, coincidence: {}, fitted slope {:?}",
        report.mode, report.coincidence, report.slope
    );
    Ok(0)
}

fn entropy_scale_rows(
    mu: &affdim_core::measure::PointCloud,
    scales: (i32, i32),
) -> Vec<Vec<String>> {
    (scales.0..=scales.1)
        .map(|n| {
            let h = entropy(mu, &DyadicFrame::standard_2d(n));
            vec![
                n.to_string(),
                "standard".into(),
                fmt_f64(h.bits),
                fmt_f64(h.corrected()),
                h.atoms_used.to_string(),
            ]
        })
        .collect()
}

fn cmd_entropy(run: &Run) -> CliResult<u8> {
    let (system, echo) = run.system()?;
    let seed = run.require_seed()?;
    let n_samples = run.samples.unwrap_or(1_000_000);
    let top = run.nmax.unwrap_or(11) as i32;
    let scales = (top - 5, top);
    let mu = system.attractor_cloud(n_samples, top as u32 + 10, seed)?;
    let fit = entropy_dimension(&mu, scales)?;
    let mut artifacts = Artifacts::new(&run.out_dir)?;
    artifacts.write_csv(
        "entropy.csv",
        &csv_table(
            &["n", "frame", "bits", "corrected_bits", "atoms_used"],
            &entropy_scale_rows(&mu, scales),
        ),
    )?;
    artifacts.write_json(
        "entropy.json",
        &Report {
            header: run.header("entropy", echo),
            result: &fit,
        },
    )?;
    println!(
        "entropy dimension over scales {:?}: {:.4} (corrected {:.4})",
        scales, fit.alpha_hat, fit.alpha_hat_corrected
    );
    Ok(0)
}

fn cmd_dimension(run: &Run) -> CliResult<u8> {
    let (system, echo) = run.system()?;
    let seed = run.require_seed()?;
    let n_samples = run.samples.unwrap_or(1_000_000);
    let top = run.nmax.unwrap_or(11) as i32;
    let scales = (top - 5, top);
    let lyap = lyapunov_exponents(&system, 16, 50_000, seed)?;
    let mu = system.attractor_cloud(n_samples, top as u32 + 10, seed ^ 3)?;
    let fit = entropy_dimension(&mu, scales)?;
    let h_p = shannon(&system.normalized_probs())?;
    let dim_l = lyapunov_dimension(h_p, lyap.chi1, lyap.chi2)?;
    let sweep = projection_entropy_sweep(&mu, top, 256);
    let beta_proxy = (sweep.min_bits / top as f64).min(1.0);
    let split = ly_budget(h_p, lyap.chi1, lyap.chi2, fit.alpha_hat, beta_proxy)?;
    let h3 = estimate_h3(&system, n_samples, (top - 1).min(10), seed ^ 5)?;
    #[derive(Serialize)]
    struct DimensionOut<'a> {
        lyapunov: &'a affdim_core::spectral::LyapunovEstimate,
        entropy_fit: &'a affdim_core::entropy::EntropyDimFit,
        h_p: f64,
        dim_l: f64,
        min_projection_entropy_per_level: f64,
        budget: &'a affdim_core::dimension::DimensionBudget,
        h3: &'a affdim_core::dimension::H3Report,
    }
    let mut artifacts = Artifacts::new(&run.out_dir)?;
    artifacts.write_csv(
        "entropy.csv",
        &csv_table(
            &["n", "frame", "bits", "corrected_bits", "atoms_used"],
            &entropy_scale_rows(&mu, scales),
        ),
    )?;
    artifacts.write_json(
        "dimension.json",
        &Report {
            header: run.header("dimension", echo),
            result: DimensionOut {
                lyapunov: &lyap,
                entropy_fit: &fit,
                h_p,
                dim_l,
                min_projection_entropy_per_level: sweep.min_bits / top as f64,
                budget: &split,
                h3: &h3,
            },
        },
    )?;
    println!(
        "alpha_hat = {:.4}, dim_L = {:.4}, H(p) = {:.4}, chi = ({:.4}, {:.4}), H3 proxy = {:.4}",
        fit.alpha_hat, dim_l, h_p, lyap.chi1, lyap.chi2, h3.h3_proxy
    );
    Ok(0)
}

fn cmd_verify(run: &Run) -> CliResult<u8> {
    let (system, echo) = run.system()?;
    let seed = run.require_seed()?;
    let mut budget = VerifyBudget::default();
    if let Some(n) = run.samples {
        budget.n_samples = n;
    }
    if let Some(n) = run.nmax {
        budget.scales = (n as i32 - 5, n as i32);
    }
    budget.tolerance_alpha = run.tolerance("alpha", budget.tolerance_alpha);
    let report = verify_main(&system, &budget, seed)?;
    let mut artifacts = Artifacts::new(&run.out_dir)?;
    #[derive(Serialize)]
    struct VerifyOut<'a> {
        budget: &'a VerifyBudget,
        report: &'a affdim_core::dimension::VerifyReport,
    }
    artifacts.write_json(
        "verify.json",
        &Report {
            header: run.header("verify", echo),
            result: VerifyOut {
                budget: &budget,
                report: &report,
            },
        },
    )?;
    println!("route: {}", report.route);
    for (name, status) in &report.hypotheses {
        println!("  {name:32} {status}");
    }
    for note in &report.notes {
        println!("  note: {note}");
    }
    if let Some(est) = report.estimates.alpha_hat {
        println!(
            "  alpha_hat = {est:.4}, dim_L = {:?}",
            report.estimates.dim_l
        );
    }
    println!("verdict: {:?}", report.verdict);
    Ok(match report.verdict {
        VerifyVerdict::Pass | VerifyVerdict::FormulaMismatch => 0,
        VerifyVerdict::HypothesisFailure | VerifyVerdict::Inconclusive => 2,
    })
}

fn cmd_convolve(run: &Run) -> CliResult<u8> {
    let (system, echo) = run.system()?;
    let seed = run.require_seed()?;
    let n_samples = run.samples.unwrap_or(500_000);
    let level = run.nmax.unwrap_or(10) as i32;
    let mu = system.attractor_cloud(n_samples, level as u32 + 10, seed)?;
    let atoms = 1usize << ((level as f64 * 0.4).ceil() as usize);
    let theta = random_translation_cloud(atoms, 0.5, seed ^ 7);
    let record = entropy_growth_experiment(&mu, &theta, level, DEFAULT_CONV_TARGET, seed ^ 9);
    let rows = vec![vec![
        record.n.to_string(),
        fmt_f64(record.h_mu),
        fmt_f64(record.h_conv),
        fmt_f64(record.gain),
        record.frame.clone(),
    ]];
    let mut artifacts = Artifacts::new(&run.out_dir)?;
    artifacts.write_csv(
        "growth.csv",
        &csv_table(&["n", "H_mu", "H_conv", "gain", "frame"], &rows),
    )?;
    artifacts.write_json(
        "convolve.json",
        &Report {
            header: run.header("convolve", echo),
            result: &record,
        },
    )?;
    println!(
        "theta entropy {:.4}/level, gain {:.4} bits/level at level {level}",
        record.theta_entropy, record.gain
    );
    Ok(0)
}

fn cmd_fixtures(run: &Run) -> CliResult<u8> {
    #[derive(Serialize)]
    struct FixtureInfo {
        name: String,
        maps: usize,
        description: &'static str,
        spec: SystemSpec,
    }
    let infos: Vec<FixtureInfo> = fixtures::FIXTURE_NAMES
        .iter()
        .map(|&name| {
            let system = fixtures::by_name(name).expect("registry names resolve");
            let description = match name {
                "F1" => "non-conformal totally irreducible separated pair",
                "F2" => "parabola-preserving triangular triple (attractor on y = x^2)",
                "F3" => "diagonal carpet control (reducible)",
                _ => "overlapping irreducible system with an exact semigroup relation",
            };
            FixtureInfo {
                name: name.into(),
                maps: system.alphabet_len(),
                description,
                spec: SystemSpec::from_system(&system),
            }
        })
        .collect();
    let mut artifacts = Artifacts::new(&run.out_dir)?;
    artifacts.write_json("fixtures.json", &infos)?;
    for info in &infos {
        println!("{}: {} maps - {}", info.name, info.maps, info.description);
    }
    Ok(0)
}
