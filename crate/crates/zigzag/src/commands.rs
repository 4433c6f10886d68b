//! Argument parsing and the four subcommands.

use std::path::PathBuf;
use std::thread;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use zigzag_core::charfn::{Branch, CharFunctionHandle};
use zigzag_core::operator::{eigenfunction, Evaluable, OperatorConfig, Variant};
use zigzag_core::perturbation::PerturbedSpectrum;
use zigzag_core::potential::{GridSpec, PotentialModel, SwitchingRateSpec, Velocity};
use zigzag_core::quadrature::QuadratureConfig;
use zigzag_core::rootfinder::{newton_polish, RootConfig};
use zigzag_core::simulator::{autocorrelation, empirical_marginal, fit_envelope_decay, simulate_stream, ZigzagPath};
use zigzag_core::spectrum::{SpectrumConfig, SpectrumResult};
use zigzag_core::Error;

use crate::config::{parse_complex, RunConfig};
use crate::output::{
    csv_text, to_json, write_text, ArrowJson, BranchJson, ComplexJson, EigenvalueJson, ErrorJson, RegionJson,
};
use crate::svg::Scatter;
use crate::{parallel, CliError};

/// Lag spacing of the autocorrelation estimate in `simulate`.
pub const LAG_STEP: f64 = 0.05;
/// Envelope peaks below this are ignored by the decay fit.
pub const ACF_FLOOR: f64 = 0.01;
/// Refreshment rate used by `perturb` when `--eps` is not given.
pub const DEFAULT_EPS: f64 = 0.1;

#[derive(Debug, Parser)]
#[command(name = "zigzag", version, about = "Spectra, eigenfunctions and simulations of the 1D zigzag process")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of the generator in a rectangle and the spectral gap.
    Spectrum(SpectrumArgs),
    /// First-order eigenvalue shifts under a refreshment rate eps.
    Perturb(SpectrumArgs),
    /// Eigenfunction table at a (polished) eigenvalue.
    Eigfun(EigfunArgs),
    /// Simulated trajectories with marginal and autocorrelation diagnostics.
    Simulate(SimulateArgs),
}

#[derive(Debug, Default, Args)]
pub struct Common {
    /// key=value file with the same keys as the long flags; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// gaussian:<sigma>, beta:<beta> or beta:<beta>@<sigma>.
    #[arg(long)]
    pub potential: Option<String>,
    /// Extra scale: U(x) becomes U(x / sigma).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub re_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub re_max: Option<f64>,
    #[arg(long)]
    pub im_max: Option<f64>,
    /// Relative tolerance of the characteristic-function quadrature.
    #[arg(long)]
    pub tol: Option<f64>,
    /// JSON report path (default: standard output).
    #[arg(long)]
    pub out: Option<String>,
    /// SVG scatter plot path.
    #[arg(long)]
    pub plot: Option<String>,
    /// CSV table path.
    #[arg(long)]
    pub csv: Option<String>,
}

#[derive(Debug, Default, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: Common,
    /// Refreshment rate for perturbation arrows.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct EigfunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Approximate eigenvalue, e.g. -0.425665+1.02295i.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    /// Table covers [-x_max, x_max].
    #[arg(long)]
    pub x_max: Option<f64>,
    #[arg(long)]
    pub dx: Option<f64>,
}

#[derive(Debug, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Time horizon of each chain.
    #[arg(short = 'T', long = "horizon")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent chains, one RNG stream each.
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub x0: Option<f64>,
    /// Largest autocorrelation lag.
    #[arg(long)]
    pub max_lag: Option<f64>,
    /// Histogram bins of the empirical marginal.
    #[arg(long)]
    pub bins: Option<usize>,
}

fn override_with<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        override_with(&mut cfg.potential, self.potential.clone());
        override_with(&mut cfg.sigma, self.sigma);
        cfg.re_min = self.re_min.or(cfg.re_min);
        override_with(&mut cfg.re_max, self.re_max);
        cfg.im_max = self.im_max.or(cfg.im_max);
        override_with(&mut cfg.tol, self.tol);
        cfg.out = self.out.clone().or(cfg.out);
        cfg.plot = self.plot.clone().or(cfg.plot);
        cfg.csv = self.csv.clone().or(cfg.csv);
        Ok(cfg)
    }
}

impl Command {
    /// Effective configuration: defaults, then the config file, then flags.
    pub fn config(&self) -> Result<RunConfig, CliError> {
        let cfg = match self {
            Command::Spectrum(a) | Command::Perturb(a) => {
                let mut cfg = a.common.resolve()?;
                cfg.eps = a.eps.or(cfg.eps);
                if matches!(self, Command::Perturb(_)) && cfg.eps.is_none() {
                    cfg.eps = Some(DEFAULT_EPS);
                }
                cfg
            }
            Command::Eigfun(a) => {
                let mut cfg = a.common.resolve()?;
                if let Some(g) = &a.gamma {
                    cfg.gamma = Some(parse_complex(g)?);
                }
                override_with(&mut cfg.x_max, a.x_max);
                override_with(&mut cfg.dx, a.dx);
                cfg
            }
            Command::Simulate(a) => {
                let mut cfg = a.common.resolve()?;
                override_with(&mut cfg.horizon, a.horizon);
                override_with(&mut cfg.seed, a.seed);
                override_with(&mut cfg.chains, a.chains);
                override_with(&mut cfg.x0, a.x0);
                override_with(&mut cfg.max_lag, a.max_lag);
                override_with(&mut cfg.bins, a.bins);
                cfg
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.command.config()?;
    match cli.command {
        Command::Spectrum(_) => spectrum(&cfg, false),
        Command::Perturb(_) => spectrum(&cfg, true),
        Command::Eigfun(_) => eigfun(&cfg),
        Command::Simulate(_) => simulate(&cfg),
    }
}

pub fn spectrum_config(cfg: &RunConfig) -> SpectrumConfig {
    SpectrumConfig {
        re_min: cfg.re_min,
        re_max: cfg.re_max,
        im_max: cfg.im_max,
        quadrature: QuadratureConfig { rel_tol: cfg.tol, ..QuadratureConfig::default() },
        ..SpectrumConfig::default()
    }
}

#[derive(Serialize)]
struct Diagnostics {
    count: usize,
    zero_present: bool,
    conjugate_closed: bool,
    branches: Vec<BranchJson>,
}

#[derive(Serialize)]
struct Perturbation {
    eps: f64,
    gap: Option<f64>,
    arrows: Vec<ArrowJson>,
}

#[derive(Serialize)]
struct SpectrumReport<'a> {
    config: &'a RunConfig,
    potential: &'a str,
    region: RegionJson,
    eigenvalues: Vec<EigenvalueJson>,
    gap: Option<f64>,
    perturbation: Option<Perturbation>,
    diagnostics: Diagnostics,
}

fn spectrum_report<'a>(
    cfg: &'a RunConfig,
    result: &'a SpectrumResult,
    p: Option<&PerturbedSpectrum>,
) -> SpectrumReport<'a> {
    SpectrumReport {
        config: cfg,
        potential: &result.potential,
        region: (&result.region).into(),
        eigenvalues: result.eigenvalues.iter().map(Into::into).collect(),
        gap: result.gap,
        perturbation: p.map(|p| Perturbation {
            eps: p.epsilon,
            gap: p.gap(),
            arrows: p.entries.iter().map(|e| ArrowJson::new(e, p.epsilon)).collect(),
        }),
        diagnostics: Diagnostics {
            count: result.eigenvalues.len(),
            zero_present: result.zero().is_some(),
            conjugate_closed: result.is_conjugate_closed(1e-8),
            branches: result.branches.iter().map(Into::into).collect(),
        },
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn spectrum(cfg: &RunConfig, perturb: bool) -> Result<(), CliError> {
    let model = cfg.model()?;
    let result = parallel::compute_spectrum(&model, &spectrum_config(cfg))?;
    let perturbed = match cfg.eps {
        Some(eps) => Some(parallel::perturb(&result, eps, &OperatorConfig::default())?),
        None => None,
    };

    if let Some(path) = &cfg.csv {
        let text = if perturb {
            let p = perturbed.as_ref().expect("perturb always has eps");
            let header =
                ["re", "im", "branch", "multiplicity", "coefficient_re", "coefficient_im", "shifted_re", "shifted_im"];
            csv_text(
                &header,
                p.entries.iter().map(|e| {
                    vec![
                        num(e.base.gamma.re),
                        num(e.base.gamma.im),
                        e.base.branch.name().to_string(),
                        e.base.multiplicity.to_string(),
                        opt(e.coefficient.map(|c| c.re)),
                        opt(e.coefficient.map(|c| c.im)),
                        opt(e.shifted.map(|c| c.re)),
                        opt(e.shifted.map(|c| c.im)),
                    ]
                }),
            )?
        } else {
            csv_text(
                &["re", "im", "branch", "multiplicity"],
                result.eigenvalues.iter().map(|e| {
                    vec![num(e.gamma.re), num(e.gamma.im), e.branch.name().to_string(), e.multiplicity.to_string()]
                }),
            )?
        };
        write_text(Some(path), &text)?;
    }

    if let Some(path) = &cfg.plot {
        let mut title = format!("Spectrum, {}", result.potential);
        if let Some(p) = &perturbed {
            title.push_str(&format!(", ε = {}", p.epsilon));
        }
        let plot = Scatter {
            title,
            region: result.region,
            points: result.eigenvalues.iter().map(|e| (e.gamma, e.branch)).collect(),
            arrows: perturbed
                .iter()
                .flat_map(|p| p.entries.iter())
                .filter_map(|e| e.shifted.map(|s| (e.base.gamma, s)))
                .collect(),
        };
        write_text(Some(path), &plot.render())?;
    }

    write_text(cfg.out.as_deref(), &to_json(&spectrum_report(cfg, &result, perturbed.as_ref())))
}

#[derive(Serialize)]
struct Row {
    x: f64,
    plus: ComplexJson,
    minus: ComplexJson,
}

#[derive(Serialize)]
struct Continuity {
    plus: f64,
    minus: f64,
}

#[derive(Serialize)]
struct EigfunReport<'a> {
    config: &'a RunConfig,
    potential: String,
    requested: ComplexJson,
    gamma: ComplexJson,
    newton_iterations: usize,
    residual: f64,
    z_derivative: ComplexJson,
    psi_plus: ComplexJson,
    psi_minus: ComplexJson,
    /// `|f(0-) - f(0+)|` per velocity.
    continuity: Continuity,
    sup_norm: f64,
    table: Vec<Row>,
}

/// Offset used for the left limit at `x = 0`.
const LEFT_LIMIT: f64 = 1e-12;

fn eigfun(cfg: &RunConfig) -> Result<(), CliError> {
    let requested = cfg.gamma.ok_or_else(|| CliError::Usage("eigfun needs --gamma".into()))?;
    let model = cfg.model()?;
    let quadrature = QuadratureConfig { rel_tol: cfg.tol, ..QuadratureConfig::default() };
    let handle = CharFunctionHandle::new(model.clone(), Branch::Full, quadrature)?;
    let polished = newton_polish(&handle, requested, &RootConfig::default())?;
    let gamma = polished.root;
    let f = eigenfunction(&model, gamma, Variant::Full, &OperatorConfig::default())?;
    let grid = GridSpec::new(cfg.x_max, cfg.dx)?.points();
    let mut table = Vec::with_capacity(grid.len());
    let mut sup = 0.0f64;
    for x in &grid {
        let [p, m] = f.eval(*x)?;
        sup = sup.max(p.norm()).max(m.norm());
        table.push((*x, p, m));
    }
    let [lp, lm] = f.eval(-LEFT_LIMIT)?;
    let [rp, rm] = f.eval(0.0)?;

    if let Some(path) = &cfg.csv {
        let text = csv_text(
            &["x", "plus_re", "plus_im", "minus_re", "minus_im"],
            table.iter().map(|(x, p, m)| vec![num(*x), num(p.re), num(p.im), num(m.re), num(m.im)]),
        )?;
        write_text(Some(path), &text)?;
    }
    let report = EigfunReport {
        config: cfg,
        potential: model.descriptor(),
        requested: requested.into(),
        gamma: gamma.into(),
        newton_iterations: polished.iterations,
        residual: polished.residual,
        z_derivative: handle.z_derivative(gamma)?.into(),
        psi_plus: f.psi_plus().into(),
        psi_minus: f.psi_minus().into(),
        continuity: Continuity { plus: (lp - rp).norm(), minus: (lm - rm).norm() },
        sup_norm: sup,
        table: table.into_iter().map(|(x, p, m)| Row { x, plus: p.into(), minus: m.into() }).collect(),
    };
    write_text(cfg.out.as_deref(), &to_json(&report))
}

#[derive(Serialize)]
struct Peak {
    lag: f64,
    value: f64,
}

#[derive(Serialize)]
struct MarginalJson {
    edges: Vec<f64>,
    masses: Vec<f64>,
}

#[derive(Serialize)]
struct ChainReport {
    chain: usize,
    stream: u64,
    switches: usize,
    positive_fraction: f64,
    ks: f64,
    acf_rate: Option<f64>,
    acf_intercept: Option<f64>,
    peaks: Vec<Peak>,
    fit_error: Option<ErrorJson>,
    acf: Vec<f64>,
    marginal: MarginalJson,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    config: &'a RunConfig,
    potential: String,
    lags: Vec<f64>,
    reference_gap: Option<f64>,
    reference_error: Option<ErrorJson>,
    mean_rate: Option<f64>,
    /// `|mean_rate - reference_gap| / reference_gap`.
    relative_error: Option<f64>,
    chains: Vec<ChainReport>,
}

fn analyse(chain: usize, path: &ZigzagPath, lags: &[f64], bins: usize) -> Result<ChainReport, Error> {
    let marginal = empirical_marginal(path, bins)?;
    let acf = autocorrelation(path, |x, _| x, lags);
    let fit = acf.as_ref().map_err(Clone::clone).and_then(|a| fit_envelope_decay(lags, a, ACF_FLOOR));
    Ok(ChainReport {
        chain,
        stream: path.stream(),
        switches: path.switches(),
        positive_fraction: path.positive_fraction(),
        ks: marginal.ks,
        acf_rate: fit.as_ref().ok().map(|f| f.rate),
        acf_intercept: fit.as_ref().ok().map(|f| f.intercept),
        peaks: fit
            .as_ref()
            .map(|f| f.peaks.iter().map(|&(lag, value)| Peak { lag, value }).collect())
            .unwrap_or_default(),
        fit_error: fit.as_ref().err().map(Into::into),
        acf: acf.unwrap_or_default(),
        marginal: MarginalJson { edges: marginal.edges, masses: marginal.masses },
    })
}

fn reference_gap(model: &PotentialModel, cfg: &RunConfig) -> Result<f64, Error> {
    parallel::compute_spectrum(model, &spectrum_config(cfg))?.gap.ok_or(Error::GapUndetermined)
}

fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.model()?;
    let spec = SwitchingRateSpec::canonical();
    let n = (cfg.max_lag / LAG_STEP).round() as usize;
    let lags: Vec<f64> = (0..=n).map(|i| i as f64 * LAG_STEP).collect();

    let (reference, runs) = thread::scope(|s| {
        let reference = s.spawn(|| reference_gap(&model, cfg));
        let runs = parallel::map_indexed(cfg.chains, |chain| {
            let path = simulate_stream(&model, &spec, cfg.x0, Velocity::Plus, cfg.horizon, cfg.seed, chain as u64)?;
            let report = analyse(chain, &path, &lags, cfg.bins)?;
            Ok::<_, Error>((path, report))
        });
        (reference.join().expect("reference spectrum thread"), runs)
    });
    let mut paths = Vec::with_capacity(runs.len());
    let mut chains = Vec::with_capacity(runs.len());
    for r in runs {
        let (p, c) = r?;
        paths.push(p);
        chains.push(c);
    }

    if let Some(path) = &cfg.csv {
        let rows = paths.iter().enumerate().flat_map(|(k, p)| {
            p.events()
                .iter()
                .map(move |e| vec![k.to_string(), num(e.t), num(e.x), format!("{}", e.theta.sign() as i32)])
        });
        write_text(Some(path), &csv_text(&["chain", "t", "x", "theta"], rows)?)?;
    }

    let rates: Vec<f64> = chains.iter().filter_map(|c| c.acf_rate).collect();
    let mean_rate = (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64);
    let reference_gap = reference.as_ref().ok().copied();
    let report = SimulateReport {
        config: cfg,
        potential: model.descriptor(),
        relative_error: mean_rate.zip(reference_gap).map(|(r, g)| (r - g).abs() / g),
        lags,
        reference_gap,
        reference_error: reference.as_ref().err().map(Into::into),
        mean_rate,
        chains,
    };
    write_text(cfg.out.as_deref(), &to_json(&report))
}
