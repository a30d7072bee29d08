use std::f64::consts::{E, PI};

use lgc_core::analytics;
use lgc_core::construction_a;
use lgc_core::sampler;
use lgc_core::scheme::{self, GaussianParams, PoltyrevPoint, SimResult};
use lgc_core::{standard_lattice, Lattice, RngSeed, Shift, StandardLattice};

use crate::config::{Axis, Command, ExperimentConfig, LatticeSource};
use crate::CliError;

/// Everything a run writes: the main CSV plus side files keyed by extension.
pub struct Artifact {
    pub header: String,
    pub rows: Vec<String>,
    pub extras: Vec<(&'static str, String)>,
}

const FLATNESS_HEADER: &str = "lattice,n,sigma,gsnr,theta,truncation_bound,epsilon";
const SANDWICH_HEADER: &str =
    "lattice,n,sigma0,sigma,V,mu,trials,scheme_errors,poltyrev_errors,both_errors,\
ratio,ratio_ci_low,ratio_ci_high,eps1,eps2,lo,hi,pass";
const EXPONENT_HEADER: &str = "mu,exponent,n,bound";
const RATE_HEADER: &str = "lattice,n,snr,eps,eps_prime,eps_dprime,capacity,rate_lower";

fn axes(cmd: Command) -> &'static [Axis] {
    match cmd {
        Command::Flatness => &[Axis::Sigma],
        Command::Simulate | Command::Sandwich => {
            &[Axis::Sigma0, Axis::Sigma, Axis::Snr, Axis::Mu, Axis::Volume]
        }
        Command::Exponent => &[Axis::Mu],
        Command::Rate => &[Axis::Sigma0, Axis::Sigma, Axis::Snr],
        Command::Sample | Command::Ensemble => &[],
    }
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let Some((axis, values)) = &cfg.sweep else {
        return single(cfg, 0);
    };
    if !axes(cfg.command).contains(axis) {
        return Err(CliError::config(format!(
            "`{}` cannot sweep `{}`",
            cfg.command,
            axis.key()
        )));
    }
    let mut out: Option<Artifact> = None;
    for (i, v) in values.iter().enumerate() {
        let a = single(&cfg.at(*axis, *v), i as u64)?;
        match &mut out {
            None => out = Some(a),
            Some(acc) => acc.rows.extend(a.rows),
        }
    }
    let mut out = out.expect("grid is nonempty");
    out.extras.push(("dat", plot_data(&out.header, &out.rows)));
    Ok(out)
}

/// Whitespace-separated copy of a CSV table with a commented header.
fn plot_data(header: &str, rows: &[String]) -> String {
    let mut s = format!("# {}\n", header.replace(',', " "));
    for r in rows {
        s.push_str(&r.replace(',', " "));
        s.push('\n');
    }
    s
}

fn load_lattice(cfg: &ExperimentConfig) -> Result<Lattice, CliError> {
    match &cfg.lattice {
        None => Err(CliError::config("missing key `lattice` or `lattice_file`")),
        Some(LatticeSource::Name(name)) => {
            let std: StandardLattice = name.parse().map_err(CliError::from_lattice)?;
            standard_lattice(std).map_err(CliError::from_lattice)
        }
        Some(LatticeSource::File(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|_| CliError::config("lattice file not found"))?;
            let label = path
                .file_stem()
                .map_or("custom".into(), |s| s.to_string_lossy().into_owned());
            Ok(Lattice::from_text(&text)
                .map_err(CliError::from_lattice)?
                .with_label(&label))
        }
    }
}

fn shift_for(cfg: &ExperimentConfig, n: usize) -> Result<Shift, CliError> {
    match &cfg.shift {
        None => Ok(Shift::zero(n)),
        Some(c) if c.len() == n => Ok(Shift::new(c.clone())),
        Some(c) => Err(CliError::config(format!(
            "`shift` has {} entries, lattice dimension is {n}",
            c.len()
        ))),
    }
}

fn params(cfg: &ExperimentConfig) -> Result<GaussianParams, CliError> {
    let (s0, s) = cfg.sigmas()?;
    match cfg.snr {
        Some(snr) => scheme::params_from_variances(snr, 1.0),
        None => scheme::make_params(s0, s),
    }
    .map_err(CliError::from_lattice)
}

/// Rescales the lattice if the config fixes its volume, directly or through
/// `ε″` or `μ`.
fn design(
    lattice: Lattice,
    cfg: &ExperimentConfig,
    p: &GaussianParams,
) -> Result<Lattice, CliError> {
    let n = lattice.dim();
    let volume = if let Some(v) = cfg.volume {
        Some(v)
    } else if let Some(mu) = cfg.mu {
        Some((2.0 * PI * E * p.sigma_tilde * p.sigma_tilde * mu).powf(n as f64 / 2.0))
    } else if let Some(ed) = cfg.eps_dprime {
        Some(scheme::design_volume(p.sigma_tilde, ed, n).map_err(CliError::from_lattice)?)
    } else {
        None
    };
    match volume {
        Some(v) => lattice.with_volume(v).map_err(CliError::from_lattice),
        None => Ok(lattice),
    }
}

fn seed(cfg: &ExperimentConfig, index: u64) -> RngSeed {
    RngSeed::new(cfg.seed, cfg.stream.wrapping_add(index))
}

fn single(cfg: &ExperimentConfig, index: u64) -> Result<Artifact, CliError> {
    let lat = CliError::from_lattice;
    let artifact = |header: &str, rows: Vec<String>| Artifact {
        header: header.into(),
        rows,
        extras: vec![],
    };
    match cfg.command {
        Command::Flatness => {
            let l = load_lattice(cfg)?;
            let sigma = cfg
                .sigma
                .ok_or_else(|| CliError::config("missing key `sigma`"))?;
            let f = analytics::flatness(&l, sigma).map_err(lat)?;
            let mut row = format!(
                "{},{},{},{},{},{},{}",
                l.label(),
                l.dim(),
                sigma,
                f.gsnr,
                f.theta.value,
                f.theta.truncation_bound,
                f.epsilon
            );
            let mut header = FLATNESS_HEADER.to_string();
            if let Some(g) = cfg.grid_points {
                header.push_str(",epsilon_direct");
                let d = analytics::flatness_direct(&l, sigma, g).map_err(lat)?;
                row.push_str(&format!(",{d}"));
            }
            Ok(artifact(&header, vec![row]))
        }
        Command::Sample => {
            let l = load_lattice(cfg)?;
            let s0 = cfg
                .sigma0
                .ok_or_else(|| CliError::config("missing key `sigma0`"))?;
            let spec = sampler::build_spec(&l, s0, &shift_for(cfg, l.dim())?).map_err(lat)?;
            let pts = sampler::sample(&spec, seed(cfg, index), cfg.count).map_err(lat)?;
            let csv = sampler::samples_to_csv(&pts);
            let mut lines = csv.lines().map(str::to_string);
            let header = lines.next().unwrap_or_default();
            Ok(Artifact {
                header,
                rows: lines.collect(),
                extras: vec![("spec.json", spec.to_json())],
            })
        }
        Command::Simulate => {
            let p = params(cfg)?;
            let l = design(load_lattice(cfg)?, cfg, &p)?;
            let r = scheme::simulate_error(
                &l,
                &shift_for(cfg, l.dim())?,
                &p,
                cfg.trials,
                seed(cfg, index),
            )
            .map_err(lat)?;
            Ok(artifact(SimResult::csv_header(), vec![r.to_csv_row()]))
        }
        Command::Sandwich => {
            let p = params(cfg)?;
            let l = design(load_lattice(cfg)?, cfg, &p)?;
            let r = scheme::sandwich_check(
                &l,
                &shift_for(cfg, l.dim())?,
                &p,
                cfg.trials,
                seed(cfg, index),
            )
            .map_err(lat)?;
            let row = format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.scheme.lattice,
                r.scheme.n,
                p.sigma0,
                p.sigma,
                l.volume(),
                r.scheme.mu,
                cfg.trials,
                r.scheme.errors,
                r.poltyrev.errors,
                r.both_errors,
                r.ratio,
                r.ratio_ci.0,
                r.ratio_ci.1,
                r.eps1,
                r.eps2,
                r.lo,
                r.hi,
                r.pass
            );
            Ok(artifact(SANDWICH_HEADER, vec![row]))
        }
        Command::Exponent => {
            let mu = cfg.mu.ok_or_else(|| CliError::config("missing key `mu`"))?;
            let n = match (cfg.n, &cfg.lattice) {
                (Some(n), _) => n,
                (None, Some(_)) => load_lattice(cfg)?.dim(),
                (None, None) => return Err(CliError::config("missing key `n`")),
            };
            let pt = PoltyrevPoint::new(mu, n).map_err(lat)?;
            Ok(artifact(
                EXPONENT_HEADER,
                vec![format!("{},{},{},{}", pt.mu, pt.exponent, pt.n, pt.bound)],
            ))
        }
        Command::Rate => {
            let p = params(cfg)?;
            let ed = cfg.eps_dprime.unwrap_or(scheme::DEFAULT_EPS_DPRIME);
            let (label, budget) = match cfg.eps {
                Some(eps) => {
                    let n = cfg.n.ok_or_else(|| CliError::config("`eps` needs `n`"))?;
                    (
                        "-".to_string(),
                        scheme::rate_lower_bound(p.snr, eps, ed, n).map_err(lat)?,
                    )
                }
                None => {
                    let l = load_lattice(cfg)?;
                    (
                        l.label().to_string(),
                        scheme::rate_budget(&l, &p, ed).map_err(lat)?,
                    )
                }
            };
            let row = format!(
                "{},{},{},{},{},{},{},{}",
                label,
                budget.n,
                budget.snr,
                budget.eps,
                budget.eps_prime,
                budget.eps_dprime,
                budget.capacity,
                budget.rate_lower
            );
            Ok(artifact(RATE_HEADER, vec![row]))
        }
        Command::Ensemble => {
            let need = |v: Option<u64>, k: &str| {
                v.ok_or_else(|| CliError::config(format!("missing key `{k}`")))
            };
            let p = need(cfg.p, "p")?;
            let n = need(cfg.n.map(|v| v as u64), "n")? as usize;
            let k = need(cfg.k.map(|v| v as u64), "k")? as usize;
            let sigma = cfg
                .sigma
                .ok_or_else(|| CliError::config("missing key `sigma`"))?;
            let entries = construction_a::ensemble_search(
                p,
                n,
                k,
                cfg.scale,
                sigma,
                cfg.delta,
                cfg.samples,
                seed(cfg, index),
            )
            .map_err(lat)?;
            let csv = construction_a::ensemble_csv(&entries);
            let mut lines = csv.lines().map(str::to_string);
            let header = lines.next().unwrap_or_default();
            let extras = entries
                .first()
                .map(|e| vec![("best.code", e.code.to_text())])
                .unwrap_or_default();
            Ok(Artifact {
                header,
                rows: lines.collect(),
                extras,
            })
        }
    }
}
