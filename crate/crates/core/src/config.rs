//! Experiment files and the batch runner behind the `spinbus` binary.
//!
//! A run is described by one TOML file:
//!
//! ```toml
//! command = "fidelity"          # evolve | fidelity | optimize | noise | twoway
//!
//! [layout]
//! chain_length = 4
//! pair_count = 1
//!
//! [params]                      # fixed Hamiltonian (all but optimize)
//! j0 = 0.04
//! h0 = 0.0
//! h = [0.1]
//!
//! [run]                         # optional
//! times = [482.0]               # or time_range = { start = 0, end = 500, step = 0.25 }
//! policy = { kind = "plus" }
//! convention = "calibrated"
//! ```
//!
//! `optimize` takes a `[strategy]` table instead of `[params]`, `noise` a
//! `[noise]` table with the dephasing rates, `twoway` and `evolve` the
//! register inputs as labels `"0"`, `"1"`, `"+"` or `"-"`. Unknown keys are
//! rejected. Artifacts are named after a hash of the effective config, so
//! identical inputs always produce identical files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{prepare_propagator, Method};
use crate::gates::{SpectatorPolicy, TargetConvention};
use crate::hamiltonian::{build_hamiltonian, register_sectors, HamiltonianParams};
use crate::noise::{gamma_curve, Integrator, NoiseSpec};
use crate::optimize::{evaluate_point, optimize, policy_sectors, Range, StrategySpec};
use crate::output::{artifact_path, config_hash, fmt_sig, write_csv, write_json};
use crate::system::{encode_product_state, qubit, RegisterState, SystemLayout};
use crate::twoway::{transmission_and_crosstalk, TwoWayScenario};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Evolve,
    Fidelity,
    Optimize,
    Noise,
    Twoway,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Fidelity => "fidelity",
            Command::Optimize => "optimize",
            Command::Noise => "noise",
            Command::Twoway => "twoway",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub chain_length: usize,
    pub pair_count: usize,
}

/// Options shared by the fixed-parameter commands.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    /// Explicit ascending times; takes precedence over `time_range`.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub time_range: Option<Range>,
    #[serde(default)]
    pub policy: SpectatorPolicy,
    #[serde(default)]
    pub convention: TargetConvention,
    #[serde(default)]
    pub method: Method,
}

impl RunOptions {
    pub fn time_grid(&self, default: Range) -> Result<Vec<f64>> {
        let t = match (&self.times, &self.time_range) {
            (Some(t), _) => t.clone(),
            (None, Some(r)) => {
                r.validate()?;
                r.values()
            }
            (None, None) => default.values(),
        };
        if t.is_empty() {
            return Err(Error::Config("time grid is empty".into()));
        }
        if t.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || t.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("times must be finite, ≥ 0 and ascending".into()));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Dephasing rates `γ/J`.
    pub gammas: Vec<f64>,
    /// Gate duration; if absent, the noiseless optimum over the run's time
    /// grid is used.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "yes")]
    pub include_registers: bool,
}

fn yes() -> bool {
    true
}

/// Per-qubit register inputs as labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterConfig {
    pub a: Vec<String>,
    pub b: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub layout: LayoutConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: Option<HamiltonianParams>,
    #[serde(default)]
    pub strategy: Option<StrategySpec>,
    #[serde(default)]
    pub run: RunOptions,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    /// Inputs for `evolve` (`a`, `b`) and `twoway` (`a` = ψ, `b` = φ).
    #[serde(default)]
    pub registers: Option<RegisterConfig>,
}

fn default_times() -> Range {
    Range {
        start: 0.0,
        end: 500.0,
        step: 0.25,
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn parse_qubit(label: &str) -> Result<[C64; 2]> {
    match label {
        "0" => Ok(qubit::ZERO),
        "1" => Ok(qubit::ONE),
        "+" => Ok(qubit::PLUS),
        "-" => Ok(qubit::MINUS),
        other => Err(Error::Config(format!("unknown qubit label {other:?}; use 0, 1, + or -"))),
    }
}

fn parse_register(labels: &[String]) -> Result<Vec<[C64; 2]>> {
    labels.iter().map(|l| parse_qubit(l)).collect()
}

impl ExperimentConfig {
    /// Applies a seed override to the config and every seeded component.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = Some(s);
        }
        if let Some(s) = self.seed {
            let reseed = |p: &mut SpectatorPolicy| {
                if let SpectatorPolicy::HaarMean { seed, .. } = p {
                    *seed = s;
                }
            };
            reseed(&mut self.run.policy);
            if let Some(st) = self.strategy.as_mut() {
                reseed(&mut st.policy);
            }
        }
        self
    }

    pub fn layout(&self) -> Result<SystemLayout> {
        SystemLayout::new(self.layout.chain_length, self.layout.pair_count)
            .map_err(|e| Error::Config(format!("layout: {e}")))
    }

    fn params(&self, layout: &SystemLayout) -> Result<&HamiltonianParams> {
        let p = self
            .params
            .as_ref()
            .ok_or_else(|| Error::Config(format!("command {} needs a [params] table", self.command.name())))?;
        p.validate_for(layout).map_err(|e| Error::Config(format!("params: {e}")))?;
        Ok(p)
    }

    fn registers(&self, layout: &SystemLayout) -> Result<RegisterState> {
        let r = self
            .registers
            .as_ref()
            .ok_or_else(|| Error::Config(format!("command {} needs a [registers] table", self.command.name())))?;
        let (a, b) = (parse_register(&r.a)?, parse_register(&r.b)?);
        if a.len() != layout.pair_count() || b.len() != layout.pair_count() {
            return Err(Error::Config(format!("registers need {} labels on each side", layout.pair_count())));
        }
        RegisterState::new(a, b)
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<()> {
        let layout = self.layout()?;
        match self.command {
            Command::Optimize => {
                let s = self
                    .strategy
                    .as_ref()
                    .ok_or_else(|| Error::Config("command optimize needs a [strategy] table".into()))?;
                s.validate(&layout).map_err(|e| Error::Config(format!("strategy: {e}")))?;
            }
            _ => {
                self.params(&layout)?;
                self.run.time_grid(default_times())?;
            }
        }
        match self.command {
            Command::Evolve | Command::Twoway => {
                self.registers(&layout)?;
            }
            Command::Noise => {
                let n = self
                    .noise
                    .as_ref()
                    .ok_or_else(|| Error::Config("command noise needs a [noise] table".into()))?;
                if n.gammas.is_empty() {
                    return Err(Error::Config("noise.gammas is empty".into()));
                }
                for &g in &n.gammas {
                    self.noise_spec(n, g).map_err(|e| Error::Config(format!("noise: {e}")))?;
                }
                if let Some(t) = n.tau {
                    if !(t.is_finite() && t >= 0.0) {
                        return Err(Error::Config("noise.tau must be ≥ 0".into()));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn noise_spec(&self, n: &NoiseConfig, gamma: f64) -> Result<NoiseSpec> {
        let spec = NoiseSpec {
            gamma,
            dt: n.dt,
            integrator: n.integrator,
            include_registers: n.include_registers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub line: String,
    pub artifacts: Vec<PathBuf>,
}

fn pair_columns(prefix: &str, m: usize) -> Vec<String> {
    (1..=m).map(|nu| format!("{prefix}{nu}")).collect()
}

/// Executes a validated config, writing artifacts into `out`.
pub fn run(config: &ExperimentConfig, out: &Path, verbose: bool) -> Result<RunSummary> {
    config.validate()?;
    std::fs::create_dir_all(out)?;
    let layout = config.layout()?;
    let m = layout.pair_count();
    let hash = config.hash()?;
    let stem = config.command.name();
    let csv = artifact_path(out, stem, &hash, "csv");
    let json = artifact_path(out, stem, &hash, "json");
    let log = |msg: &str| {
        if verbose {
            eprintln!("[{stem}] {msg}");
        }
    };
    let opts = &config.run;

    let line = match config.command {
        Command::Optimize => {
            let spec = config.strategy.as_ref().expect("validated");
            log(&format!("searching {} grid points", spec.axes(&layout).iter().map(Vec::len).product::<usize>()));
            let r = optimize(&layout, spec)?;
            let mut header = vec![match spec.kind {
                crate::optimize::Strategy::S1 => "j0".to_string(),
                crate::optimize::Strategy::S2 => "h0".to_string(),
            }];
            header.extend(pair_columns("h", m));
            header.extend(["Jtau".to_string(), "F".to_string()]);
            header.extend(pair_columns("F", m));
            let rows: Vec<Vec<f64>> = r
                .landscape
                .iter()
                .map(|rec| {
                    let mut row = vec![match spec.kind {
                        crate::optimize::Strategy::S1 => rec.params.j0,
                        crate::optimize::Strategy::S2 => rec.params.h0,
                    }];
                    row.extend(&rec.params.h);
                    row.push(rec.tau);
                    row.push(rec.fidelity);
                    row.extend(&rec.per_pair);
                    row
                })
                .collect();
            write_csv(&csv, &header, &rows)?;
            let doc = OptimumDocument {
                strategy: r.strategy,
                policy: spec.policy,
                convention: spec.convention,
                best: r.best.clone(),
                failures: r.failures.clone(),
            };
            write_json(&json, &doc)?;
            let h: Vec<String> = r.best.params.h.iter().map(|&x| fmt_sig(x)).collect();
            format!(
                "optimize: F={:.6} tau={} j0={} h0={} h=[{}]",
                r.best.fidelity,
                fmt_sig(r.best.tau),
                fmt_sig(r.best.params.j0),
                fmt_sig(r.best.params.h0),
                h.join(", ")
            )
        }
        Command::Fidelity => {
            let p = config.params(&layout)?;
            let times = opts.time_grid(default_times())?;
            let prop = prepare_propagator(build_hamiltonian(&layout, p, &policy_sectors(&layout, &opts.policy))?, opts.method)?;
            log("propagator ready");
            let mut rows = Vec::with_capacity(times.len());
            crate::gates::transfer_series(&layout, &prop, &opts.policy, &times, |ti, ts| {
                let per = ts
                    .iter()
                    .map(|t| crate::gates::score_transfer(t, opts.convention, layout.chain_length()))
                    .collect::<Result<Vec<_>>>()?;
                let mean = per.iter().sum::<f64>() / m as f64;
                let mut row = vec![times[ti], mean];
                row.extend(per);
                rows.push(row);
                Ok(())
            })?;
            let mut header = vec!["Jt".to_string(), "F".to_string()];
            header.extend(pair_columns("F", m));
            write_csv(&csv, &header, &rows)?;
            let best = evaluate_point(&layout, p, &times, &opts.policy, opts.convention, opts.method)?;
            write_json(&json, &best)?;
            format!("fidelity: F={:.6} tau={} per_pair={:?}", best.fidelity, best.tau, best.per_pair)
        }
        Command::Noise => {
            let p = config.params(&layout)?;
            let n = config.noise.as_ref().expect("validated");
            let tau = match n.tau {
                Some(t) => t,
                None => {
                    let times = opts.time_grid(default_times())?;
                    let best = evaluate_point(&layout, p, &times, &opts.policy, opts.convention, Method::Spectral)?;
                    log(&format!("noiseless optimum tau={} F={:.6}", best.tau, best.fidelity));
                    best.tau
                }
            };
            let prop = prepare_propagator(build_hamiltonian(&layout, p, &policy_sectors(&layout, &opts.policy))?, Method::Spectral)?;
            let base = config.noise_spec(n, 0.0)?;
            let curve = gamma_curve(&layout, &prop, &opts.policy, tau, &n.gammas, &base, opts.convention)?;
            let mut header = vec!["gamma_over_J".to_string(), "F_mean".to_string()];
            header.extend(pair_columns("F_", m));
            let rows: Vec<Vec<f64>> = curve
                .iter()
                .map(|(g, r)| {
                    let mut row = vec![*g, r.mean];
                    row.extend(&r.per_pair);
                    row
                })
                .collect();
            write_csv(&csv, &header, &rows)?;
            let reports: Vec<NoisePoint> = curve
                .iter()
                .map(|(g, r)| NoisePoint {
                    gamma: *g,
                    report: r.clone(),
                })
                .collect();
            write_json(&json, &NoiseDocument { tau, curve: reports })?;
            let list: Vec<String> = curve.iter().map(|(g, r)| format!("{g}:{:.6}", r.mean)).collect();
            format!("noise: tau={tau} F(gamma)=[{}]", list.join(", "))
        }
        Command::Twoway => {
            let p = config.params(&layout)?;
            let regs = config.registers(&layout)?;
            let scenario = TwoWayScenario::new(regs.a, regs.b)?;
            let times = opts.time_grid(default_times())?;
            let prop = prepare_propagator(build_hamiltonian(&layout, p, &register_sectors(&layout))?, opts.method)?;
            let series = transmission_and_crosstalk(&layout, &prop, &scenario, &times)?;
            let rows: Vec<Vec<f64>> = series
                .points
                .iter()
                .map(|pt| vec![pt.time, pt.transmission, pt.crosstalk])
                .collect();
            write_csv(&csv, &["Jt".into(), "transmission".into(), "crosstalk".into()], &rows)?;
            write_json(&json, &series.peak)?;
            format!(
                "twoway: peak transmission={:.6} at t={} crosstalk={:.6}",
                series.peak.transmission, series.peak.time, series.peak.crosstalk
            )
        }
        Command::Evolve => {
            let p = config.params(&layout)?;
            let regs = config.registers(&layout)?;
            let start = encode_product_state(&layout, &regs)?;
            let times = opts.time_grid(default_times())?;
            let prop = prepare_propagator(build_hamiltonian(&layout, p, &register_sectors(&layout))?, opts.method)?;
            let energy = prop.energy(&start)?;
            let mut sites = Vec::new();
            let mut header = vec!["Jt".to_string(), "norm".to_string(), "chain".to_string()];
            for nu in 1..=m {
                sites.push(layout.a_site(nu));
                header.push(format!("A{nu}"));
            }
            for nu in 1..=m {
                sites.push(layout.b_site(nu));
                header.push(format!("B{nu}"));
            }
            let chain_mask = (1..=layout.chain_length()).fold(0u64, |acc, i| acc | 1 << layout.chain_site(i));
            let mut rows = Vec::with_capacity(times.len());
            let mut drift: f64 = 0.0;
            prop.for_each_time(std::slice::from_ref(&start), &times, |ti, s| {
                let s = &s[0];
                let mut occ = vec![0.0; sites.len()];
                let mut chain = 0.0;
                for (&k, v) in s.sectors() {
                    let basis = crate::system::SectorBasis::new(layout.total_sites(), k)?;
                    for (a, &bits) in v.iter().zip(basis.states()) {
                        let w = a.norm_sqr();
                        if w == 0.0 {
                            continue;
                        }
                        chain += w * (bits & chain_mask).count_ones() as f64;
                        for (o, &site) in occ.iter_mut().zip(&sites) {
                            if bits >> site & 1 == 1 {
                                *o += w;
                            }
                        }
                    }
                }
                let norm = s.norm_sqr();
                drift = drift.max((norm - 1.0).abs());
                let mut row = vec![times[ti], norm, chain];
                row.extend(occ);
                rows.push(row);
                Ok(())
            })?;
            write_csv(&csv, &header, &rows)?;
            write_json(
                &json,
                &EvolveDocument {
                    energy,
                    max_norm_drift: drift,
                    steps: times.len(),
                },
            )?;
            format!("evolve: {} times, energy={energy:.6}, max norm drift={drift:.2e}", times.len())
        }
    };
    log(&format!("wrote {} and {}", csv.display(), json.display()));
    Ok(RunSummary {
        line,
        artifacts: vec![csv, json],
    })
}

/// JSON written by `optimize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumDocument {
    pub strategy: crate::optimize::Strategy,
    pub policy: SpectatorPolicy,
    pub convention: TargetConvention,
    pub best: crate::optimize::PointRecord,
    pub failures: Vec<(Vec<f64>, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NoisePoint {
    gamma: f64,
    report: crate::gates::FidelityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NoiseDocument {
    tau: f64,
    curve: Vec<NoisePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EvolveDocument {
    energy: f64,
    max_norm_drift: f64,
    steps: usize,
}
