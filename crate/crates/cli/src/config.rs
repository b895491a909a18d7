//! Campaign configuration: TOML in, validated [`Campaign`] out.
//!
//! Every section rejects unknown keys. Defaults are filled in on load, and
//! [`Campaign::resolved`] serializes back to a config that reproduces the run.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wvkerr_core::ensemble::{load_pmf, poissonian, sine_modulated, sine_modulated_with_std, MIN_QUADRATURE_NODES};
use wvkerr_core::experiments::{validate_study, CouplingAxis, ScalingOptions, SlopeSource, VariancePolicy};
use wvkerr_core::quantum::im_weak_value_exact;
use wvkerr_core::{Error as CoreError, InteractionParams, ProbeEnsemble, TrialConfig, WeakValueConvention};

use crate::error::{CliError, CliResult};

/// Seeds must fit a TOML integer so that the echoed config stays loadable.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SweepG,
    SweepDn,
    SweepEps,
    Scaling,
    Fisher,
    Batch,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SweepG => "sweep-g",
            Command::SweepDn => "sweep-dn",
            Command::SweepEps => "sweep-eps",
            Command::Scaling => "scaling",
            Command::Fisher => "fisher",
            Command::Batch => "batch",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_tail_mass() -> f64 {
    1e-12
}

fn default_true() -> bool {
    true
}

fn default_nodes() -> usize {
    128
}

fn default_sweep_fraction() -> f64 {
    0.5
}

fn default_replications() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnsembleSpec {
    Poissonian {
        mean_n: f64,
        #[serde(default = "default_tail_mass")]
        tail_mass: f64,
    },
    SineModulated {
        mean_n: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        depth: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        std_dn: Option<f64>,
        #[serde(default = "default_true")]
        shot_noise: bool,
        #[serde(default = "default_nodes")]
        quadrature_nodes: usize,
    },
    /// Two-column text file `n weight`, resolved against the config's
    /// directory.
    Pmf { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    #[serde(default)]
    pub g: f64,
    #[serde(default)]
    pub g_spm: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSpec {
    pub total_trials: u64,
    #[serde(default)]
    pub readout_noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_values: Option<Vec<f64>>,
    /// Delays in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delays: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_peak: Option<f64>,
    /// Pulse-overlap width in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDnSpec {
    pub dn_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEpsSpec {
    pub eps_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    pub grid: Vec<f64>,
    pub policy: VariancePolicy,
    #[serde(default = "default_sweep_fraction")]
    pub sweep_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freeze_above_n: Option<f64>,
    #[serde(default)]
    pub slope_source: SlopeSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_postselected: Option<u64>,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FisherSpec {
    /// Mean photon numbers; without it the `[ensemble]` section gives a
    /// single row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<VariancePolicy>,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub convention: WeakValueConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

/// The config file as written, and, once resolved, as echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    pub interaction: InteractionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<TrialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_g: Option<SweepGSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_dn: Option<SweepDnSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_eps: Option<SweepEpsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher: Option<FisherSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<BatchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

/// Validated work for one command.
#[derive(Debug, Clone)]
pub enum Plan {
    SweepG { base: TrialConfig, axis: CouplingAxis },
    SweepDn { base: TrialConfig, dn_values: Vec<f64> },
    SweepEps { base: TrialConfig, eps_values: Vec<f64> },
    Scaling {
        base: TrialConfig,
        grid: Vec<f64>,
        policy: VariancePolicy,
        options: ScalingOptions,
    },
    Fisher {
        ensembles: Vec<ProbeEnsemble>,
        params: InteractionParams,
        uses: u64,
    },
    Batch {
        config: TrialConfig,
        replications: usize,
        convention: WeakValueConvention,
    },
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub command: Command,
    pub seed: u64,
    /// The config with defaults, command and seed filled in.
    pub resolved: ConfigFile,
    pub plan: Plan,
}

impl Campaign {
    pub fn resolved_toml(&self) -> String {
        toml::to_string(&self.resolved).expect("resolved config is representable in TOML")
    }
}

/// Overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

/// Parses TOML text; `origin` names the source in diagnostics.
pub fn parse_config(text: &str, origin: &str) -> CliResult<ConfigFile> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        CliError::Parse {
            path: origin.to_string(),
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })
}

/// Reads, parses and validates a config file.
pub fn load_config(path: &Path, overrides: Overrides) -> CliResult<Campaign> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let raw = parse_config(&text, &path.display().to_string())?;
    let base_dir = path.parent().unwrap_or(Path::new("."));
    resolve(raw, base_dir, overrides)
}

/// Library errors met during validation, attributed to `section`.
fn at(section: &'static str) -> impl Fn(CoreError) -> CliError {
    move |err| match err {
        CoreError::PmfParse { .. } | CoreError::Io(_) | CoreError::InvalidParameter { .. } => {
            CliError::from_core(section, err)
        }
        other => CliError::validation(section, other.to_string()),
    }
}

fn require<'a, T>(value: &'a Option<T>, field: &str, command: Command) -> CliResult<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| CliError::validation(field, format!("section is required by the {command} command")))
}

fn check_list(values: &[f64], field: &str, min_len: usize) -> CliResult<()> {
    if values.len() < min_len {
        return Err(CliError::validation(
            field,
            format!("needs at least {min_len} values, got {}", values.len()),
        ));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::validation(field, format!("values must be finite, got {v}")));
    }
    Ok(())
}

fn check_nodes(nodes: usize, field: &str) -> CliResult<()> {
    if nodes < MIN_QUADRATURE_NODES {
        return Err(CliError::validation(
            field,
            format!("must be at least {MIN_QUADRATURE_NODES}, got {nodes}"),
        ));
    }
    Ok(())
}

fn build_ensemble(spec: &EnsembleSpec, base_dir: &Path) -> CliResult<(ProbeEnsemble, EnsembleSpec)> {
    match spec {
        EnsembleSpec::Poissonian { mean_n, tail_mass } => {
            if !(*tail_mass > 0.0 && *tail_mass < 1.0) {
                return Err(CliError::validation(
                    "ensemble.tail_mass",
                    format!("must lie in (0, 1), got {tail_mass}"),
                ));
            }
            Ok((poissonian(*mean_n, *tail_mass).map_err(at("ensemble"))?, spec.clone()))
        }
        EnsembleSpec::SineModulated {
            mean_n,
            depth,
            std_dn,
            shot_noise,
            quadrature_nodes,
        } => {
            check_nodes(*quadrature_nodes, "ensemble.quadrature_nodes")?;
            let ens = match (depth, std_dn) {
                (Some(d), None) => sine_modulated(*mean_n, *d, *shot_noise, *quadrature_nodes),
                (None, Some(s)) => sine_modulated_with_std(*mean_n, *s, *shot_noise, *quadrature_nodes),
                _ => {
                    return Err(CliError::validation(
                        "ensemble",
                        "sine-modulated needs exactly one of depth and std_dn",
                    ))
                }
            }
            .map_err(at("ensemble"))?;
            Ok((ens, spec.clone()))
        }
        EnsembleSpec::Pmf { path } => {
            let full = base_dir.join(path);
            let ens = load_pmf(&full).map_err(|e| match e {
                CoreError::PmfParse { line, message } => CliError::Parse {
                    path: full.display().to_string(),
                    line,
                    column: 1,
                    message,
                },
                CoreError::Io(message) => CliError::Io {
                    path: full.clone(),
                    message,
                },
                other => CliError::validation("ensemble.path", other.to_string()),
            })?;
            let absolute = std::fs::canonicalize(&full).map_err(|e| CliError::io(&full, e))?;
            Ok((ens, EnsembleSpec::Pmf { path: absolute }))
        }
    }
}

fn build_params(spec: &InteractionSpec) -> CliResult<InteractionParams> {
    let params = InteractionParams::new(spec.g, spec.g_spm, spec.epsilon).map_err(at("interaction"))?;
    im_weak_value_exact(spec.epsilon).map_err(|_| {
        CliError::validation(
            "interaction.epsilon",
            format!("post-selection is orthogonal to the pre-selection at epsilon = {}", spec.epsilon),
        )
    })?;
    Ok(params)
}

fn check_policy(policy: &VariancePolicy, field: &str) -> CliResult<()> {
    if let VariancePolicy::Proportional { ratio } = policy {
        if !(*ratio > 0.0 && *ratio <= std::f64::consts::FRAC_1_SQRT_2) {
            return Err(CliError::validation(
                format!("{field}.ratio"),
                format!("must lie in (0, 1/sqrt(2)] for sine modulation, got {ratio}"),
            ));
        }
    }
    Ok(())
}

/// Validates `raw` and builds the plan for its command.
pub fn resolve(raw: ConfigFile, base_dir: &Path, overrides: Overrides) -> CliResult<Campaign> {
    let command = match (overrides.command, raw.command) {
        (Some(cli), Some(file)) if cli != file => {
            return Err(CliError::validation(
                "command",
                format!("config is for {file} but {cli} was requested"),
            ))
        }
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => return Err(CliError::validation("command", "no command given")),
    };
    let seed = overrides.seed.or(raw.seed).ok_or_else(|| {
        CliError::validation("seed", "is required; pass --seed or --new-seed to pick one")
    })?;
    if seed > MAX_SEED {
        return Err(CliError::validation("seed", format!("must not exceed {MAX_SEED}, got {seed}")));
    }

    let mut resolved = raw.clone();
    resolved.command = Some(command);
    resolved.seed = Some(seed);
    let params = build_params(&raw.interaction)?;

    let ensemble = |raw: &ConfigFile, resolved: &mut ConfigFile| -> CliResult<ProbeEnsemble> {
        let spec = require(&raw.ensemble, "ensemble", command)?;
        let (ens, echoed) = build_ensemble(spec, base_dir)?;
        resolved.ensemble = Some(echoed);
        Ok(ens)
    };
    let trial_config = |ens: ProbeEnsemble, raw: &ConfigFile| -> CliResult<TrialConfig> {
        let t = require(&raw.trials, "trials", command)?;
        let mut c = TrialConfig::new(ens, params, t.total_trials, seed);
        c.readout_noise_std = t.readout_noise_std;
        c.validate().map_err(at("trials"))?;
        Ok(c)
    };

    let plan = match command {
        Command::SweepG => {
            let spec = require(&raw.sweep_g, "sweep_g", command)?;
            let axis = match spec {
                SweepGSpec {
                    g_values: Some(g),
                    delays: None,
                    g_peak: None,
                    tau_c: None,
                } => {
                    check_list(g, "sweep_g.g_values", 3)?;
                    CouplingAxis::Direct { g_values: g.clone() }
                }
                SweepGSpec {
                    g_values: None,
                    delays: Some(d),
                    g_peak: Some(g_peak),
                    tau_c: Some(tau_c),
                } => {
                    // Four Gaussian parameters plus one degree of freedom.
                    check_list(d, "sweep_g.delays", 5)?;
                    if !g_peak.is_finite() {
                        return Err(CliError::validation("sweep_g.g_peak", "must be finite"));
                    }
                    if !(*tau_c > 0.0 && tau_c.is_finite()) {
                        return Err(CliError::validation("sweep_g.tau_c", format!("must be positive, got {tau_c}")));
                    }
                    CouplingAxis::Delay {
                        delays: d.clone(),
                        g_peak: *g_peak,
                        tau_c: *tau_c,
                    }
                }
                _ => {
                    return Err(CliError::validation(
                        "sweep_g",
                        "give either g_values, or delays together with g_peak and tau_c",
                    ))
                }
            };
            let ens = ensemble(&raw, &mut resolved)?;
            Plan::SweepG {
                base: trial_config(ens, &raw)?,
                axis,
            }
        }
        Command::SweepDn => {
            let spec = require(&raw.sweep_dn, "sweep_dn", command)?;
            check_list(&spec.dn_values, "sweep_dn.dn_values", 3)?;
            let ens = ensemble(&raw, &mut resolved)?;
            let (shot, nodes) = match &ens {
                ProbeEnsemble::ModulatedContinuous(m) => (m.shot_noise, m.quadrature_nodes),
                ProbeEnsemble::DiscretePmf(_) => (true, wvkerr_core::experiments::sweeps::DEFAULT_SWEEP_NODES),
            };
            for (i, dn) in spec.dn_values.iter().enumerate() {
                sine_modulated_with_std(ens.mean_n(), *dn, shot, nodes)
                    .map_err(|e| CliError::validation(format!("sweep_dn.dn_values[{i}]"), e.to_string()))?;
            }
            Plan::SweepDn {
                base: trial_config(ens, &raw)?,
                dn_values: spec.dn_values.clone(),
            }
        }
        Command::SweepEps => {
            let spec = require(&raw.sweep_eps, "sweep_eps", command)?;
            check_list(&spec.eps_values, "sweep_eps.eps_values", 3)?;
            for (i, e) in spec.eps_values.iter().enumerate() {
                if !(*e > 0.0 && *e < std::f64::consts::PI) {
                    return Err(CliError::validation(
                        format!("sweep_eps.eps_values[{i}]"),
                        format!("must lie in (0, pi), got {e}"),
                    ));
                }
            }
            let ens = ensemble(&raw, &mut resolved)?;
            Plan::SweepEps {
                base: trial_config(ens, &raw)?,
                eps_values: spec.eps_values.clone(),
            }
        }
        Command::Scaling => {
            let spec = require(&raw.scaling, "scaling", command)?;
            check_policy(&spec.policy, "scaling.policy")?;
            check_nodes(spec.quadrature_nodes, "scaling.quadrature_nodes")?;
            let options = ScalingOptions {
                sweep_fraction: spec.sweep_fraction,
                freeze_above_n: spec.freeze_above_n,
                slope_source: spec.slope_source,
                target_postselected: spec.target_postselected,
                quadrature_nodes: spec.quadrature_nodes,
            };
            validate_study(&spec.grid, &options).map_err(at("scaling"))?;
            let mut ensembles = Vec::with_capacity(spec.grid.len());
            for (i, n) in spec.grid.iter().enumerate() {
                ensembles.push(
                    spec.policy
                        .ensemble(*n, spec.quadrature_nodes)
                        .map_err(|e| CliError::validation(format!("scaling.grid[{i}]"), e.to_string()))?,
                );
            }
            if raw.ensemble.is_some() {
                return Err(CliError::validation(
                    "ensemble",
                    "the scaling command builds its ensembles from scaling.policy; remove this section",
                ));
            }
            Plan::Scaling {
                base: trial_config(ensembles.swap_remove(0), &raw)?,
                grid: spec.grid.clone(),
                policy: spec.policy,
                options,
            }
        }
        Command::Fisher => {
            let spec = raw.fisher.clone().unwrap_or(FisherSpec {
                grid: None,
                policy: None,
                quadrature_nodes: default_nodes(),
            });
            check_nodes(spec.quadrature_nodes, "fisher.quadrature_nodes")?;
            let ensembles = match (&spec.grid, &spec.policy) {
                (Some(grid), Some(policy)) => {
                    check_policy(policy, "fisher.policy")?;
                    check_list(grid, "fisher.grid", 1)?;
                    let mut out = Vec::with_capacity(grid.len());
                    for (i, n) in grid.iter().enumerate() {
                        out.push(
                            policy
                                .ensemble(*n, spec.quadrature_nodes)
                                .map_err(|e| CliError::validation(format!("fisher.grid[{i}]"), e.to_string()))?,
                        );
                    }
                    out
                }
                (None, None) => vec![ensemble(&raw, &mut resolved)?],
                _ => {
                    return Err(CliError::validation(
                        "fisher",
                        "grid and policy must be given together",
                    ))
                }
            };
            resolved.fisher = Some(spec);
            let t = require(&raw.trials, "trials", command)?;
            if t.total_trials == 0 {
                return Err(CliError::validation("trials.total_trials", "must be at least 1"));
            }
            Plan::Fisher {
                ensembles,
                params,
                uses: t.total_trials,
            }
        }
        Command::Batch => {
            let spec = raw.batch.clone().unwrap_or(BatchSpec {
                replications: default_replications(),
                convention: WeakValueConvention::default(),
            });
            if spec.replications == 0 {
                return Err(CliError::validation("batch.replications", "must be at least 1"));
            }
            resolved.batch = Some(spec.clone());
            let ens = ensemble(&raw, &mut resolved)?;
            Plan::Batch {
                config: trial_config(ens, &raw)?,
                replications: spec.replications,
                convention: spec.convention,
            }
        }
    };
    Ok(Campaign {
        command,
        seed,
        resolved,
        plan,
    })
}
