use serde::Serialize;
use wvkerr_core::estimation::{
    estimate_g, fisher_classical, fisher_joint, information_bounds, mean_shift_linearized,
    postselected_mean_exact, qfi_mixed_bound, qfi_pure, cramer_rao_bound,
};
use wvkerr_core::experiments::{
    scaling_study, sweep_coupling, sweep_epsilon, sweep_variance, CouplingAxis, ScalingResult, SweepResult,
};
use wvkerr_core::montecarlo::{derive_seed, replicate, run_batch};
use wvkerr_core::quantum::{im_weak_value_exact, make_preselection};
use wvkerr_core::{Error as CoreError, InformationBounds, ShiftResult, TrialBatch, TrialConfig, WeakValueConvention};

use crate::config::{Campaign, Command, ConfigFile, Plan};
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Table, TableInfo, TABLE_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherRow {
    pub mean_n: f64,
    pub std_dn: f64,
    pub fisher_classical_per_trial: f64,
    pub fisher_joint_per_trial: f64,
    pub qfi_per_use: f64,
    pub qfi_mixed_bound_per_use: f64,
    pub uses: u64,
    /// `1/√(F ν̃)` from the post-selected readings; infinite when `F = 0`.
    pub classical_dg: f64,
    pub quantum_dg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub convention: WeakValueConvention,
    pub seeds: Vec<u64>,
    pub batches: Vec<TrialBatch>,
    /// `None` for a probe without spread, which carries no information on `g`.
    pub g_estimates: Vec<Option<f64>>,
    pub g_estimate_mean: Option<f64>,
    pub g_estimate_std: Option<f64>,
    pub exact: ShiftResult,
    pub linearized_delta_n_normalized: f64,
    pub bounds: Option<InformationBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CampaignResult {
    Sweep(SweepResult),
    Scaling(ScalingResult),
    Fisher { rows: Vec<FisherRow> },
    Batch(BatchReport),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub result: CampaignResult,
}

#[derive(Serialize)]
struct ResultRecord<'a> {
    artifact: &'static str,
    version: &'static str,
    command: Command,
    seed: u64,
    config: &'a ConfigFile,
    table: TableInfo,
    result: &'a CampaignResult,
}

impl Outcome {
    /// Record JSON: config echo, table layout and every numeric output.
    pub fn record_json(&self, campaign: &Campaign) -> String {
        let record = ResultRecord {
            artifact: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: campaign.command,
            seed: campaign.seed,
            config: &campaign.resolved,
            table: TableInfo {
                file: TABLE_FILE,
                columns: self.table.columns.clone(),
                rows: self.table.rows.len(),
            },
            result: &self.result,
        };
        serde_json::to_string_pretty(&record).expect("record serializes") + "\n"
    }
}

fn sim(err: CoreError) -> CliError {
    CliError::from_core("", err)
}

const BATCH_COLUMNS: [&str; 6] = [
    "delta_n_normalized",
    "standard_error_normalized",
    "sigma_photons",
    "postselected_count",
    "total_trials",
    "clamped_draws",
];

fn batch_cells(b: &TrialBatch) -> Vec<Cell> {
    vec![
        b.delta_n_normalized.into(),
        b.normalized_standard_error().into(),
        b.sigma.into(),
        b.postselected_count.into(),
        b.total_trials.into(),
        b.clamped_draws.into(),
    ]
}

fn sweep_table(leading: &[&'static str], result: &SweepResult, extra: impl Fn(usize) -> Vec<Cell>) -> Table {
    let mut columns = vec!["index"];
    columns.extend_from_slice(leading);
    columns.extend_from_slice(&BATCH_COLUMNS);
    let mut table = Table::new(columns);
    for (i, b) in result.batches.iter().enumerate() {
        let mut row = vec![Cell::from(i)];
        row.extend(extra(i));
        row.extend(batch_cells(b));
        table.push(row);
    }
    table
}

fn infinite_if_uninformative(r: wvkerr_core::Result<f64>) -> CliResult<f64> {
    match r {
        Ok(x) => Ok(x),
        Err(CoreError::NonpositiveInformation { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(sim(e)),
    }
}

fn run_fisher(
    ensembles: &[wvkerr_core::ProbeEnsemble],
    params: &wvkerr_core::InteractionParams,
    uses: u64,
) -> CliResult<Outcome> {
    let pre = make_preselection();
    let mut rows = Vec::with_capacity(ensembles.len());
    for ens in ensembles {
        let m = ens.moments();
        let fc = fisher_classical(ens, params).map_err(sim)?;
        let qfi = qfi_pure(m.mean_n, &pre).map_err(sim)?;
        rows.push(FisherRow {
            mean_n: m.mean_n,
            std_dn: m.std_dn,
            fisher_classical_per_trial: fc,
            fisher_joint_per_trial: fisher_joint(ens, params).map_err(sim)?,
            qfi_per_use: qfi,
            qfi_mixed_bound_per_use: qfi_mixed_bound(ens, &pre),
            uses,
            classical_dg: infinite_if_uninformative(cramer_rao_bound(fc, uses))?,
            quantum_dg: infinite_if_uninformative(cramer_rao_bound(qfi, uses))?,
        });
    }
    let mut table = Table::new(vec![
        "mean_n_photons",
        "std_dn_photons",
        "fisher_classical_per_trial_per_rad2",
        "fisher_joint_per_trial_per_rad2",
        "qfi_per_use_per_rad2",
        "qfi_mixed_bound_per_use_per_rad2",
        "uses",
        "classical_dg_min_rad",
        "quantum_dg_min_rad",
    ]);
    for r in &rows {
        table.push(vec![
            r.mean_n.into(),
            r.std_dn.into(),
            r.fisher_classical_per_trial.into(),
            r.fisher_joint_per_trial.into(),
            r.qfi_per_use.into(),
            r.qfi_mixed_bound_per_use.into(),
            r.uses.into(),
            r.classical_dg.into(),
            r.quantum_dg.into(),
        ]);
    }
    Ok(Outcome {
        table,
        result: CampaignResult::Fisher { rows },
    })
}

fn run_batches(config: &TrialConfig, replications: usize, convention: WeakValueConvention) -> CliResult<Outcome> {
    let (seeds, batches) = if replications == 1 {
        (vec![config.seed], vec![run_batch(config).map_err(sim)?])
    } else {
        let seeds = (0..replications as u64).map(|r| derive_seed(config.seed, r)).collect();
        (seeds, replicate(config, replications).map_err(sim)?)
    };
    let moments = config.ensemble.moments();
    let estimate = |b: &TrialBatch| -> CliResult<Option<f64>> {
        match estimate_g(b.delta_n_normalized * b.ensemble_mean, &moments, config.params.epsilon, convention) {
            Ok(g) => Ok(Some(g)),
            Err(CoreError::ZeroVariance) => Ok(None),
            Err(e) => Err(sim(e)),
        }
    };
    let g_estimates = batches.iter().map(estimate).collect::<CliResult<Vec<_>>>()?;
    let known: Vec<f64> = g_estimates.iter().flatten().copied().collect();
    let (g_estimate_mean, g_estimate_std) = if known.len() == g_estimates.len() && !known.is_empty() {
        let k = known.len() as f64;
        let mean = known.iter().sum::<f64>() / k;
        let std = (known.len() > 1)
            .then(|| (known.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt());
        (Some(mean), std)
    } else {
        (None, None)
    };
    let exact = postselected_mean_exact(&config.ensemble, &config.params).map_err(sim)?;
    let linearized = mean_shift_linearized(&moments, &config.params).map_err(sim)? / moments.mean_n;
    let bounds = match information_bounds(&config.ensemble, &config.params, &make_preselection(), config.total_trials) {
        Ok(b) => Some(b),
        Err(CoreError::NonpositiveInformation { .. }) => None,
        Err(e) => return Err(sim(e)),
    };

    let mut columns = vec!["replication", "seed"];
    columns.extend_from_slice(&BATCH_COLUMNS);
    columns.push("g_estimate_rad");
    let mut table = Table::new(columns);
    for (r, (b, g)) in batches.iter().zip(&g_estimates).enumerate() {
        let mut row = vec![Cell::from(r), Cell::from(seeds[r])];
        row.extend(batch_cells(b));
        row.push(g.unwrap_or(f64::NAN).into());
        table.push(row);
    }
    Ok(Outcome {
        table,
        result: CampaignResult::Batch(BatchReport {
            convention,
            seeds,
            batches,
            g_estimates,
            g_estimate_mean,
            g_estimate_std,
            exact,
            linearized_delta_n_normalized: linearized,
            bounds,
        }),
    })
}

fn run_scaling(result: ScalingResult) -> Outcome {
    let mut table = Table::new(vec![
        "index",
        "mean_n_photons",
        "std_dn_photons",
        "slope_s_per_rad",
        "slope_error_per_rad",
        "linear_slope_per_rad",
        "sweep_half_width_rad",
        "sigma_normalized",
        "nu",
        "total_trials",
        "delta_g_rad",
        "delta_g_error_rad",
        "included_in_fit",
    ]);
    for (i, p) in result.points.iter().enumerate() {
        table.push(vec![
            i.into(),
            p.mean_n.into(),
            p.std_dn.into(),
            p.slope_s.into(),
            p.slope_error.into(),
            p.linear_slope.into(),
            p.sweep_half_width.into(),
            p.sigma.into(),
            p.nu.into(),
            p.total_trials.into(),
            p.delta_g.into(),
            p.delta_g_error.into(),
            p.included_in_fit.into(),
        ]);
    }
    Outcome {
        table,
        result: CampaignResult::Scaling(result),
    }
}

/// Runs a validated campaign on the current thread pool.
pub fn run(campaign: &Campaign) -> CliResult<Outcome> {
    match &campaign.plan {
        Plan::SweepG { base, axis } => {
            let r = sweep_coupling(base, axis).map_err(sim)?;
            let table = match axis {
                CouplingAxis::Direct { .. } => sweep_table(&["g_rad"], &r, |i| vec![r.couplings[i].into()]),
                CouplingAxis::Delay { .. } => sweep_table(&["delay_s", "g_rad"], &r, |i| {
                    vec![r.axis_values[i].into(), r.couplings[i].into()]
                }),
            };
            Ok(Outcome {
                table,
                result: CampaignResult::Sweep(r),
            })
        }
        Plan::SweepDn { base, dn_values } => {
            let r = sweep_variance(base, dn_values).map_err(sim)?;
            let table = sweep_table(&["dn_photons", "dn_squared_photons2"], &r, |i| {
                vec![r.axis_values[i].into(), r.axis_values[i].powi(2).into()]
            });
            Ok(Outcome {
                table,
                result: CampaignResult::Sweep(r),
            })
        }
        Plan::SweepEps { base, eps_values } => {
            let r = sweep_epsilon(base, eps_values).map_err(sim)?;
            let im: Vec<f64> = eps_values
                .iter()
                .map(|&e| im_weak_value_exact(e))
                .collect::<wvkerr_core::Result<_>>()
                .map_err(sim)?;
            let table = sweep_table(
                &["epsilon_rad", "inverse_epsilon_per_rad", "im_weak_value_exact"],
                &r,
                |i| vec![r.axis_values[i].into(), (1.0 / r.axis_values[i]).into(), im[i].into()],
            );
            Ok(Outcome {
                table,
                result: CampaignResult::Sweep(r),
            })
        }
        Plan::Scaling {
            base,
            grid,
            policy,
            options,
        } => Ok(run_scaling(scaling_study(grid, policy, base, options).map_err(sim)?)),
        Plan::Fisher {
            ensembles,
            params,
            uses,
        } => run_fisher(ensembles, params, *uses),
        Plan::Batch {
            config,
            replications,
            convention,
        } => run_batches(config, *replications, *convention),
    }
}
