//! Trial-level simulation: draw a pulse, post-select it with the exact
//! probability, record a noisy reading, aggregate.
//!
//! Trials are split into fixed chunks of [`CHUNK_TRIALS`]. Chunk `k` draws
//! from ChaCha8 stream `k` keyed by the batch seed, and chunk summaries are
//! merged in chunk order, so the result does not depend on how many worker
//! threads ran the chunks.
//!
//! Post-selection is rare (`≈ sin²(ε/2)`), so each chunk jumps straight to
//! the next *candidate* trial with a geometric skip of rate `p_max`, the
//! largest post-selection probability over the ensemble's support, and then
//! accepts the candidate with probability `p(n)/p_max`. This is an exact
//! thinning of the per-trial Bernoulli process.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{ProbeEnsemble, Sampler};
use crate::error::{invalid, Error, Result};
use crate::quantum::{postselect_prob, InteractionParams};

/// Trials per independently seeded chunk.
pub const CHUNK_TRIALS: u64 = 1 << 20;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub ensemble: ProbeEnsemble,
    pub params: InteractionParams,
    /// `ν̃`, number of interaction uses.
    pub total_trials: u64,
    /// Standard deviation of additive Gaussian readout noise, photons.
    pub readout_noise_std: f64,
    pub seed: u64,
}

impl TrialConfig {
    pub fn new(ensemble: ProbeEnsemble, params: InteractionParams, total_trials: u64, seed: u64) -> Self {
        Self {
            ensemble,
            params,
            total_trials,
            readout_noise_std: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.total_trials == 0 {
            return Err(invalid("total_trials", "must be at least 1"));
        }
        if !(self.readout_noise_std >= 0.0 && self.readout_noise_std.is_finite()) {
            return Err(invalid(
                "readout_noise_std",
                format!("must be finite and non-negative, got {}", self.readout_noise_std),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialBatch {
    pub total_trials: u64,
    /// `ν`.
    pub postselected_count: u64,
    /// Mean of the recorded readings, photons.
    pub mean_n: f64,
    /// Exact mean `N` of the ensemble the pulses were drawn from.
    pub ensemble_mean: f64,
    /// `δñ = (mean_n - N)/N`.
    pub delta_n_normalized: f64,
    /// Standard deviation of the recorded readings, photons.
    pub sigma: f64,
    /// `σ/√ν`, photons.
    pub standard_error: f64,
    /// Shot-noise draws that went negative and were clamped to zero.
    pub clamped_draws: u64,
}

impl TrialBatch {
    /// Standard error of `δñ`.
    pub fn normalized_standard_error(&self) -> f64 {
        self.standard_error / self.ensemble_mean
    }

    /// `σ/N`, the spread of the normalized readings.
    pub fn normalized_sigma(&self) -> f64 {
        self.sigma / self.ensemble_mean
    }

    /// `ν/ν̃`.
    pub fn postselected_fraction(&self) -> f64 {
        self.postselected_count as f64 / self.total_trials as f64
    }
}

/// Running count, mean and centred sum of squares.
#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    count: u64,
    mean: f64,
    m2: f64,
    clamped: u64,
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Accumulator) -> Accumulator {
        if other.count == 0 {
            return Accumulator {
                clamped: self.clamped + other.clamped,
                ..self
            };
        }
        if self.count == 0 {
            return Accumulator {
                clamped: self.clamped + other.clamped,
                ..other
            };
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let frac = other.count as f64 / count as f64;
        Accumulator {
            count,
            mean: self.mean + delta * frac,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * frac,
            clamped: self.clamped + other.clamped,
        }
    }
}

/// Supremum of `sin²(x/2)` for `x` between `a` and `b`.
fn max_sin2_half(a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let pi = std::f64::consts::PI;
    // sin²(x/2) peaks at odd multiples of π.
    let k = ((lo / pi - 1.0) / 2.0).ceil();
    if (2.0 * k + 1.0) * pi <= hi {
        return 1.0;
    }
    let s = |x: f64| (0.5 * x).sin().powi(2);
    s(lo).max(s(hi))
}

fn candidate_rate(ensemble: &ProbeEnsemble, params: &InteractionParams) -> f64 {
    let lo = params.g * ensemble.lower_bound() + params.epsilon;
    let hi = params.g * ensemble.upper_bound() + params.epsilon;
    let p = max_sin2_half(lo, hi);
    (p * (1.0 + 1e-12)).min(1.0)
}

struct ChunkJob<'a> {
    sampler: &'a Sampler,
    params: &'a InteractionParams,
    center: f64,
    noise_std: f64,
    p_max: f64,
}

impl ChunkJob<'_> {
    fn run(&self, seed: u64, chunk: u64, trials: u64) -> Accumulator {
        let mut acc = Accumulator::default();
        if self.p_max <= 0.0 {
            return acc;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        let log_miss = (-self.p_max).ln_1p();
        let mut pos = 0u64;
        loop {
            if self.p_max < 1.0 {
                let u: f64 = rng.random();
                let skip = ((-u).ln_1p() / log_miss).floor();
                if skip >= (trials - pos) as f64 {
                    break;
                }
                pos += skip as u64;
            }
            if pos >= trials {
                break;
            }
            pos += 1;
            let draw = self.sampler.draw(&mut rng);
            if draw.clamped {
                acc.clamped += 1;
            }
            let v: f64 = rng.random::<f64>() * self.p_max;
            if v >= postselect_prob(draw.n, self.params) {
                continue;
            }
            let mut reading = draw.n;
            if self.noise_std > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                reading += self.noise_std * z;
            }
            acc.push(reading - self.center);
        }
        acc
    }
}

/// Runs `total_trials` interaction uses and aggregates the post-selected
/// readings. Bit-identical for any rayon pool size.
pub fn run_batch(config: &TrialConfig) -> Result<TrialBatch> {
    config.validate()?;
    let center = config.ensemble.moments().mean_n;
    let sampler = config.ensemble.sampler();
    let job = ChunkJob {
        sampler: &sampler,
        params: &config.params,
        center,
        noise_std: config.readout_noise_std,
        p_max: candidate_rate(&config.ensemble, &config.params),
    };
    let chunks = config.total_trials.div_ceil(CHUNK_TRIALS);
    let partials: Vec<Accumulator> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let start = k * CHUNK_TRIALS;
            let trials = CHUNK_TRIALS.min(config.total_trials - start);
            job.run(config.seed, k, trials)
        })
        .collect();
    let acc = partials
        .into_iter()
        .fold(Accumulator::default(), Accumulator::merge);
    if acc.count == 0 {
        return Err(Error::NoPostselectedTrials {
            total_trials: config.total_trials,
        });
    }
    let variance = if acc.count > 1 {
        acc.m2 / (acc.count - 1) as f64
    } else {
        0.0
    };
    let sigma = variance.max(0.0).sqrt();
    Ok(TrialBatch {
        total_trials: config.total_trials,
        postselected_count: acc.count,
        mean_n: center + acc.mean,
        ensemble_mean: center,
        delta_n_normalized: acc.mean / center,
        sigma,
        standard_error: sigma / (acc.count as f64).sqrt(),
        clamped_draws: acc.clamped,
    })
}

/// Seed of replication `index`: SplitMix64 finalizer applied to
/// `base + (index + 1) · 0x9E3779B97F4A7C15` (wrapping).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent batches with seeds from [`derive_seed`], in replication order.
pub fn replicate(config: &TrialConfig, replications: usize) -> Result<Vec<TrialBatch>> {
    if replications < 2 {
        return Err(invalid("replications", format!("need at least 2, got {replications}")));
    }
    config.validate()?;
    (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut c = config.clone();
            c.seed = derive_seed(config.seed, r);
            run_batch(&c)
        })
        .collect()
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Err(invalid("workers", "must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    Ok(pool.install(f))
}
