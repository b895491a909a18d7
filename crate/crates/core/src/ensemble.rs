//! Classical photon-number distributions of the probe.
//!
//! Two representations are supported:
//!
//! * [`DiscretePmf`]: integer photon counts with explicit probabilities
//!   (Poissonian coherent-state statistics, user supplied tables).
//! * [`ModulatedContinuous`]: pulses whose mean intensity follows
//!   `N (1 - D sin θ)` with the modulation phase `θ` uniform over a period,
//!   optionally broadened by Gaussian shot noise of variance equal to the
//!   local intensity. Expectations use Gauss–Legendre nodes in `θ` and
//!   Gauss–Hermite nodes for the shot noise.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::Rng;
use rand_distr::{weighted::WeightedAliasIndex, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::numeric::{compensated_sum, gauss_hermite_normal, gauss_legendre, CompensatedSum};

/// Default cap on the number of pmf entries a constructor may allocate.
pub const DEFAULT_ENTRY_BUDGET: u64 = 20_000_000;
/// Smallest number of modulation-phase nodes accepted.
pub const MIN_QUADRATURE_NODES: usize = 64;
/// Gauss–Hermite order used for the shot-noise layer.
pub const SHOT_NOISE_ORDER: usize = 24;
/// Shot-noise draws are clamped to this many standard deviations.
pub const SHOT_NOISE_CLIP: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// Mean photon number `N`.
    pub mean_n: f64,
    /// Standard deviation `Δn`.
    pub std_dn: f64,
}

impl Moments {
    pub fn variance(&self) -> f64 {
        self.std_dn * self.std_dn
    }
}

/// Normalized photon-number table sorted by `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePmf {
    entries: Vec<(u64, f64)>,
}

impl DiscretePmf {
    pub fn entries(&self) -> &[(u64, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.entries.iter().map(|e| e.1))
    }

    fn cdf(&self, x: f64) -> f64 {
        let end = self.entries.partition_point(|e| (e.0 as f64) <= x);
        compensated_sum(self.entries[..end].iter().map(|e| e.1)).min(1.0)
    }
}

/// Sine-modulated pulse train, `N (1 - D sin θ)` per pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulatedContinuous {
    pub mean_n: f64,
    pub depth: f64,
    pub shot_noise: bool,
    pub quadrature_nodes: usize,
}

impl ModulatedContinuous {
    fn intensity(&self, theta: f64) -> f64 {
        self.mean_n * (1.0 - self.depth * theta.sin())
    }

    /// Modulation-phase nodes mapped to pulse intensities, weights sum to one.
    pub fn intensity_nodes(&self) -> Vec<(f64, f64)> {
        let (x, w) = gauss_legendre(self.quadrature_nodes);
        x.iter()
            .zip(&w)
            .map(|(&x, &w)| {
                let theta = PI * (x + 1.0);
                (self.intensity(theta), 0.5 * w)
            })
            .collect()
    }

    fn weighted_points(&self) -> Vec<(f64, f64)> {
        let lambdas = self.intensity_nodes();
        if !self.shot_noise {
            return lambdas;
        }
        let (z, wz) = gauss_hermite_normal(SHOT_NOISE_ORDER);
        let mut out = Vec::with_capacity(lambdas.len() * z.len());
        for &(lambda, w) in &lambdas {
            let s = lambda.max(0.0).sqrt();
            for (&z, &wz) in z.iter().zip(&wz) {
                out.push((lambda + s * z, w * wz));
            }
        }
        out
    }

    /// Probability that the modulated intensity alone is at most `x`.
    fn intensity_cdf(&self, x: f64) -> f64 {
        let spread = self.mean_n * self.depth;
        if spread == 0.0 {
            return if x >= self.mean_n { 1.0 } else { 0.0 };
        }
        let t = (self.mean_n - x) / spread;
        if t <= -1.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            0.5 - t.asin() / PI
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        if !self.shot_noise {
            return self.intensity_cdf(x);
        }
        let n = self.mean_n;
        if self.depth == 0.0 {
            return normal_cdf((x - n) / n.sqrt());
        }
        // Only intensities within a few shot-noise widths of `x` need the
        // kernel; everything below contributes fully, everything above not at all.
        let top = n * (1.0 + self.depth);
        let band = 10.0 * top.max(x).max(1.0).sqrt();
        let lo = x - band;
        let hi = x + band;
        let below = self.intensity_cdf(lo);
        let spread = n * self.depth;
        let a = ((n - hi) / spread).clamp(-1.0, 1.0);
        let b = ((n - lo) / spread).clamp(-1.0, 1.0);
        if a >= b {
            return below;
        }
        let kernel = |theta: f64| {
            let lambda = self.intensity(theta);
            if lambda <= 0.0 {
                return if x >= 0.0 { 1.0 } else { 0.0 };
            }
            normal_cdf((x - lambda) / lambda.sqrt())
        };
        let (asin_a, asin_b) = (a.asin(), b.asin());
        let band_mass = integrate_panels(&kernel, asin_a, asin_b)
            + integrate_panels(&kernel, PI - asin_b, PI - asin_a);
        (below + band_mass / TAU).clamp(0.0, 1.0)
    }

    fn upper_bound(&self) -> f64 {
        let top = self.mean_n * (1.0 + self.depth);
        if self.shot_noise {
            top + SHOT_NOISE_CLIP * top.sqrt()
        } else {
            top
        }
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn integrate_panels(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const PANELS: usize = 32;
    const ORDER: usize = 8;
    if b <= a {
        return 0.0;
    }
    let (x, w) = gauss_legendre(ORDER);
    let h = (b - a) / PANELS as f64;
    let mut acc = CompensatedSum::new();
    for p in 0..PANELS {
        let mid = a + (p as f64 + 0.5) * h;
        for (&x, &w) in x.iter().zip(&w) {
            acc.add(0.5 * h * w * f(mid + 0.5 * h * x));
        }
    }
    acc.value()
}

/// Probe photon-number distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeEnsemble {
    DiscretePmf(DiscretePmf),
    ModulatedContinuous(ModulatedContinuous),
}

/// Coherent-state (Poissonian) statistics with mean `mean_n`, truncated so
/// that the omitted mass is at most `tail_mass_bound`, then renormalized.
pub fn poissonian(mean_n: f64, tail_mass_bound: f64) -> Result<ProbeEnsemble> {
    poissonian_with_budget(mean_n, tail_mass_bound, DEFAULT_ENTRY_BUDGET)
}

pub fn poissonian_with_budget(
    mean_n: f64,
    tail_mass_bound: f64,
    entry_budget: u64,
) -> Result<ProbeEnsemble> {
    if !(mean_n > 0.0 && mean_n.is_finite()) {
        return Err(invalid("mean_n", format!("must be positive and finite, got {mean_n}")));
    }
    if !(tail_mass_bound > 0.0 && tail_mass_bound <= 1e-6) {
        return Err(invalid(
            "tail_mass_bound",
            format!("must lie in (0, 1e-6], got {tail_mass_bound}"),
        ));
    }
    let lambda = mean_n;
    let mode = lambda.floor() as u64;
    let half_bound = 0.5 * tail_mass_bound;
    let over_budget = |count: usize| -> Result<()> {
        if count as u64 > entry_budget {
            Err(Error::ResourceLimit {
                required: count as u64,
                budget: entry_budget,
            })
        } else {
            Ok(())
        }
    };

    // Unnormalized weights relative to the mode, built outward by the
    // ratio recurrences. Geometric tail bounds stop each side.
    let mut upper = vec![1.0f64];
    let mut total = 1.0f64;
    let mut k = mode;
    let mut w = 1.0;
    loop {
        let ratio = lambda / (k + 1) as f64;
        if ratio < 1.0 && w * ratio / (1.0 - ratio) <= half_bound * total {
            break;
        }
        w *= ratio;
        k += 1;
        upper.push(w);
        total += w;
        over_budget(upper.len())?;
    }
    let mut lower = Vec::new();
    let mut k = mode;
    let mut w = 1.0;
    while k > 0 {
        let ratio = k as f64 / lambda;
        if ratio < 1.0 && w * ratio / (1.0 - ratio) <= half_bound * total {
            break;
        }
        w *= ratio;
        k -= 1;
        lower.push(w);
        total += w;
        over_budget(upper.len() + lower.len())?;
    }
    let first = mode - lower.len() as u64;
    let entries: Vec<(u64, f64)> = lower
        .into_iter()
        .rev()
        .chain(upper)
        .enumerate()
        .map(|(i, w)| (first + i as u64, w))
        .collect();
    normalized_pmf(entries)
}

/// Sine-modulated intensity with optional shot noise.
pub fn sine_modulated(
    mean_n: f64,
    depth: f64,
    shot_noise: bool,
    nodes: usize,
) -> Result<ProbeEnsemble> {
    if !(mean_n > 0.0 && mean_n.is_finite()) {
        return Err(invalid("mean_n", format!("must be positive and finite, got {mean_n}")));
    }
    if !(0.0..=1.0).contains(&depth) {
        return Err(invalid("depth", format!("must lie in [0, 1], got {depth}")));
    }
    if nodes < MIN_QUADRATURE_NODES {
        return Err(invalid(
            "nodes",
            format!("need at least {MIN_QUADRATURE_NODES} quadrature nodes, got {nodes}"),
        ));
    }
    Ok(ProbeEnsemble::ModulatedContinuous(ModulatedContinuous {
        mean_n,
        depth,
        shot_noise,
        quadrature_nodes: nodes,
    }))
}

/// Largest standard deviation a sine-modulated ensemble can reach.
pub fn max_modulated_std(mean_n: f64, shot_noise: bool) -> f64 {
    (0.5 * mean_n * mean_n + shot(mean_n, shot_noise)).sqrt()
}

fn shot(mean_n: f64, shot_noise: bool) -> f64 {
    if shot_noise {
        mean_n
    } else {
        0.0
    }
}

/// Modulation depth giving total standard deviation `std_dn`, from
/// `Δn² = N² D²/2 + N·[shot]`.
pub fn depth_for_std(mean_n: f64, std_dn: f64, shot_noise: bool) -> Result<f64> {
    let floor = shot(mean_n, shot_noise);
    let min = floor.sqrt();
    let max = max_modulated_std(mean_n, shot_noise);
    let var = std_dn * std_dn;
    if !(std_dn.is_finite() && std_dn >= 0.0) || var < floor * (1.0 - 1e-12) || var > max * max * (1.0 + 1e-12) {
        return Err(Error::UnreachableVariance {
            requested: std_dn,
            min,
            max,
        });
    }
    let d2 = 2.0 * (var - floor).max(0.0) / (mean_n * mean_n);
    Ok(d2.sqrt().min(1.0))
}

/// Sine-modulated ensemble with the depth chosen to hit `std_dn`.
pub fn sine_modulated_with_std(
    mean_n: f64,
    std_dn: f64,
    shot_noise: bool,
    nodes: usize,
) -> Result<ProbeEnsemble> {
    let depth = depth_for_std(mean_n, std_dn, shot_noise)?;
    sine_modulated(mean_n, depth, shot_noise, nodes)
}

/// Builds a normalized pmf from arbitrary non-negative weights.
/// Duplicate counts are merged and zero weights dropped.
pub fn from_pmf(entries: impl IntoIterator<Item = (u64, f64)>) -> Result<ProbeEnsemble> {
    let mut entries: Vec<(u64, f64)> = entries.into_iter().collect();
    for &(n, w) in &entries {
        if !(w.is_finite() && w >= 0.0) {
            return Err(invalid("weight", format!("entry n = {n} has weight {w}")));
        }
    }
    entries.retain(|e| e.1 > 0.0);
    if entries.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    entries.sort_by_key(|e| e.0);
    let mut merged: Vec<(u64, f64)> = Vec::with_capacity(entries.len());
    for (n, w) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == n => last.1 += w,
            _ => merged.push((n, w)),
        }
    }
    normalized_pmf(merged)
}

fn normalized_pmf(mut entries: Vec<(u64, f64)>) -> Result<ProbeEnsemble> {
    let total = compensated_sum(entries.iter().map(|e| e.1));
    if !(total > 0.0) {
        return Err(Error::EmptyDistribution);
    }
    for e in &mut entries {
        e.1 /= total;
    }
    Ok(ProbeEnsemble::DiscretePmf(DiscretePmf { entries }))
}

/// Parses the two-column `n weight` text format. `#` starts a comment.
pub fn parse_pmf(text: &str) -> Result<ProbeEnsemble> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::PmfParse {
                line,
                message: format!("expected 2 columns, found {}", fields.len()),
            });
        }
        let n: u64 = fields[0].parse().map_err(|_| Error::PmfParse {
            line,
            message: format!("photon count `{}` is not a non-negative integer", fields[0]),
        })?;
        let w: f64 = fields[1].parse().map_err(|_| Error::PmfParse {
            line,
            message: format!("weight `{}` is not a number", fields[1]),
        })?;
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::PmfParse {
                line,
                message: format!("weight {w} must be finite and non-negative"),
            });
        }
        entries.push((n, w));
    }
    from_pmf(entries)
}

pub fn load_pmf(path: impl AsRef<Path>) -> Result<ProbeEnsemble> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_pmf(&text)
}

impl ProbeEnsemble {
    /// Quadrature points `(n, weight)` whose weights sum to one.
    pub fn weighted_points(&self) -> Vec<(f64, f64)> {
        match self {
            ProbeEnsemble::DiscretePmf(pmf) => {
                pmf.entries.iter().map(|&(n, w)| (n as f64, w)).collect()
            }
            ProbeEnsemble::ModulatedContinuous(m) => m.weighted_points(),
        }
    }

    /// Expectation of `f(n)` under the ensemble.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        compensated_sum(self.weighted_points().into_iter().map(|(n, w)| w * f(n)))
    }

    pub fn moments(&self) -> Moments {
        let points = self.weighted_points();
        let mean = compensated_sum(points.iter().map(|&(n, w)| w * n));
        let var = compensated_sum(points.iter().map(|&(n, w)| w * (n - mean) * (n - mean)));
        Moments {
            mean_n: mean,
            std_dn: var.max(0.0).sqrt(),
        }
    }

    pub fn mean_n(&self) -> f64 {
        match self {
            ProbeEnsemble::ModulatedContinuous(m) => m.mean_n,
            ProbeEnsemble::DiscretePmf(_) => self.moments().mean_n,
        }
    }

    /// Cumulative distribution `P(n ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ProbeEnsemble::DiscretePmf(pmf) => pmf.cdf(x),
            ProbeEnsemble::ModulatedContinuous(m) => m.cdf(x),
        }
    }

    /// Largest photon number a draw can produce.
    pub fn upper_bound(&self) -> f64 {
        match self {
            ProbeEnsemble::DiscretePmf(pmf) => pmf.entries.last().map_or(0.0, |e| e.0 as f64),
            ProbeEnsemble::ModulatedContinuous(m) => m.upper_bound(),
        }
    }

    /// Smallest photon number a draw can produce.
    pub fn lower_bound(&self) -> f64 {
        match self {
            ProbeEnsemble::DiscretePmf(pmf) => pmf.entries.first().map_or(0.0, |e| e.0 as f64),
            ProbeEnsemble::ModulatedContinuous(_) => 0.0,
        }
    }

    /// Bins a continuous ensemble onto integer photon counts spaced by
    /// `bin_width`. Discrete ensembles are returned unchanged.
    pub fn discretize(&self, bin_width: f64) -> Result<ProbeEnsemble> {
        let m = match self {
            ProbeEnsemble::DiscretePmf(_) => return Ok(self.clone()),
            ProbeEnsemble::ModulatedContinuous(m) => m,
        };
        if !(bin_width >= 1.0 && bin_width.is_finite()) {
            return Err(invalid("bin_width", format!("must be at least one photon, got {bin_width}")));
        }
        let top = m.upper_bound() + 2.0 * SHOT_NOISE_CLIP * m.mean_n.sqrt();
        let bins = (top / bin_width).ceil() as u64 + 1;
        if bins > DEFAULT_ENTRY_BUDGET {
            return Err(Error::ResourceLimit {
                required: bins,
                budget: DEFAULT_ENTRY_BUDGET,
            });
        }
        let mut entries = Vec::with_capacity(bins as usize);
        let mut prev = 0.0;
        for k in 0..bins {
            let edge = (k as f64 + 0.5) * bin_width;
            let cum = if k + 1 == bins { 1.0 } else { m.cdf(edge) };
            let mass = (cum - prev).max(0.0);
            prev = cum.max(prev);
            entries.push(((k as f64 * bin_width).round() as u64, mass));
        }
        from_pmf(entries)
    }

    /// Builds a reusable sampler.
    pub fn sampler(&self) -> Sampler {
        match self {
            ProbeEnsemble::DiscretePmf(pmf) => {
                let weights: Vec<f64> = pmf.entries.iter().map(|e| e.1).collect();
                let values = pmf.entries.iter().map(|e| e.0 as f64).collect();
                let table = WeightedAliasIndex::new(weights)
                    .expect("normalized pmf always has positive finite weights");
                Sampler::Alias { table, values }
            }
            ProbeEnsemble::ModulatedContinuous(m) => Sampler::Modulated(*m),
        }
    }

    /// One draw from the ensemble. Building a [`Sampler`] once is cheaper
    /// when drawing repeatedly from a pmf.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().draw(rng).n
    }
}

/// A single ensemble draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub n: f64,
    /// The Gaussian shot-noise draw went negative and was clamped to zero.
    pub clamped: bool,
}

#[derive(Debug, Clone)]
pub enum Sampler {
    Alias {
        table: WeightedAliasIndex<f64>,
        values: Vec<f64>,
    },
    Modulated(ModulatedContinuous),
}

impl Sampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Draw {
        match self {
            Sampler::Alias { table, values } => Draw {
                n: values[table.sample(rng)],
                clamped: false,
            },
            Sampler::Modulated(m) => {
                let theta = TAU * rng.random::<f64>();
                let lambda = m.intensity(theta);
                if !m.shot_noise {
                    return Draw {
                        n: lambda.max(0.0),
                        clamped: false,
                    };
                }
                let z: f64 = StandardNormal.sample(rng);
                let z = z.clamp(-SHOT_NOISE_CLIP, SHOT_NOISE_CLIP);
                let n = lambda + lambda.max(0.0).sqrt() * z;
                if n < 0.0 {
                    Draw { n: 0.0, clamped: true }
                } else {
                    Draw { n, clamped: false }
                }
            }
        }
    }
}
