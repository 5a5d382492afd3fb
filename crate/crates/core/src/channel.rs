//! Deployment and channel simulation for a hall of single-link subnetworks.
//!
//! Index convention: `h[[m, n]]` and `d[[m, n]]` describe the link from the
//! device of subnetwork `m` to the controller of subnetwork `n`. The diagonal
//! holds the desired links.

use std::f64::consts::{LN_2, PI};

use ndarray::Array2;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Physical and deployment parameters of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub n_subnetworks: usize,
    /// Side of the square factory hall, m.
    pub area_side: f64,
    /// Cell radius around each controller, m.
    pub cell_radius: f64,
    pub min_controller_separation: f64,
    pub min_device_distance: f64,
    /// Standard deviation of log-normal shadowing, dB.
    pub shadowing_std_db: f64,
    pub pathloss_exponent: f64,
    /// Maximum transmit power, W.
    pub max_power: f64,
    /// Bandwidth, Hz.
    pub bandwidth: f64,
    /// Carrier frequency, Hz.
    pub carrier_freq: f64,
    pub noise_figure_db: f64,
    /// Receiver temperature, K.
    pub temperature: f64,
    pub master_seed: u64,
    /// Rejection-sampling budget for controller placement, per snapshot.
    pub placement_attempts: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_subnetworks: 20,
            area_side: 20.0,
            cell_radius: 2.0,
            min_controller_separation: 2.0,
            min_device_distance: 0.5,
            shadowing_std_db: 7.0,
            pathloss_exponent: 2.7,
            max_power: 1e-3,
            bandwidth: 20e6,
            carrier_freq: 6e9,
            noise_figure_db: 10.0,
            temperature: 290.0,
            master_seed: 0,
            placement_attempts: 10_000,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_subnetworks < 1 {
            return bad("n_subnetworks must be at least 1");
        }
        if !(self.area_side > 0.0) {
            return bad("area_side must be positive");
        }
        if !(self.min_device_distance > 0.0 && self.min_device_distance <= self.cell_radius) {
            return bad("need 0 < min_device_distance <= cell_radius");
        }
        if !(self.min_controller_separation >= 0.0) {
            return bad("min_controller_separation must be non-negative");
        }
        if !(self.shadowing_std_db >= 0.0) || !self.shadowing_std_db.is_finite() {
            return bad("shadowing_std_db must be finite and non-negative");
        }
        for (name, v) in [
            ("pathloss_exponent", self.pathloss_exponent),
            ("max_power", self.max_power),
            ("bandwidth", self.bandwidth),
            ("carrier_freq", self.carrier_freq),
            ("temperature", self.temperature),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite")));
            }
        }
        if !self.noise_figure_db.is_finite() {
            return bad("noise_figure_db must be finite");
        }
        if self.placement_attempts == 0 {
            return bad("placement_attempts must be positive");
        }
        Ok(())
    }

    /// Subnetworks per square kilometre.
    pub fn density_per_km2(&self) -> f64 {
        self.n_subnetworks as f64 / (self.area_side * self.area_side) * 1e6
    }

    /// Copy of this config with `n_subnetworks` chosen to hit `density` in the same hall.
    pub fn with_density(&self, density_per_km2: f64) -> Self {
        let n = (density_per_km2 * self.area_side * self.area_side / 1e6).round();
        Self {
            n_subnetworks: n.max(1.0) as usize,
            ..self.clone()
        }
    }

    pub fn noise_power(&self) -> f64 {
        noise_power(self)
    }
}

/// Thermal noise power `J T B 10^(NF/10)` in watts.
pub fn noise_power(config: &SystemConfig) -> f64 {
    BOLTZMANN * config.temperature * config.bandwidth * 10f64.powf(config.noise_figure_db / 10.0)
}

/// Distance-dependent part of the channel gain, `c^2 / ((4 pi f)^2 d^r)`.
pub fn path_gain(distance: f64, carrier_freq: f64, exponent: f64) -> f64 {
    let free_space = SPEED_OF_LIGHT / (4.0 * PI * carrier_freq);
    free_space * free_space / distance.powf(exponent)
}

/// Random large- and small-scale factors for one link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkFading {
    /// Shadowing in dB, `X ~ Normal(0, std^2)`.
    pub shadowing_db: f64,
    /// Squared envelope `|zeta|^2` of a unit-variance circularly-symmetric complex normal.
    pub fading_power: f64,
}

impl LinkFading {
    pub fn sample(rng: &mut ChaCha8Rng, shadowing_std_db: f64) -> Self {
        let x: f64 = StandardNormal.sample(rng);
        // real and imaginary parts each carry half the unit variance
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Self {
            shadowing_db: shadowing_std_db * x,
            fading_power: 0.5 * (re * re + im * im),
        }
    }

    /// Linear shadowing factor `kappa = 10^(X/10)`.
    pub fn shadowing_linear(&self) -> f64 {
        10f64.powf(self.shadowing_db / 10.0)
    }
}

/// Positions and the device-to-controller distance matrix of one deployment.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    pub controller_xy: Vec<[f64; 2]>,
    pub device_xy: Vec<[f64; 2]>,
    /// `distance[[m, n]]` = distance from device `m` to controller `n`.
    pub distance: Array2<f64>,
}

impl Geometry {
    pub fn n(&self) -> usize {
        self.controller_xy.len()
    }
}

/// One deployment realisation with its channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub controller_xy: Vec<[f64; 2]>,
    pub device_xy: Vec<[f64; 2]>,
    pub distance: Array2<f64>,
    /// `channel[[m, n]]` = linear power gain from device `m` to controller `n`.
    pub channel: Array2<f64>,
    pub seed: u64,
}

impl Snapshot {
    pub fn n(&self) -> usize {
        self.controller_xy.len()
    }

    /// Relabel subnetworks: new index `i` takes the old subnetwork `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Snapshot {
        let n = self.n();
        assert_eq!(perm.len(), n, "permutation length");
        let remap = |m: &Array2<f64>| Array2::from_shape_fn((n, n), |(i, j)| m[[perm[i], perm[j]]]);
        Snapshot {
            controller_xy: perm.iter().map(|&p| self.controller_xy[p]).collect(),
            device_xy: perm.iter().map(|&p| self.device_xy[p]).collect(),
            distance: remap(&self.distance),
            channel: remap(&self.channel),
            seed: self.seed,
        }
    }

    pub fn desired_gains(&self) -> Vec<f64> {
        self.channel.diag().to_vec()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed streams derived from the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedDomain {
    Train,
    Test,
    /// Free-form stream, e.g. for per-experiment test sets.
    Custom(u64),
}

impl SeedDomain {
    fn tag(self) -> u64 {
        match self {
            SeedDomain::Train => 0x7472_6169_6e00_0000,
            SeedDomain::Test => 0x7465_7374_0000_0000,
            SeedDomain::Custom(v) => splitmix64(v ^ 0x6375_7374_6f6d_0000),
        }
    }
}

/// Counter-based per-snapshot seed:
/// `splitmix64(splitmix64(splitmix64(master) ^ tag(domain)) ^ index)`.
///
/// Every snapshot can be regenerated in isolation from `(master, domain, index)`.
pub fn derive_seed(master_seed: u64, domain: SeedDomain, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ domain.tag()) ^ index)
}

const CHANNEL_STREAM: u64 = 0x6368_616e_6e65_6c21;

/// Place controllers by rejection sampling and devices uniformly in their cells.
pub fn sample_deployment(config: &SystemConfig, seed: u64) -> Result<Geometry> {
    config.validate()?;
    let n = config.n_subnetworks;
    let l = config.area_side;
    let min_sep2 = config.min_controller_separation * config.min_controller_separation;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut controllers: Vec<[f64; 2]> = Vec::with_capacity(n);
    let mut attempts = 0;
    while controllers.len() < n {
        if attempts == config.placement_attempts {
            return Err(Error::PlacementFailure {
                attempts,
                placed: controllers.len(),
                requested: n,
            });
        }
        attempts += 1;
        let cand = [rng.random::<f64>() * l, rng.random::<f64>() * l];
        let clear = controllers.iter().all(|c| {
            let (dx, dy) = (c[0] - cand[0], c[1] - cand[1]);
            dx * dx + dy * dy >= min_sep2
        });
        if clear {
            controllers.push(cand);
        }
    }

    let span = config.cell_radius - config.min_device_distance;
    let mut radii = Vec::with_capacity(n);
    let devices: Vec<[f64; 2]> = controllers
        .iter()
        .map(|c| {
            let angle = rng.random::<f64>() * 2.0 * PI;
            let radius = config.min_device_distance + rng.random::<f64>() * span;
            radii.push(radius);
            [c[0] + radius * angle.cos(), c[1] + radius * angle.sin()]
        })
        .collect();

    let mut distance = Array2::from_shape_fn((n, n), |(m, k)| {
        let (dx, dy) = (devices[m][0] - controllers[k][0], devices[m][1] - controllers[k][1]);
        dx.hypot(dy)
    });
    // keep the sampled radius exactly so the cell-range invariant holds bit-for-bit
    for (k, r) in radii.into_iter().enumerate() {
        distance[[k, k]] = r;
    }

    Ok(Geometry {
        controller_xy: controllers,
        device_xy: devices,
        distance,
    })
}

/// Draw the channel gain matrix for a geometry; shadowing and fading are i.i.d. per ordered link.
pub fn sample_channel(geometry: &Geometry, config: &SystemConfig, seed: u64) -> Result<Array2<f64>> {
    let n = geometry.n();
    if geometry.distance.dim() != (n, n) {
        return Err(Error::Dimension {
            context: "distance matrix",
            expected: n,
            got: geometry.distance.nrows(),
        });
    }
    if let Some(bad) = geometry.distance.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidConfig(format!("non-positive distance {bad}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut channel = Array2::zeros((n, n));
    for m in 0..n {
        for k in 0..n {
            let fading = LinkFading::sample(&mut rng, config.shadowing_std_db);
            let pl = path_gain(geometry.distance[[m, k]], config.carrier_freq, config.pathloss_exponent);
            // exact zero fading power has probability zero but would break the gain invariant
            let small = fading.fading_power.max(f64::MIN_POSITIVE);
            channel[[m, k]] = pl * fading.shadowing_linear() * small;
        }
    }
    Ok(channel)
}

/// Full snapshot from a per-snapshot seed.
pub fn sample_snapshot(config: &SystemConfig, seed: u64) -> Result<Snapshot> {
    let geometry = sample_deployment(config, seed)?;
    let channel = sample_channel(&geometry, config, splitmix64(seed ^ CHANNEL_STREAM))?;
    Ok(Snapshot {
        controller_xy: geometry.controller_xy,
        device_xy: geometry.device_xy,
        distance: geometry.distance,
        channel,
        seed,
    })
}

/// Spectral efficiency of link `n`, bits/s/Hz.
pub fn link_se(n: usize, powers: &[f64], channel: &Array2<f64>, noise: f64) -> f64 {
    let interference: f64 = (0..powers.len())
        .filter(|&m| m != n)
        .map(|m| powers[m] * channel[[m, n]])
        .sum();
    (1.0 + powers[n] * channel[[n, n]] / (interference + noise)).log2()
}

/// Per-link spectral efficiencies.
pub fn link_ses(powers: &[f64], channel: &Array2<f64>, noise: f64) -> Vec<f64> {
    (0..powers.len()).map(|n| link_se(n, powers, channel, noise)).collect()
}

/// Network sum spectral efficiency.
pub fn sum_se(powers: &[f64], channel: &Array2<f64>, noise: f64) -> f64 {
    (0..powers.len()).map(|n| link_se(n, powers, channel, noise)).sum()
}

/// Gradient of [`sum_se`] with respect to every transmit power.
///
/// With `S_n` the total received power at controller `n` and `I_n` its
/// interference-plus-noise, `C_n = log2 S_n - log2 I_n`, so power `p_m`
/// enters `C_m` through `S_m` and every other `C_n` through both terms.
pub fn sum_se_gradient(powers: &[f64], channel: &Array2<f64>, noise: f64) -> Vec<f64> {
    let n = powers.len();
    let mut inv_total = vec![0.0; n];
    let mut inv_interf = vec![0.0; n];
    for k in 0..n {
        let interf: f64 = (0..n)
            .filter(|&m| m != k)
            .map(|m| powers[m] * channel[[m, k]])
            .sum::<f64>()
            + noise;
        inv_interf[k] = 1.0 / interf;
        inv_total[k] = 1.0 / (interf + powers[k] * channel[[k, k]]);
    }
    (0..n)
        .map(|m| {
            let own = channel[[m, m]] * inv_total[m];
            let cross: f64 = (0..n)
                .filter(|&k| k != m)
                .map(|k| channel[[m, k]] * (inv_total[k] - inv_interf[k]))
                .sum();
            (own + cross) / LN_2
        })
        .collect()
}

/// Transmit powers for every subnetwork, in watts, within `[0, max_power]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    powers: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(powers: Vec<f64>, max_power: f64) -> Result<Self> {
        if let Some((i, p)) = powers
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p >= 0.0 && **p <= max_power))
        {
            return Err(Error::InvalidConfig(format!(
                "power {p} at index {i} outside [0, {max_power}]"
            )));
        }
        Ok(Self { powers })
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.powers.iter().sum::<f64>() / self.powers.len() as f64
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.powers
    }
}

/// A batch of snapshots drawn from one configuration and seed domain.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub config: SystemConfig,
    pub domain: SeedDomain,
    pub snapshots: Vec<Snapshot>,
}

impl Dataset {
    pub fn generate(config: &SystemConfig, domain: SeedDomain, count: usize) -> Result<Self> {
        config.validate()?;
        let snapshots = (0..count)
            .into_par_iter()
            .map(|i| {
                sample_snapshot(config, derive_seed(config.master_seed, domain, i as u64)).map_err(|e| e.at_snapshot(i))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: config.clone(),
            domain,
            snapshots,
        })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn noise_power(&self) -> f64 {
        noise_power(&self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> SystemConfig {
        SystemConfig::default()
    }

    #[test]
    fn single_cell_geometry() {
        let c = SystemConfig {
            n_subnetworks: 1,
            ..cfg()
        };
        let g = sample_deployment(&c, 17).unwrap();
        let [x, y] = g.controller_xy[0];
        assert!((0.0..=20.0).contains(&x) && (0.0..=20.0).contains(&y));
        let d = g.distance[[0, 0]];
        assert!((0.5..=2.0).contains(&d));
    }

    #[test]
    fn controllers_respect_separation() {
        let g = sample_deployment(&cfg(), 3).unwrap();
        let mut pairs = 0;
        for i in 0..20 {
            for j in i + 1..20 {
                let (a, b) = (g.controller_xy[i], g.controller_xy[j]);
                assert!((a[0] - b[0]).hypot(a[1] - b[1]) >= 2.0);
                pairs += 1;
            }
        }
        assert_eq!(pairs, 190);
    }

    #[test]
    fn deployment_is_deterministic() {
        let a = sample_snapshot(&cfg(), 99).unwrap();
        let b = sample_snapshot(&cfg(), 99).unwrap();
        assert_eq!(a, b);
        let c = sample_snapshot(&cfg(), 100).unwrap();
        assert_ne!(a.controller_xy, c.controller_xy);
    }

    #[test]
    fn placement_failure_when_too_dense() {
        let c = SystemConfig {
            n_subnetworks: 200,
            placement_attempts: 10_000,
            ..cfg()
        };
        match sample_deployment(&c, 1) {
            Err(Error::PlacementFailure { attempts, .. }) => assert_eq!(attempts, 10_000),
            other => panic!("expected placement failure, got {other:?}"),
        }
    }

    #[test]
    fn distance_matrix_is_device_to_controller() {
        let g = sample_deployment(&cfg(), 5).unwrap();
        let (m, n) = (2, 7);
        let dev = g.device_xy[m];
        let ctl = g.controller_xy[n];
        assert_relative_eq!(g.distance[[m, n]], (dev[0] - ctl[0]).hypot(dev[1] - ctl[1]));
        assert_ne!(g.distance[[m, n]], g.distance[[n, m]]);
        for k in 0..20 {
            let d = g.distance[[k, k]];
            assert!((0.5..=2.0).contains(&d));
            let (dev, ctl) = (g.device_xy[k], g.controller_xy[k]);
            assert_relative_eq!(d, (dev[0] - ctl[0]).hypot(dev[1] - ctl[1]), max_relative = 1e-12);
        }
    }

    #[test]
    fn free_space_gain_at_one_metre() {
        let h = path_gain(1.0, 6e9, 2.7);
        assert_relative_eq!(h, 1.5812e-5, max_relative = 1e-3);
        assert_relative_eq!(10.0 * h.log10(), -48.01, epsilon = 0.01);
        let h2 = path_gain(2.0, 6e9, 2.7);
        assert_relative_eq!(h2, 2.4333e-6, max_relative = 1e-3);
        assert_relative_eq!(h / h2, 2f64.powf(2.7), max_relative = 1e-12);
    }

    #[test]
    fn path_gain_decreases_with_distance() {
        let mut last = f64::INFINITY;
        for i in 1..200 {
            let g = path_gain(0.1 * i as f64, 6e9, 2.7);
            assert!(g < last);
            last = g;
        }
    }

    #[test]
    fn zero_shadowing_gives_unit_kappa() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            assert_eq!(LinkFading::sample(&mut rng, 0.0).shadowing_linear(), 1.0);
        }
    }

    #[test]
    fn channel_positive_finite() {
        let s = sample_snapshot(&cfg(), 8).unwrap();
        assert!(s.channel.iter().all(|h| *h > 0.0 && h.is_finite()));
    }

    #[test]
    fn noise_power_values() {
        assert_relative_eq!(noise_power(&cfg()), 8.00776e-13, max_relative = 1e-5);
        let dbm = 10.0 * (noise_power(&cfg()) / 1e-3).log10();
        assert_relative_eq!(dbm, -90.97, epsilon = 0.01);
        let unit = SystemConfig {
            noise_figure_db: 0.0,
            bandwidth: 1.0,
            temperature: 1.0,
            ..cfg()
        };
        assert_eq!(noise_power(&unit), BOLTZMANN);
        let wide = SystemConfig {
            bandwidth: 40e6,
            ..cfg()
        };
        assert_relative_eq!(noise_power(&wide), 2.0 * noise_power(&cfg()), max_relative = 1e-15);
    }

    #[test]
    fn single_link_se() {
        let h = Array2::from_elem((1, 1), 1.581e-5);
        let c = link_se(0, &[1e-3], &h, 8.008e-13);
        let expected = (1.0 + 1e-3 * 1.581e-5 / 8.008e-13f64).log2();
        assert_relative_eq!(c, expected);
        assert_relative_eq!(c, 14.27, epsilon = 0.01);
        assert_eq!(link_se(0, &[0.0], &h, 8.008e-13), 0.0);
        assert_eq!(sum_se(&[1e-3], &h, 8.008e-13), c);
    }

    #[test]
    fn symmetric_pair_tends_to_unit_se() {
        let h = Array2::from_elem((2, 2), 1e-6);
        let c = link_se(0, &[1e-3, 1e-3], &h, 1e-30);
        assert_relative_eq!(c, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sum_se_composes_link_se() {
        let s = sample_snapshot(
            &SystemConfig {
                n_subnetworks: 3,
                ..cfg()
            },
            11,
        )
        .unwrap();
        let p = [2e-4, 7e-4, 1e-3];
        let nz = noise_power(&cfg());
        let parts: f64 = (0..3).map(|n| link_se(n, &p, &s.channel, nz)).sum();
        assert_eq!(sum_se(&p, &s.channel, nz), parts);
        assert_eq!(sum_se(&[0.0; 3], &s.channel, nz), 0.0);
    }

    #[test]
    fn sum_se_gradient_matches_finite_differences() {
        let s = sample_snapshot(
            &SystemConfig {
                n_subnetworks: 5,
                ..cfg()
            },
            21,
        )
        .unwrap();
        let nz = noise_power(&cfg());
        let p = vec![3e-4, 9e-4, 1e-4, 5e-4, 7e-4];
        let g = sum_se_gradient(&p, &s.channel, nz);
        for m in 0..5 {
            let step = 1e-9;
            let mut up = p.clone();
            up[m] += step;
            let mut dn = p.clone();
            dn[m] -= step;
            let fd = (sum_se(&up, &s.channel, nz) - sum_se(&dn, &s.channel, nz)) / (2.0 * step);
            assert_relative_eq!(g[m], fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn seeds_are_distinct_across_domains() {
        let a = derive_seed(1, SeedDomain::Train, 0);
        let b = derive_seed(1, SeedDomain::Test, 0);
        let c = derive_seed(1, SeedDomain::Train, 1);
        assert!(a != b && a != c && b != c);
        assert_eq!(a, derive_seed(1, SeedDomain::Train, 0));
    }

    #[test]
    fn density_mapping() {
        let base = cfg();
        assert_eq!(base.density_per_km2(), 50_000.0);
        assert_eq!(base.with_density(75_000.0).n_subnetworks, 30);
        assert_eq!(base.with_density(25_000.0).n_subnetworks, 10);
    }

    #[test]
    fn allocation_box_check() {
        assert!(PowerAllocation::new(vec![0.0, 1e-3], 1e-3).is_ok());
        assert!(PowerAllocation::new(vec![1.1e-3], 1e-3).is_err());
        assert!(PowerAllocation::new(vec![f64::NAN], 1e-3).is_err());
    }
}
