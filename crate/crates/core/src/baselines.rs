//! Reference power-control policies: everyone at full power, and the
//! iterative WMMSE sum-rate solver for scalar interference channels.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channel::{sum_se, sum_se_gradient, PowerAllocation};
use crate::error::{Error, Result};

/// Every transmitter at `max_power`.
pub fn max_power(n: usize, max_power: f64) -> PowerAllocation {
    PowerAllocation::new(vec![max_power; n], max_power).expect("P_max lies in [0, P_max]")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WmmseConfig {
    /// Stop once the sum SE changes by less than this between iterations.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for WmmseConfig {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 500,
        }
    }
}

/// Solver variables after the last completed iteration.
///
/// `v` holds transmit amplitudes (`p = v^2`), `u` receiver gains and `w`
/// MSE weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WmmseState {
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub iterations: usize,
    /// Sum SE at the initial point followed by one entry per iteration.
    pub trajectory: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct WmmseOutcome {
    pub allocation: PowerAllocation,
    pub iterations: usize,
    pub converged: bool,
    pub state: WmmseState,
}

impl WmmseOutcome {
    pub fn trajectory(&self) -> &[f64] {
        &self.state.trajectory
    }

    pub fn sum_se(&self) -> f64 {
        *self
            .state
            .trajectory
            .last()
            .expect("trajectory holds the initial point")
    }
}

/// Block-coordinate WMMSE starting from full power.
///
/// `channel[[m, n]]` is the gain from transmitter `m` to receiver `n`.
pub fn wmmse(channel: &Array2<f64>, noise: f64, max_power: f64, config: WmmseConfig) -> Result<WmmseOutcome> {
    let n = channel.nrows();
    if channel.ncols() != n {
        return Err(Error::Dimension {
            context: "channel matrix columns",
            expected: n,
            got: channel.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::EmptyInput("channel matrix"));
    }
    if !(config.tol > 0.0) || config.max_iter == 0 {
        return Err(Error::InvalidConfig("wmmse needs tol > 0 and max_iter >= 1".into()));
    }
    if !(noise > 0.0) || !(max_power > 0.0) || channel.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidConfig(
            "wmmse needs positive finite gains, noise and P_max".into(),
        ));
    }

    let v_max = max_power.sqrt();
    let amp = channel.mapv(f64::sqrt);
    let mut v = vec![v_max; n];
    let mut u = vec![0.0; n];
    let mut w = vec![0.0; n];
    let powers = |v: &[f64]| v.iter().map(|x| (x * x).min(max_power)).collect::<Vec<_>>();
    let mut trajectory = vec![sum_se(&powers(&v), channel, noise)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        for k in 0..n {
            let received: f64 = (0..n).map(|m| channel[[m, k]] * v[m] * v[m]).sum::<f64>() + noise;
            u[k] = amp[[k, k]] * v[k] / received;
            w[k] = 1.0 / (1.0 - u[k] * amp[[k, k]] * v[k]).max(1e-15);
        }
        for k in 0..n {
            let denom: f64 = (0..n).map(|m| w[m] * u[m] * u[m] * channel[[k, m]]).sum();
            let target = w[k] * u[k] * amp[[k, k]] / denom;
            v[k] = if target.is_finite() {
                target.clamp(0.0, v_max)
            } else {
                v_max
            };
        }
        iterations += 1;
        let se = sum_se(&powers(&v), channel, noise);
        if !se.is_finite() {
            return Err(Error::NonFinite(format!("wmmse sum SE at iteration {iterations}")));
        }
        let prev = *trajectory.last().expect("non-empty");
        trajectory.push(se);
        if (se - prev).abs() < config.tol {
            converged = true;
            break;
        }
    }

    let allocation = PowerAllocation::new(powers(&v), max_power)?;
    Ok(WmmseOutcome {
        allocation,
        iterations,
        converged,
        state: WmmseState {
            v,
            u,
            w,
            iterations,
            trajectory,
        },
    })
}

/// Exhaustive search over `grid_points` evenly spaced powers per link,
/// endpoints `0` and `max_power` included. Returns the best allocation and
/// its sum SE; ties keep the first grid point in lexicographic order.
pub fn grid_oracle(
    channel: &Array2<f64>,
    noise: f64,
    max_power: f64,
    grid_points: usize,
) -> Result<(PowerAllocation, f64)> {
    let n = channel.nrows();
    if n > 3 {
        return Err(Error::OracleTooLarge(n));
    }
    if n == 0 {
        return Err(Error::EmptyInput("channel matrix"));
    }
    if grid_points < 2 {
        return Err(Error::InvalidConfig("grid oracle needs at least 2 points".into()));
    }
    let level = |i: usize| {
        if i + 1 == grid_points {
            max_power
        } else {
            max_power * i as f64 / (grid_points - 1) as f64
        }
    };
    let total = grid_points.pow(n as u32);
    let mut idx = vec![0usize; n];
    let mut p = vec![0.0; n];
    let mut best = (vec![0.0; n], f64::NEG_INFINITY);
    for _ in 0..total {
        for (pk, &i) in p.iter_mut().zip(&idx) {
            *pk = level(i);
        }
        let se = sum_se(&p, channel, noise);
        if se > best.1 {
            best = (p.clone(), se);
        }
        for d in (0..n).rev() {
            idx[d] += 1;
            if idx[d] < grid_points {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok((PowerAllocation::new(best.0, max_power)?, best.1))
}

/// Allowance for `powers` beating the `grid_points` oracle optimum.
///
/// The nearest grid point lies within half a spacing of `powers` in every
/// coordinate; the first-order change over that distance, doubled to cover
/// curvature, bounds how much better an off-grid point can be.
pub fn grid_slack(channel: &Array2<f64>, noise: f64, powers: &[f64], max_power: f64, grid_points: usize) -> f64 {
    let half = 0.5 * max_power / (grid_points.max(2) - 1) as f64;
    let grad = sum_se_gradient(powers, channel, noise);
    2.0 * half * grad.iter().map(|g| g.abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_snapshot, SystemConfig};
    use ndarray::array;

    #[test]
    fn max_power_fills_every_link() {
        let p = max_power(20, 1e-3);
        assert_eq!(p.powers(), &[1e-3; 20][..]);
        assert_eq!(max_power(1, 2.0).powers(), &[2.0]);
    }

    #[test]
    fn single_link_stays_at_full_power() {
        let out = wmmse(&array![[1e-7]], 1e-12, 1e-3, WmmseConfig::default()).unwrap();
        assert!(out.converged);
        assert!((out.allocation.powers()[0] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_pair_silences_one_link() {
        // link 1 is swamped by link 0 and still costs link 0 half its SINR
        let h = array![[1e-6, 1e-7], [1e-10, 1e-9]];
        let noise = 1e-13;
        let out = wmmse(&h, noise, 1e-3, WmmseConfig::default()).unwrap();
        let p = out.allocation.powers();
        assert!(p[1] < 1e-3 * 1e-3, "{p:?}");
        assert!(out.sum_se() >= sum_se(max_power(2, 1e-3).powers(), &h, noise));
        let (_, oracle) = grid_oracle(&h, noise, 1e-3, 1001).unwrap();
        assert!(out.sum_se() <= oracle + 1e-6);
    }

    #[test]
    fn trajectory_is_monotone_and_scale_free() {
        let cfg = SystemConfig::default();
        let noise = cfg.noise_power();
        for seed in 0..20 {
            let s = sample_snapshot(&cfg, seed).unwrap();
            let a = wmmse(&s.channel, noise, cfg.max_power, WmmseConfig::default()).unwrap();
            assert!(a.trajectory().windows(2).all(|w| w[1] >= w[0] - 1e-9));
            let b = wmmse(&(&s.channel * 1e4), noise * 1e4, cfg.max_power, WmmseConfig::default()).unwrap();
            assert_eq!(a.iterations, b.iterations);
            for (x, y) in a.allocation.powers().iter().zip(b.allocation.powers()) {
                assert!((x - y).abs() <= 1e-9 * cfg.max_power, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn matches_independent_three_link_trace() {
        // reference values from a separate numpy implementation
        let h = array![
            [2.0e-6, 3.0e-8, 1.5e-7],
            [4.0e-8, 9.0e-7, 2.0e-7],
            [6.0e-7, 1.0e-8, 1.2e-6]
        ];
        let cfg = WmmseConfig {
            tol: 1e-300,
            max_iter: 8,
        };
        let out = wmmse(&h, 8.0e-13, 1e-3, cfg).unwrap();
        let p = [0.00034132768082005804, 0.0009999999999999998, 0.0003577380337244409];
        for (a, b) in out.allocation.powers().iter().zip(p) {
            assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
        }
        let traj = [
            8.71456798098514,
            8.802574410171658,
            8.882314851374762,
            8.954555224606487,
            9.02068655139849,
            9.082753287512446,
            9.143569813132116,
            9.207053567202864,
            9.279005779621711,
        ];
        for (a, b) in out.trajectory().iter().zip(traj) {
            assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let s = sample_snapshot(&SystemConfig::default(), 3).unwrap();
        let cfg = WmmseConfig {
            tol: 1e-300,
            max_iter: 2,
        };
        let out = wmmse(&s.channel, 1e-12, 1e-3, cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
        assert_eq!(out.trajectory().len(), 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(wmmse(&array![[1.0, 0.0], [1.0, 1.0]], 1.0, 1.0, WmmseConfig::default()).is_err());
        assert!(wmmse(&array![[1.0]], 1.0, 1.0, WmmseConfig { tol: 0.0, max_iter: 5 }).is_err());
        assert!(matches!(
            grid_oracle(&Array2::ones((4, 4)), 1.0, 1.0, 3),
            Err(Error::OracleTooLarge(4))
        ));
    }

    #[test]
    fn oracle_refines_and_handles_one_link() {
        let (p, _) = grid_oracle(&array![[1e-7]], 1e-12, 1e-3, 11).unwrap();
        assert_eq!(p.powers(), &[1e-3]);
        let s = sample_snapshot(
            &SystemConfig {
                n_subnetworks: 2,
                ..SystemConfig::default()
            },
            9,
        )
        .unwrap();
        let mut last = f64::NEG_INFINITY;
        for g in [2, 3, 5, 9, 17, 33] {
            let (_, v) = grid_oracle(&s.channel, 1e-12, 1e-3, g).unwrap();
            assert!(v >= last);
            last = v;
        }
    }
}
