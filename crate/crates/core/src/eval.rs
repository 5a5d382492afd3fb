//! Policy evaluation over snapshot sets, CDFs, gains and robustness sweeps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{max_power, wmmse, WmmseConfig};
use crate::channel::{link_ses, Dataset, PowerAllocation, SeedDomain, Snapshot, SystemConfig};
use crate::error::{Error, Result};
use crate::graph::{build_graph_from, AuditedLinks, DesiredLinkView, FeatureGraph, Variant};
use crate::pcgnn::PcgnnModel;
use crate::scalar::Scalar;

/// Graphs per forward pass during inference.
const INFER_CHUNK: usize = 64;

pub enum Policy<'a, T = f32> {
    MaxPower,
    Wmmse(WmmseConfig),
    Pcgnn(&'a PcgnnModel<T>),
}

impl<T: Scalar> Policy<'_, T> {
    /// Stable label used in result tables.
    pub fn id(&self) -> String {
        match self {
            Policy::MaxPower => "max_power".into(),
            Policy::Wmmse(_) => "wmmse".into(),
            Policy::Pcgnn(m) => format!("pcgnn-{}", m.variant),
        }
    }
}

/// Outcome of one policy on one snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub policy: String,
    pub snapshot: usize,
    /// Mean spectral efficiency over the links, bits/s/Hz.
    pub avg_se: f64,
    /// Mean transmit power over the links, W.
    pub avg_power: f64,
    pub iterations: Option<usize>,
}

impl MetricsRecord {
    /// Mean power within `[0, max_power]` and a finite, non-negative SE.
    ///
    /// The mean of powers that all equal `max_power` can round above it, so
    /// the upper bound allows a relative 1e-12.
    pub fn is_feasible(&self, max_power: f64) -> bool {
        self.avg_power >= 0.0
            && self.avg_power <= max_power * (1.0 + 1e-12)
            && self.avg_se >= 0.0
            && self.avg_se.is_finite()
    }

    fn new(
        policy: &str,
        snapshot: usize,
        s: &Snapshot,
        alloc: &PowerAllocation,
        noise: f64,
        iterations: Option<usize>,
    ) -> Self {
        let ses = link_ses(alloc.powers(), &s.channel, noise);
        Self {
            policy: policy.to_string(),
            snapshot,
            avg_se: ses.iter().sum::<f64>() / ses.len() as f64,
            avg_power: alloc.mean(),
            iterations,
        }
    }
}

/// Raw input graph for `variant` built from what that variant may observe.
///
/// hD and dD read the snapshot through a view that holds no interfering
/// gains, wrapped in an audit; any cross-gain read is an error.
pub fn observed_graph(snapshot: &Snapshot, variant: Variant) -> Result<FeatureGraph> {
    if variant.needs_full_csi() {
        return build_graph_from(snapshot, variant);
    }
    let view = DesiredLinkView::new(snapshot);
    let audited = AuditedLinks::new(&view);
    let graph = build_graph_from(&audited, variant)?;
    if audited.cross_reads() != 0 {
        return Err(Error::InvalidConfig(format!(
            "variant {variant} read {} interfering gains",
            audited.cross_reads()
        )));
    }
    Ok(graph)
}

/// Allocations of `model` for every snapshot, in order.
pub fn pcgnn_allocations<T: Scalar>(model: &PcgnnModel<T>, snapshots: &[Snapshot]) -> Result<Vec<PowerAllocation>> {
    let graphs = snapshots
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            observed_graph(s, model.variant)
                .and_then(|g| model.prepare(&g))
                .map_err(|e| e.at_snapshot(i))
        })
        .collect::<Result<Vec<_>>>()?;
    let parts = graphs
        .par_chunks(INFER_CHUNK)
        .map(|c| model.infer(c, INFER_CHUNK))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Run `policy` on every snapshot of `dataset`.
pub fn evaluate<T: Scalar>(policy: &Policy<'_, T>, dataset: &Dataset) -> Result<Vec<MetricsRecord>> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("evaluation dataset"));
    }
    let id = policy.id();
    let noise = dataset.noise_power();
    let p_max = dataset.config.max_power;
    let snaps = &dataset.snapshots;
    match policy {
        Policy::MaxPower => Ok(snaps
            .iter()
            .enumerate()
            .map(|(i, s)| MetricsRecord::new(&id, i, s, &max_power(s.n(), p_max), noise, None))
            .collect()),
        Policy::Wmmse(cfg) => snaps
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let out = wmmse(&s.channel, noise, p_max, *cfg).map_err(|e| e.at_snapshot(i))?;
                Ok(MetricsRecord::new(
                    &id,
                    i,
                    s,
                    &out.allocation,
                    noise,
                    Some(out.iterations),
                ))
            })
            .collect(),
        Policy::Pcgnn(model) => {
            if model.max_power != p_max {
                return Err(Error::InvalidConfig(format!(
                    "model P_max {} differs from dataset P_max {p_max}",
                    model.max_power
                )));
            }
            let allocs = pcgnn_allocations(model, snaps)?;
            Ok(snaps
                .iter()
                .zip(&allocs)
                .enumerate()
                .map(|(i, (s, a))| MetricsRecord::new(&id, i, s, a, noise, None))
                .collect())
        }
    }
}

/// Right-continuous empirical CDF: one `(value, P[X <= value])` pair per distinct value.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("cdf values"));
    }
    if let Some(v) = values.iter().find(|v| v.is_nan()) {
        return Err(Error::NonFinite(format!("cdf value {v}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = p,
            _ => out.push((v, p)),
        }
    }
    Ok(out)
}

/// Aggregates of one policy's records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub count: usize,
    pub mean_se: f64,
    pub mean_power: f64,
    pub mean_iterations: Option<f64>,
}

pub fn summarize(records: &[MetricsRecord]) -> Result<PolicySummary> {
    let first = records.first().ok_or(Error::EmptyInput("metrics records"))?;
    let n = records.len() as f64;
    let iters: Vec<usize> = records.iter().filter_map(|r| r.iterations).collect();
    Ok(PolicySummary {
        policy: first.policy.clone(),
        count: records.len(),
        mean_se: records.iter().map(|r| r.avg_se).sum::<f64>() / n,
        mean_power: records.iter().map(|r| r.avg_power).sum::<f64>() / n,
        mean_iterations: (!iters.is_empty()).then(|| iters.iter().sum::<usize>() as f64 / iters.len() as f64),
    })
}

/// `100 (mean_a - mean_b) / mean_b` over the average SE of two record sets
/// covering the same snapshots.
pub fn gain_vs_baseline(a: &[MetricsRecord], b: &[MetricsRecord]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("metrics records"));
    }
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.snapshot != y.snapshot) {
        return Err(Error::SnapshotMismatch);
    }
    let mean = |r: &[MetricsRecord]| r.iter().map(|x| x.avg_se).sum::<f64>() / r.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    Ok(100.0 * (ma - mb) / mb)
}

/// Swept scenario parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    /// Shadowing standard deviation in dB.
    Shadowing,
    /// Subnetworks per km² in a fixed hall.
    Density,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Shadowing => "shadowing",
            SweepParam::Density => "density",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shadowing" | "lambda" => Ok(SweepParam::Shadowing),
            "density" => Ok(SweepParam::Density),
            other => Err(Error::InvalidConfig(format!("unknown sweep parameter {other:?}"))),
        }
    }
}

/// How models relate to the sweep grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// One model trained at the base value, tested at every grid value.
    T1,
    /// One model trained at each grid value.
    T2,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::T1 => "T1",
            Protocol::T2 => "T2",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T1" | "t1" => Ok(Protocol::T1),
            "T2" | "t2" => Ok(Protocol::T2),
            other => Err(Error::InvalidConfig(format!("unknown protocol {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub grid: Vec<f64>,
    /// Value the single T1 model is trained at.
    pub train_value: f64,
    /// Scenario for everything not swept; its master seed drives the test sets.
    pub base: SystemConfig,
    pub test_count: usize,
}

impl SweepSpec {
    pub fn shadowing(base: SystemConfig, test_count: usize) -> Self {
        Self {
            param: SweepParam::Shadowing,
            grid: vec![4.0, 7.0, 10.0],
            train_value: 7.0,
            base,
            test_count,
        }
    }

    pub fn density(base: SystemConfig, test_count: usize) -> Self {
        Self {
            param: SweepParam::Density,
            grid: vec![25_000.0, 50_000.0, 75_000.0],
            train_value: 50_000.0,
            base,
            test_count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        if !self.grid.contains(&self.train_value) {
            return Err(Error::InvalidConfig(format!(
                "training value {} is not on the sweep grid",
                self.train_value
            )));
        }
        if self.test_count == 0 {
            return Err(Error::InvalidConfig("sweep needs at least one test snapshot".into()));
        }
        for &v in &self.grid {
            self.config_at(v).validate()?;
        }
        Ok(())
    }

    /// Scenario at one grid value.
    pub fn config_at(&self, value: f64) -> SystemConfig {
        match self.param {
            SweepParam::Shadowing => SystemConfig {
                shadowing_std_db: value,
                ..self.base.clone()
            },
            SweepParam::Density => self.base.with_density(value),
        }
    }

    /// Fresh test set at one grid value.
    pub fn test_set(&self, value: f64) -> Result<Dataset> {
        Dataset::generate(&self.config_at(value), SeedDomain::Test, self.test_count)
    }

    /// Training set at one grid value, from the training seed domain.
    pub fn train_set(&self, value: f64, count: usize) -> Result<Dataset> {
        Dataset::generate(&self.config_at(value), SeedDomain::Train, count)
    }
}

/// Gain of one PCGNN variant over Max Power at one grid value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub variant: Variant,
    pub protocol: Protocol,
    pub gain_pct: f64,
    pub mean_se: f64,
    pub max_power_se: f64,
}

/// Gains vs Max Power over the grid.
///
/// `model_for(variant, value)` supplies the model tested at `value`: under
/// T1 it should ignore `value`, under T2 return the model trained there.
pub fn robustness_sweep<'m, T: Scalar>(
    spec: &SweepSpec,
    protocol: Protocol,
    variants: &[Variant],
    model_for: impl Fn(Variant, f64) -> Option<&'m PcgnnModel<T>>,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &value in &spec.grid {
        let test = spec.test_set(value)?;
        let base = evaluate::<T>(&Policy::MaxPower, &test)?;
        let base_se = summarize(&base)?.mean_se;
        for &variant in variants {
            let model = model_for(variant, value)
                .ok_or_else(|| Error::Missing(format!("{protocol} model for {variant} at {} = {value}", spec.param)))?;
            if model.variant != variant {
                return Err(Error::VariantMismatch {
                    model: model.variant.to_string(),
                    input: variant.to_string(),
                });
            }
            let recs = evaluate(&Policy::Pcgnn(model), &test)?;
            rows.push(SweepRow {
                param: spec.param,
                value,
                variant,
                protocol,
                gain_pct: gain_vs_baseline(&recs, &base)?,
                mean_se: summarize(&recs)?.mean_se,
                max_power_se: base_se,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, Normalizer};
    use crate::pcgnn::Architecture;

    fn small_set(n: usize, count: usize) -> Dataset {
        let cfg = SystemConfig {
            n_subnetworks: n,
            ..SystemConfig::default()
        };
        Dataset::generate(&cfg, SeedDomain::Test, count).unwrap()
    }

    fn model_for(ds: &Dataset, variant: Variant) -> PcgnnModel<f32> {
        let raw: Vec<_> = ds.snapshots.iter().map(|s| build_graph(s, variant)).collect();
        let norm = Normalizer::fit(&raw, ds.config.area_side).unwrap();
        PcgnnModel::new(Architecture::default(), norm, ds.config.max_power, 3).unwrap()
    }

    #[test]
    fn full_power_means_count_as_feasible() {
        let ds = small_set(20, 5);
        let p_max = ds.config.max_power;
        let recs = evaluate::<f32>(&Policy::MaxPower, &ds).unwrap();
        assert!(recs.iter().all(|r| r.is_feasible(p_max)));
        let over = MetricsRecord {
            avg_power: p_max * 1.001,
            ..recs[0].clone()
        };
        assert!(!over.is_feasible(p_max));
    }

    #[test]
    fn cdf_small_cases() {
        assert_eq!(
            empirical_cdf(&[3.0, 1.0, 2.0]).unwrap(),
            vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]
        );
        assert_eq!(empirical_cdf(&[5.0; 4]).unwrap(), vec![(5.0, 1.0)]);
        assert!(empirical_cdf(&[]).is_err());
        assert!(empirical_cdf(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn max_power_records_sit_at_p_max() {
        let ds = small_set(6, 5);
        let recs = evaluate::<f32>(&Policy::MaxPower, &ds).unwrap();
        assert!(recs
            .iter()
            .all(|r| r.avg_power == ds.config.max_power && r.avg_se >= 0.0));
        assert_eq!(gain_vs_baseline(&recs, &recs).unwrap(), 0.0);
    }

    #[test]
    fn gain_rejects_mismatched_sets() {
        let ds = small_set(4, 4);
        let a = evaluate::<f32>(&Policy::MaxPower, &ds).unwrap();
        assert!(matches!(gain_vs_baseline(&a, &a[1..]), Err(Error::SnapshotMismatch)));
    }

    #[test]
    fn pcgnn_evaluation_is_deterministic_and_feasible() {
        let ds = small_set(7, 6);
        for v in Variant::ALL {
            let m = model_for(&ds, v);
            let a = evaluate(&Policy::Pcgnn(&m), &ds).unwrap();
            let b = evaluate(&Policy::Pcgnn(&m), &ds).unwrap();
            assert_eq!(a, b);
            assert!(a.iter().all(|r| (0.0..=ds.config.max_power).contains(&r.avg_power)));
            assert_eq!(a[0].policy, format!("pcgnn-{v}"));
        }
    }

    #[test]
    fn wmmse_records_carry_iterations() {
        let ds = small_set(5, 3);
        let recs = evaluate::<f32>(&Policy::Wmmse(WmmseConfig::default()), &ds).unwrap();
        assert!(recs.iter().all(|r| r.iterations.is_some()));
        assert!(summarize(&recs).unwrap().mean_iterations.is_some());
    }

    #[test]
    fn density_grid_maps_to_link_counts() {
        let spec = SweepSpec::density(SystemConfig::default(), 1);
        let n: Vec<usize> = spec.grid.iter().map(|&d| spec.config_at(d).n_subnetworks).collect();
        assert_eq!(n, vec![10, 20, 30]);
        assert!(SweepSpec {
            grid: vec![],
            ..spec.clone()
        }
        .validate()
        .is_err());
        assert!(SweepSpec {
            train_value: 1.0,
            ..spec
        }
        .validate()
        .is_err());
    }

    #[test]
    fn t2_sweep_requires_every_model() {
        let spec = SweepSpec::shadowing(
            SystemConfig {
                n_subnetworks: 4,
                ..SystemConfig::default()
            },
            2,
        );
        let ds = small_set(4, 4);
        let m = model_for(&ds, Variant::HD);
        let only_base = |_: Variant, v: f64| (v == 7.0).then_some(&m);
        assert!(matches!(
            robustness_sweep(&spec, Protocol::T2, &[Variant::HD], only_base),
            Err(Error::Missing(_))
        ));
        let rows = robustness_sweep(&spec, Protocol::T1, &[Variant::HD], |_, _| Some(&m)).unwrap();
        assert_eq!(rows.len(), 3);
    }
}
