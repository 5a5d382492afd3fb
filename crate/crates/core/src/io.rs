//! On-disk formats: datasets, models, checkpoints and result tables.
//!
//! Every file is written to a temporary sibling and renamed into place, and
//! existing outputs are only replaced when `force` is set.
//!
//! A dataset directory holds `manifest.json` and `snapshots.csv`. Each CSV
//! row is one snapshot with columns
//!
//! ```text
//! index, seed,
//! cx_0, cy_0, ..., cx_{N-1}, cy_{N-1},     controller positions (m)
//! dx_0, dy_0, ..., dx_{N-1}, dy_{N-1},     device positions (m)
//! d_0_0, d_0_1, ..., d_{N-1}_{N-1},        distances, row-major (device m, controller n)
//! h_0_0, h_0_1, ..., h_{N-1}_{N-1},        linear gains, row-major (device m, controller n)
//! ```
//!
//! Floats are written in shortest round-trip form, so reloading is bit-exact.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{derive_seed, Dataset, SeedDomain, Snapshot, SystemConfig};
use crate::error::{Error, Result};
use crate::eval::{MetricsRecord, SweepRow};
use crate::graph::{Normalizer, Variant};
use crate::nn::AdamState;
use crate::pcgnn::{Architecture, PcgnnModel, TrainConfig, Trainer};
use crate::scalar::{cast_slice, Scalar};

pub const DATASET_VERSION: u32 = 1;
pub const MODEL_VERSION: u32 = 1;
pub const CHECKPOINT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const SNAPSHOTS: &str = "snapshots.csv";

/// Write `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8], force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::WouldOverwrite(path.to_path_buf()));
    }
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_json<S: Serialize>(path: &Path, value: &S, force: bool) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes(), force)
}

fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Missing(path.display().to_string()),
        _ => Error::Io(e),
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn check_header(kind: &'static str, format: &str, expected_format: &str, version: u32, expected: u32) -> Result<()> {
    if format != expected_format {
        return Err(Error::Format {
            kind,
            detail: format!("format tag {format:?}, expected {expected_format:?}"),
        });
    }
    if version != expected {
        return Err(Error::UnsupportedVersion {
            kind,
            found: version,
            expected,
        });
    }
    Ok(())
}

/// Hex SHA-256 of the canonical JSON encoding of `value`.
pub fn digest<S: Serialize>(value: &S) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub config: SystemConfig,
    pub domain: SeedDomain,
    pub count: usize,
    pub n_subnetworks: usize,
    pub records: String,
    pub columns: String,
}

impl DatasetManifest {
    fn for_dataset(dataset: &Dataset) -> Self {
        Self {
            format: "subnetpc-dataset".into(),
            version: DATASET_VERSION,
            config: dataset.config.clone(),
            domain: dataset.domain,
            count: dataset.len(),
            n_subnetworks: dataset.config.n_subnetworks,
            records: SNAPSHOTS.into(),
            columns: "index,seed,controller xy,device xy,distance row-major,gain row-major".into(),
        }
    }
}

fn snapshot_header(n: usize) -> Vec<String> {
    let mut h = vec!["index".to_string(), "seed".to_string()];
    for p in ["c", "d"] {
        for i in 0..n {
            h.push(format!("{p}x_{i}"));
            h.push(format!("{p}y_{i}"));
        }
    }
    for p in ["d", "h"] {
        for m in 0..n {
            for k in 0..n {
                h.push(format!("{p}_{m}_{k}"));
            }
        }
    }
    h
}

/// Write `dataset` into directory `dir`.
pub fn save_dataset(dataset: &Dataset, dir: &Path, force: bool) -> Result<()> {
    let manifest_path = dir.join(MANIFEST);
    let records_path = dir.join(SNAPSHOTS);
    for p in [&manifest_path, &records_path] {
        if p.exists() && !force {
            return Err(Error::WouldOverwrite(p.clone()));
        }
    }
    let n = dataset.config.n_subnetworks;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(snapshot_header(n))?;
    for (i, s) in dataset.snapshots.iter().enumerate() {
        if s.n() != n {
            return Err(Error::Dimension {
                context: "snapshot size",
                expected: n,
                got: s.n(),
            });
        }
        let mut row = vec![i.to_string(), s.seed.to_string()];
        for xy in s.controller_xy.iter().chain(&s.device_xy) {
            row.push(xy[0].to_string());
            row.push(xy[1].to_string());
        }
        row.extend(s.distance.iter().map(f64::to_string));
        row.extend(s.channel.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(&records_path, &bytes, force)?;
    write_json(&manifest_path, &DatasetManifest::for_dataset(dataset), force)
}

/// Read a dataset directory, checking it against its manifest.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest: DatasetManifest = read_json(&dir.join(MANIFEST))?;
    check_header(
        "dataset",
        &manifest.format,
        "subnetpc-dataset",
        manifest.version,
        DATASET_VERSION,
    )?;
    manifest.config.validate()?;
    let n = manifest.n_subnetworks;
    let bad = |detail: String| Error::Format {
        kind: "dataset",
        detail,
    };
    let path = dir.join(&manifest.records);
    if !path.exists() {
        return Err(Error::Missing(path.display().to_string()));
    }
    let mut reader = csv::Reader::from_path(&path)?;
    if reader.headers()?.len() != 2 + 4 * n + 2 * n * n {
        return Err(bad(format!("header does not match N = {n}")));
    }
    let mut snapshots = Vec::with_capacity(manifest.count);
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let num = |j: usize| -> Result<f64> {
            row[j]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {i} column {j}: {e}")))
        };
        let index: usize = row[0].parse().map_err(|e| bad(format!("row {i} index: {e}")))?;
        let seed: u64 = row[1].parse().map_err(|e| bad(format!("row {i} seed: {e}")))?;
        if index != i || seed != derive_seed(manifest.config.master_seed, manifest.domain, i as u64) {
            return Err(bad(format!("row {i} index or seed does not follow the manifest")));
        }
        let xy = |off: usize| -> Result<Vec<[f64; 2]>> {
            (0..n).map(|k| Ok([num(off + 2 * k)?, num(off + 2 * k + 1)?])).collect()
        };
        let mat = |off: usize| -> Result<Array2<f64>> {
            let v = (0..n * n).map(|k| num(off + k)).collect::<Result<Vec<_>>>()?;
            Ok(Array2::from_shape_vec((n, n), v).expect("n*n values"))
        };
        snapshots.push(Snapshot {
            controller_xy: xy(2)?,
            device_xy: xy(2 + 2 * n)?,
            distance: mat(2 + 4 * n)?,
            channel: mat(2 + 4 * n + n * n)?,
            seed,
        });
    }
    if snapshots.len() != manifest.count {
        return Err(bad(format!(
            "{} records, manifest says {}",
            snapshots.len(),
            manifest.count
        )));
    }
    Ok(Dataset {
        config: manifest.config,
        domain: manifest.domain,
        snapshots,
    })
}

/// How a model was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub system: SystemConfig,
    pub train: TrainConfig,
    pub train_count: usize,
    pub loss_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    /// Scalar type the weights were trained in.
    pub scalar: String,
    pub variant: Variant,
    pub architecture: Architecture,
    pub normalizer: Normalizer,
    pub max_power: f64,
    /// Per layer: message MLP then combination MLP, each dense layer's
    /// weight (row-major, output by input) followed by its bias.
    pub params: Vec<f64>,
    pub provenance: Option<Provenance>,
    /// SHA-256 of the provenance, empty without one.
    pub config_digest: String,
}

impl ModelFile {
    pub fn from_model<T: Scalar>(model: &PcgnnModel<T>, provenance: Option<Provenance>) -> Result<Self> {
        let config_digest = match &provenance {
            Some(p) => digest(&(&p.system, &p.train, &model.architecture, model.variant))?,
            None => String::new(),
        };
        Ok(Self {
            format: "subnetpc-model".into(),
            version: MODEL_VERSION,
            scalar: T::NAME.into(),
            variant: model.variant,
            architecture: model.architecture.clone(),
            normalizer: model.normalizer.clone(),
            max_power: model.max_power,
            params: cast_slice(&model.params()),
            provenance,
            config_digest,
        })
    }

    pub fn to_model<T: Scalar>(&self) -> Result<PcgnnModel<T>> {
        check_header("model", &self.format, "subnetpc-model", self.version, MODEL_VERSION)?;
        if self.normalizer.variant != self.variant {
            return Err(Error::Format {
                kind: "model",
                detail: "normalizer variant differs from model variant".into(),
            });
        }
        if let Some(v) = self.params.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("model parameter {v}")));
        }
        let mut model = PcgnnModel::<T>::zeroed(self.architecture.clone(), self.normalizer.clone(), self.max_power)?;
        model.set_params(&cast_slice(&self.params))?;
        Ok(model)
    }
}

pub fn save_model<T: Scalar>(
    model: &PcgnnModel<T>,
    provenance: Option<Provenance>,
    path: &Path,
    force: bool,
) -> Result<()> {
    write_json(path, &ModelFile::from_model(model, provenance)?, force)
}

pub fn load_model_file(path: &Path) -> Result<ModelFile> {
    read_json(path)
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<PcgnnModel<T>> {
    load_model_file(path)?.to_model()
}

/// Everything needed to resume training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model: ModelFile,
    pub adam: AdamState<f64>,
    pub config: TrainConfig,
    pub epoch: usize,
    pub history: Vec<f64>,
}

impl Checkpoint {
    pub fn from_trainer<T: Scalar>(trainer: &Trainer<T>) -> Result<Self> {
        Ok(Self {
            format: "subnetpc-checkpoint".into(),
            version: CHECKPOINT_VERSION,
            model: ModelFile::from_model(&trainer.model, None)?,
            adam: AdamState {
                config: trainer.adam.config,
                m: cast_slice(&trainer.adam.m),
                v: cast_slice(&trainer.adam.v),
                t: trainer.adam.t,
            },
            config: trainer.config.clone(),
            epoch: trainer.epoch,
            history: trainer.history.clone(),
        })
    }

    pub fn into_trainer<T: Scalar>(self) -> Result<Trainer<T>> {
        check_header(
            "checkpoint",
            &self.format,
            "subnetpc-checkpoint",
            self.version,
            CHECKPOINT_VERSION,
        )?;
        let model = self.model.to_model::<T>()?;
        let n = model.param_count();
        if self.adam.m.len() != n || self.adam.v.len() != n {
            return Err(Error::Dimension {
                context: "optimizer moments",
                expected: n,
                got: self.adam.m.len().min(self.adam.v.len()),
            });
        }
        if self.history.len() != self.epoch {
            return Err(Error::Format {
                kind: "checkpoint",
                detail: "loss history length differs from epoch count".into(),
            });
        }
        let mut trainer = Trainer::new(model, self.config);
        trainer.adam = AdamState {
            config: self.adam.config,
            m: cast_slice(&self.adam.m),
            v: cast_slice(&self.adam.v),
            t: self.adam.t,
        };
        trainer.epoch = self.epoch;
        trainer.history = self.history;
        Ok(trainer)
    }
}

pub fn save_checkpoint<T: Scalar>(trainer: &Trainer<T>, path: &Path) -> Result<()> {
    write_json(path, &Checkpoint::from_trainer(trainer)?, true)
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Trainer<T>> {
    read_json::<Checkpoint>(path)?.into_trainer()
}

fn csv_bytes<S: Serialize>(rows: impl IntoIterator<Item = S>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_records(path: &Path, records: &[MetricsRecord], force: bool) -> Result<()> {
    write_atomic(path, &csv_bytes(records)?, force)
}

pub fn read_records(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

#[derive(Serialize)]
struct CdfRow<'a> {
    policy: &'a str,
    value: f64,
    probability: f64,
}

/// Long-format CDF table: `policy,value,probability`.
pub fn write_cdfs(path: &Path, cdfs: &[(String, Vec<(f64, f64)>)], force: bool) -> Result<()> {
    let rows = cdfs.iter().flat_map(|(p, c)| {
        c.iter().map(move |&(value, probability)| CdfRow {
            policy: p,
            value,
            probability,
        })
    });
    write_atomic(path, &csv_bytes(rows)?, force)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub policy: String,
    pub baseline: String,
    pub gain_pct: f64,
}

pub fn write_gains(path: &Path, rows: &[GainRow], force: bool) -> Result<()> {
    write_atomic(path, &csv_bytes(rows)?, force)
}

#[derive(Serialize)]
struct LossRow {
    epoch: usize,
    loss: f64,
}

/// One `epoch,loss` row per completed epoch, counting from 1.
pub fn write_loss_history(path: &Path, history: &[f64], force: bool) -> Result<()> {
    let rows: Vec<LossRow> = history
        .iter()
        .enumerate()
        .map(|(i, &loss)| LossRow { epoch: i + 1, loss })
        .collect();
    write_atomic(path, &csv_bytes(&rows)?, force)
}

pub fn write_sweep(path: &Path, rows: &[SweepRow], force: bool) -> Result<()> {
    write_atomic(path, &csv_bytes(rows)?, force)
}

/// `dir/name`, creating `dir` if needed.
pub fn output_path(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    Ok(dir.join(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn tiny() -> Dataset {
        let cfg = SystemConfig {
            n_subnetworks: 5,
            master_seed: 11,
            ..SystemConfig::default()
        };
        Dataset::generate(&cfg, SeedDomain::Train, 4).unwrap()
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny();
        save_dataset(&ds, dir.path(), false).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.snapshots, ds.snapshots);
        assert_eq!(back.config, ds.config);
        assert!(matches!(
            save_dataset(&ds, dir.path(), false),
            Err(Error::WouldOverwrite(_))
        ));
        save_dataset(&ds, dir.path(), true).unwrap();

        let again = tempfile::tempdir().unwrap();
        save_dataset(&back, again.path(), false).unwrap();
        for f in [MANIFEST, SNAPSHOTS] {
            assert_eq!(
                fs::read(dir.path().join(f)).unwrap(),
                fs::read(again.path().join(f)).unwrap()
            );
        }
    }

    #[test]
    fn model_round_trip_is_exact() {
        let ds = tiny();
        let raw: Vec<_> = ds.snapshots.iter().map(|s| build_graph(s, Variant::HH)).collect();
        let norm = Normalizer::fit(&raw, 20.0).unwrap();
        let m = PcgnnModel::<f32>::new(Architecture::default(), norm, 1e-3, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&m, None, &path, false).unwrap();
        let back: PcgnnModel<f32> = load_model(&path).unwrap();
        assert_eq!(back, m);
        let wide: PcgnnModel<f64> = load_model(&path).unwrap();
        assert_eq!(wide.cast::<f32>(), m);
        let again = dir.path().join("again.json");
        save_model(&back, None, &again, false).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    }

    #[test]
    fn rejects_future_versions() {
        let ds = tiny();
        let raw: Vec<_> = ds.snapshots.iter().map(|s| build_graph(s, Variant::HD)).collect();
        let norm = Normalizer::fit(&raw, 20.0).unwrap();
        let m = PcgnnModel::<f32>::new(Architecture::default(), norm, 1e-3, 5).unwrap();
        let mut f = ModelFile::from_model(&m, None).unwrap();
        f.version = 99;
        assert!(matches!(
            f.to_model::<f32>(),
            Err(Error::UnsupportedVersion { found: 99, .. })
        ));
    }
}
