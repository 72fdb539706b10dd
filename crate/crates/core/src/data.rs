//! Dataset preparation: min-max scaling, shuffled train/test split,
//! fat/thin client partitioning, and a synthetic class-cluster generator.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::rng;

/// Noise level of [`synth_dataset`]'s class clusters.
pub const SYNTH_SIGMA: f64 = 0.25;

/// Per-column `(min, max)` learned from a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(table: &Matrix) -> Result<Self> {
        if table.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut mins = vec![f64::INFINITY; table.cols()];
        let mut maxs = vec![f64::NEG_INFINITY; table.cols()];
        for i in 0..table.rows() {
            for (j, &v) in table.row(i).iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        Ok(Self { mins, maxs })
    }

    /// `(v − min)/(max − min)` per column; constant columns map to 0.
    pub fn transform(&self, table: &Matrix) -> Result<Matrix> {
        if table.cols() != self.mins.len() {
            return Err(Error::Shape(format!(
                "table has {} columns, scaler {}",
                table.cols(),
                self.mins.len()
            )));
        }
        let mut out = table.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                let span = self.maxs[j] - self.mins[j];
                *v = if span > 0.0 { (*v - self.mins[j]) / span } else { 0.0 };
            }
        }
        Ok(out)
    }
}

pub fn minmax_normalize(table: &Matrix) -> Result<(Matrix, MinMaxScaler)> {
    let scaler = MinMaxScaler::fit(table)?;
    Ok((scaler.transform(table)?, scaler))
}

/// Row indices of a seeded shuffle split: `(train, test)`, with
/// `round(test_fraction · n)` test rows.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::domain(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng_from(seed, &[rng::TAG_SHUFFLE]));
    let n_test = (test_fraction * n as f64).round() as usize;
    let train = order.split_off(n_test);
    Ok((train, order))
}

pub fn shuffle_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(data.len(), test_fraction, seed)?;
    Ok((data.subset(&train), data.subset(&test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub n_clients: usize,
    /// Share of clients that are fat.
    pub fat_fraction: f64,
    /// Share of the training set held by each fat client.
    pub fat_share: f64,
    /// Share of the training set held by each thin client.
    pub thin_share: f64,
    pub seed: u64,
}

impl PartitionSpec {
    pub fn new(n_clients: usize, seed: u64) -> Self {
        Self { n_clients, fat_fraction: 0.20, fat_share: 0.10, thin_share: 0.01, seed }
    }

    pub fn n_fat(&self) -> usize {
        (self.fat_fraction * self.n_clients as f64).round() as usize
    }

    pub fn fat_size(&self, train_len: usize) -> usize {
        (self.fat_share * train_len as f64).round() as usize
    }

    pub fn thin_size(&self, train_len: usize) -> usize {
        (self.thin_share * train_len as f64).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientData {
    pub data: Dataset,
    pub fat: bool,
    /// Rows of the training set this client holds.
    pub rows: Vec<usize>,
}

/// Give each client an independent random subset of `train` (rows distinct
/// within a client, overlap allowed across clients), then shuffle the client
/// order so position carries no information about size.
pub fn partition_clients(train: &Dataset, spec: &PartitionSpec) -> Result<Vec<ClientData>> {
    if spec.n_clients == 0 {
        return Err(Error::Infeasible("no clients requested".into()));
    }
    if !(spec.fat_fraction > 0.0 && spec.fat_fraction < 1.0) {
        return Err(Error::Infeasible(format!("fat fraction {} outside (0, 1)", spec.fat_fraction)));
    }
    for share in [spec.fat_share, spec.thin_share] {
        if !(share > 0.0 && share < 1.0) {
            return Err(Error::Infeasible(format!("client share {share} outside (0, 1)")));
        }
    }
    let n = train.len();
    let (fat_size, thin_size) = (spec.fat_size(n), spec.thin_size(n));
    if fat_size < 1 || thin_size < 1 {
        return Err(Error::Infeasible(format!(
            "{n} training rows give fat clients {fat_size} and thin clients {thin_size} rows"
        )));
    }
    let n_fat = spec.n_fat();
    let mut rng = rng::rng_from(spec.seed, &[rng::TAG_PARTITION]);
    let mut clients: Vec<ClientData> = (0..spec.n_clients)
        .map(|c| {
            let fat = c < n_fat;
            let size = if fat { fat_size } else { thin_size };
            let rows = index::sample(&mut rng, n, size).into_vec();
            ClientData { data: train.subset(&rows), fat, rows }
        })
        .collect();
    clients.shuffle(&mut rng);
    Ok(clients)
}

/// Gaussian class clusters in `[0,1]^d`: each class gets a uniform random
/// centroid, samples add `N(0, σ²)` noise per coordinate and are clipped.
/// Labels cycle through the classes (balanced within one) before the rows
/// are shuffled.
pub fn synth_dataset(n_samples: usize, n_features: usize, n_classes: usize, seed: u64) -> Result<Dataset> {
    synth_dataset_with_sigma(n_samples, n_features, n_classes, SYNTH_SIGMA, seed)
}

pub fn synth_dataset_with_sigma(
    n_samples: usize,
    n_features: usize,
    n_classes: usize,
    sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_classes < 2 {
        return Err(Error::domain("need at least two classes"));
    }
    if n_samples == 0 || n_features == 0 {
        return Err(Error::domain("need at least one sample and one feature"));
    }
    let mut rng = rng::rng_from(seed, &[rng::TAG_SYNTH]);
    let centroids: Vec<f64> = (0..n_classes * n_features).map(|_| rng.gen()).collect();
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::domain(e.to_string()))?;
    let mut labels: Vec<usize> = (0..n_samples).map(|i| i % n_classes).collect();
    labels.shuffle(&mut rng);
    let mut data = Vec::with_capacity(n_samples * n_features);
    for &y in &labels {
        let c = &centroids[y * n_features..(y + 1) * n_features];
        data.extend(c.iter().map(|&m| (m + noise.sample(&mut rng)).clamp(0.0, 1.0)));
    }
    Dataset::new(Matrix::new(n_samples, n_features, data)?, labels)
}

/// Normalized, split and partitioned data, ready for a selection run.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub test: Dataset,
    pub clients: Vec<ClientData>,
    pub scaler: MinMaxScaler,
    pub feature_names: Vec<String>,
}

/// Normalize the whole table, split off the test set, then partition the
/// training rows among `n_clients` candidates.
pub fn prepare(
    table: &Dataset,
    feature_names: Vec<String>,
    test_fraction: f64,
    n_clients: usize,
    seed: u64,
) -> Result<PreparedData> {
    let (features, scaler) = minmax_normalize(&table.features)?;
    let normalized = Dataset::new(features, table.labels.clone())?;
    let (train, test) = shuffle_split(&normalized, test_fraction, seed)?;
    let clients = partition_clients(&train, &PartitionSpec::new(n_clients, seed))?;
    Ok(PreparedData { test, clients, scaler, feature_names })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestClient {
    pub file: String,
    pub fat: bool,
    pub size: usize,
}

/// `manifest.json` of a prepared directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub test_fraction: f64,
    pub test_size: usize,
    pub feature_names: Vec<String>,
    pub scaler: MinMaxScaler,
    pub clients: Vec<ManifestClient>,
}

pub fn client_file_name(position: usize) -> String {
    format!("client_{:04}.csv", position + 1)
}

/// Write `test.csv`, `client_0001.csv …` and `manifest.json` into `dir`.
pub fn write_prepared(dir: &Path, data: &PreparedData, seed: u64, test_fraction: f64) -> Result<Manifest> {
    std::fs::create_dir_all(dir)?;
    data.test.save(dir.join("test.csv"), &data.feature_names)?;
    let mut clients = Vec::with_capacity(data.clients.len());
    for (i, c) in data.clients.iter().enumerate() {
        let file = client_file_name(i);
        c.data.save(dir.join(&file), &data.feature_names)?;
        clients.push(ManifestClient { file, fat: c.fat, size: c.data.len() });
    }
    let manifest = Manifest {
        seed,
        test_fraction,
        test_size: data.test.len(),
        feature_names: data.feature_names.clone(),
        scaler: data.scaler.clone(),
        clients,
    };
    let f = std::io::BufWriter::new(std::fs::File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(f, &manifest)?;
    Ok(manifest)
}

/// Inverse of [`write_prepared`]. Client row provenance is not stored, so
/// `rows` comes back empty.
pub fn load_prepared(dir: &Path) -> Result<PreparedData> {
    let manifest: Manifest = serde_json::from_reader(std::fs::File::open(dir.join("manifest.json"))?)?;
    let (test, _) = Dataset::load(dir.join("test.csv"))?;
    let clients = manifest
        .clients
        .iter()
        .map(|m| {
            let (data, _) = Dataset::load(dir.join(&m.file))?;
            if data.n_features() != test.n_features() {
                return Err(Error::Shape(format!("{} has {} features, test set {}", m.file, data.n_features(), test.n_features())));
            }
            Ok(ClientData { data, fat: m.fat, rows: Vec::new() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedData { test, clients, scaler: manifest.scaler, feature_names: manifest.feature_names })
}
