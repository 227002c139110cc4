//! Inputs for the solvers: random candidate matrices, snapshot files, POD
//! reduction, cross-validation folds and reconstruction scoring.
//!
//! Random draws use ChaCha8 seeded with `seed_from_u64(seed)`; trial `t`
//! reads stream `t` of that key, so trials are independent and any one of
//! them can be regenerated alone. Normal variates come from the ziggurat
//! sampler in `rand_distr::StandardNormal`.
//!
//! Snapshot files hold one row per location and one column per snapshot.
//! Two encodings are supported:
//!
//! * CSV, optional header row, `NaN` or empty fields for invalid cells.
//! * Flat binary: the 8 bytes `SSKSNAP1`, then `n` and `m` as little-endian
//!   `u64`, then `n·m` little-endian `f64` values in column-major order.
//!
//! Rows holding any non-finite value are dropped on load; the surviving
//! rows keep their original index in the location map.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SskError};
use crate::linalg::thin_svd;
use crate::model::{CandidateMatrix, LatentEstimator, MeasurementMatrix, SensorSelection};

pub const BINARY_MAGIC: &[u8; 8] = b"SSKSNAP1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomProblemSpec {
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    pub trials: usize,
}

impl RandomProblemSpec {
    /// The standard-normal `n × r` matrix of one trial.
    pub fn trial(&self, trial: usize) -> Result<CandidateMatrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64);
        let m = DMatrix::from_fn(self.n, self.r, |_, _| StandardNormal.sample(&mut rng));
        CandidateMatrix::new(m)
    }
}

/// `trials` independent standard-normal candidate matrices.
pub fn random_candidates(spec: &RandomProblemSpec) -> Result<Vec<CandidateMatrix>> {
    (0..spec.trials).map(|t| spec.trial(t)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotDataset {
    /// `n × m`, one column per snapshot.
    pub data: DMatrix<f64>,
    /// Original row index of each kept row.
    pub location_map: Option<Vec<usize>>,
    /// One flag per original row, `false` where the row was dropped.
    pub valid_mask: Option<Vec<bool>>,
}

impl SnapshotDataset {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SskError::Ingestion("dataset contains non-finite entries".into()));
        }
        Ok(Self {
            data,
            location_map: None,
            valid_mask: None,
        })
    }

    /// Drops every row with a non-finite entry and records the survivors.
    pub fn from_masked(raw: DMatrix<f64>) -> Result<Self> {
        let mask: Vec<bool> = raw
            .row_iter()
            .map(|row| row.iter().all(|v| v.is_finite()))
            .collect();
        let kept: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        if kept.is_empty() {
            return Err(SskError::Ingestion("every row has invalid entries".into()));
        }
        let data = DMatrix::from_fn(kept.len(), raw.ncols(), |i, j| raw[(kept[i], j)]);
        Ok(Self {
            data,
            location_map: Some(kept),
            valid_mask: Some(mask),
        })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn m(&self) -> usize {
        self.data.ncols()
    }

    /// Snapshot subset, keeping the location metadata.
    pub fn select_snapshots(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.m()) {
            return Err(SskError::InvalidParameter(format!(
                "snapshot {bad} out of range for m = {}",
                self.m()
            )));
        }
        Ok(Self {
            data: self.data.select_columns(columns),
            location_map: self.location_map.clone(),
            valid_mask: self.valid_mask.clone(),
        })
    }

    /// `(column, row)` of each kept row on a row-major grid of the given width.
    pub fn grid_coordinates(&self, width: usize) -> Vec<(usize, usize)> {
        let original: Vec<usize> = match &self.location_map {
            Some(map) => map.clone(),
            None => (0..self.n()).collect(),
        };
        original.into_iter().map(|i| (i % width, i / width)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotFormat {
    Csv,
    Binary,
}

impl SnapshotFormat {
    /// `.csv` and `.txt` files are CSV; anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") || ext.eq_ignore_ascii_case("txt") => {
                SnapshotFormat::Csv
            }
            _ => SnapshotFormat::Binary,
        }
    }
}

pub fn load_snapshots(path: &Path, format: SnapshotFormat) -> Result<SnapshotDataset> {
    let raw = match format {
        SnapshotFormat::Csv => read_csv_matrix(File::open(path)?)?,
        SnapshotFormat::Binary => read_binary_matrix(BufReader::new(File::open(path)?))?,
    };
    SnapshotDataset::from_masked(raw)
}

/// Writes the kept rows only; masks are not stored.
pub fn write_snapshots(dataset: &SnapshotDataset, path: &Path, format: SnapshotFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        SnapshotFormat::Csv => write_csv_matrix(&dataset.data, &mut out)?,
        SnapshotFormat::Binary => write_binary_matrix(&dataset.data, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn parse_field(field: &str) -> Option<f64> {
    let t = field.trim();
    if t.is_empty() {
        return Some(f64::NAN);
    }
    t.parse::<f64>().ok()
}

/// Parses a location-by-snapshot CSV. A first record that is not entirely
/// numeric is taken as a header.
pub fn read_csv_matrix<R: Read>(input: R) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SskError::Ingestion(e.to_string()))?;
        let parsed: Option<Vec<f64>> = record.iter().map(parse_field).collect();
        match parsed {
            Some(values) => rows.push(values),
            None if line == 0 => continue,
            None => {
                return Err(SskError::Ingestion(format!(
                    "record {} has a non-numeric field",
                    line + 1
                )))
            }
        }
    }
    let m = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || m == 0 {
        return Err(SskError::Ingestion("no data rows".into()));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != m) {
        return Err(SskError::Ingestion(format!(
            "row {i} has {} fields, expected {m}",
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]))
}

pub fn write_csv_matrix<W: Write>(data: &DMatrix<f64>, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in data.row_iter() {
        // `{:?}` prints the shortest representation that parses back exactly.
        writer
            .write_record(row.iter().map(|v| format!("{v:?}")))
            .map_err(|e| SskError::Io(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_binary_matrix<R: Read>(mut input: R) -> Result<DMatrix<f64>> {
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|_| SskError::Ingestion("file too short for header".into()))?;
    if &magic != BINARY_MAGIC {
        return Err(SskError::Ingestion("bad magic bytes".into()));
    }
    let mut word = [0u8; 8];
    let mut dims = [0usize; 2];
    for d in dims.iter_mut() {
        input
            .read_exact(&mut word)
            .map_err(|_| SskError::Ingestion("file too short for header".into()))?;
        *d = usize::try_from(u64::from_le_bytes(word))
            .map_err(|_| SskError::Ingestion("dimension does not fit in memory".into()))?;
    }
    let [n, m] = dims;
    if n == 0 || m == 0 {
        return Err(SskError::Ingestion(format!("empty shape {n} x {m}")));
    }
    let len = n
        .checked_mul(m)
        .ok_or_else(|| SskError::Ingestion("shape overflows".into()))?;
    let mut values = Vec::with_capacity(len);
    for k in 0..len {
        input.read_exact(&mut word).map_err(|_| {
            SskError::Ingestion(format!("expected {len} values, file ends after {k}"))
        })?;
        values.push(f64::from_le_bytes(word));
    }
    if input.read(&mut word)? != 0 {
        return Err(SskError::Ingestion("trailing bytes after data".into()));
    }
    Ok(DMatrix::from_vec(n, m, values))
}

pub fn write_binary_matrix<W: Write>(data: &DMatrix<f64>, mut out: W) -> Result<()> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&(data.nrows() as u64).to_le_bytes())?;
    out.write_all(&(data.ncols() as u64).to_le_bytes())?;
    for v in data.iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PodOptions {
    /// Subtract the snapshot mean before the SVD.
    pub center: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    /// `n × r`, orthonormal columns.
    pub modes: DMatrix<f64>,
    /// Non-increasing, length `r`.
    pub singular_values: DVector<f64>,
    /// `r × m`, `S Vᵀ`.
    pub amplitudes: DMatrix<f64>,
    /// Row means removed before the SVD, when centering is on.
    pub mean: Option<DVector<f64>>,
}

impl PodBasis {
    pub fn r(&self) -> usize {
        self.modes.ncols()
    }

    /// The modes as a candidate matrix, one row per location.
    pub fn candidates(&self) -> Result<CandidateMatrix> {
        CandidateMatrix::new(self.modes.clone())
    }

    /// `U S Vᵀ`, plus the mean when centered.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut x = &self.modes * &self.amplitudes;
        if let Some(mean) = &self.mean {
            for mut col in x.column_iter_mut() {
                col += mean;
            }
        }
        x
    }
}

/// Rank-`r` truncated SVD without centering.
pub fn pod_reduce(dataset: &SnapshotDataset, r: usize) -> Result<PodBasis> {
    pod_reduce_with(dataset, r, PodOptions::default())
}

pub fn pod_reduce_with(dataset: &SnapshotDataset, r: usize, options: PodOptions) -> Result<PodBasis> {
    let (n, m) = dataset.data.shape();
    if r == 0 || r > n.min(m) {
        return Err(SskError::InvalidParameter(format!(
            "rank {r} must be in 1..={} for a {n} x {m} dataset",
            n.min(m)
        )));
    }
    let mut x = dataset.data.clone();
    let mean = options.center.then(|| {
        let mean = x.column_mean();
        for mut col in x.column_iter_mut() {
            col -= &mean;
        }
        mean
    });
    let svd = thin_svd(&x)?;
    let modes = svd.u.columns(0, r).into_owned();
    let singular_values = svd.s.rows(0, r).into_owned();
    let mut amplitudes = svd.v.columns(0, r).transpose();
    for (mut row, s) in amplitudes.row_iter_mut().zip(singular_values.iter()) {
        row *= *s;
    }
    Ok(PodBasis {
        modes,
        singular_values,
        amplitudes,
        mean,
    })
}

/// Contiguous folds over `m` snapshots in time order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvSplit {
    pub fold_count: usize,
    /// Fold id of each snapshot.
    pub fold_assignments: Vec<usize>,
}

impl CvSplit {
    pub fn m(&self) -> usize {
        self.fold_assignments.len()
    }

    /// Snapshot range of one fold.
    pub fn fold(&self, k: usize) -> Range<usize> {
        let start = self.fold_assignments.partition_point(|&f| f < k);
        let end = self.fold_assignments.partition_point(|&f| f <= k);
        start..end
    }

    pub fn test_indices(&self, k: usize) -> Vec<usize> {
        self.fold(k).collect()
    }

    pub fn train_indices(&self, k: usize) -> Vec<usize> {
        let test = self.fold(k);
        (0..self.m()).filter(|i| !test.contains(i)).collect()
    }
}

/// Splits `0..m` into `fold_count` contiguous segments; the first
/// `m mod fold_count` segments are one snapshot longer.
pub fn make_cv_splits(m: usize, fold_count: usize) -> Result<CvSplit> {
    if fold_count == 0 || fold_count > m {
        return Err(SskError::InvalidParameter(format!(
            "cannot split {m} snapshots into {fold_count} folds"
        )));
    }
    let base = m / fold_count;
    let extra = m % fold_count;
    let mut fold_assignments = Vec::with_capacity(m);
    for k in 0..fold_count {
        let len = base + usize::from(k < extra);
        fold_assignments.extend(std::iter::repeat(k).take(len));
    }
    Ok(CvSplit {
        fold_count,
        fold_assignments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionScore {
    /// Mean of `‖x̃ − x‖ / ‖x‖` over the scored snapshots.
    pub mean_relative_error: f64,
    pub scored: usize,
    /// Zero-norm snapshots left out of the mean.
    pub excluded_zero_norm: usize,
}

/// Estimates each test snapshot from the selected locations and scores the
/// full-field reconstruction `x̃ = U z̃`.
pub fn reconstruction_error(
    basis: &PodBasis,
    selection: &SensorSelection,
    test: &SnapshotDataset,
) -> Result<ReconstructionScore> {
    let n = basis.modes.nrows();
    if test.n() != n {
        return Err(SskError::InvalidParameter(format!(
            "test data has {} locations, basis has {n}",
            test.n()
        )));
    }
    if let Some(&bad) = selection.indices().iter().find(|&&i| i >= n) {
        return Err(SskError::InvalidSelection(format!("index {bad} >= {n}")));
    }
    let c = MeasurementMatrix::from_matrix(basis.modes.select_rows(selection.indices()));
    let estimator = LatentEstimator::new(&c)?;
    let mut total = 0.0;
    let mut scored = 0;
    let mut excluded_zero_norm = 0;
    for x in test.data.column_iter() {
        let norm = x.norm();
        if norm == 0.0 {
            excluded_zero_norm += 1;
            continue;
        }
        let mut y = DVector::from_iterator(selection.len(), selection.indices().iter().map(|&i| x[i]));
        if let Some(mean) = &basis.mean {
            for (k, &i) in selection.indices().iter().enumerate() {
                y[k] -= mean[i];
            }
        }
        let z = estimator.estimate(&y)?;
        let mut x_hat = &basis.modes * z.0;
        if let Some(mean) = &basis.mean {
            x_hat += mean;
        }
        total += (x_hat - x).norm() / norm;
        scored += 1;
    }
    if scored == 0 {
        return Err(SskError::InvalidParameter("every test snapshot has zero norm".into()));
    }
    Ok(ReconstructionScore {
        mean_relative_error: total / scored as f64,
        scored,
        excluded_zero_norm,
    })
}

/// Low-rank-plus-noise stand-in for a snapshot archive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub rank: usize,
    /// Signal-to-noise power ratio in decibels.
    pub snr_db: f64,
    pub seed: u64,
}

/// `X = Q diag(σ) W + E`: `Q` orthonormal `n × rank`, `W` standard normal,
/// `σₖ = 1/√k`, and Gaussian `E` scaled so that `‖QσW‖²/‖E‖² = 10^(snr/10)`.
pub fn synthetic_low_rank(spec: &SyntheticSpec) -> Result<SnapshotDataset> {
    let SyntheticSpec { n, m, rank, snr_db, seed } = *spec;
    if rank == 0 || rank > n.min(m) || !snr_db.is_finite() {
        return Err(SskError::InvalidParameter(format!(
            "synthetic rank {rank} for {n} x {m}, snr {snr_db} dB"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: DMatrix<f64> = DMatrix::from_fn(n, rank, |_, _| StandardNormal.sample(&mut rng));
    let q = g.qr().q();
    let mut w: DMatrix<f64> = DMatrix::from_fn(rank, m, |_, _| StandardNormal.sample(&mut rng));
    for (k, mut row) in w.row_iter_mut().enumerate() {
        row /= ((k + 1) as f64).sqrt();
    }
    let signal: DMatrix<f64> = q * w;
    let noise: DMatrix<f64> = DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng));
    let scale = signal.norm() / (noise.norm() * 10f64.powf(snr_db / 20.0));
    SnapshotDataset::new(signal + noise * scale)
}
