//! Fixed-shape network-state encodings, a small trainable predictor of the
//! stability index, dataset generation/serialization, and the pairwise
//! order-consistency metric.

mod nn;

use std::path::Path;

use base64::Engine;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Network, SwitchStatus};
use crate::powerflow::{bus_injections, jacobian, sigma_min, solve, PowerFlowSolution, SolverOptions};
use crate::scenario::Sample;
use crate::stability::IndexKind;

pub use nn::Architecture;

pub const MODEL_FORMAT: &str = "sdnr-model/1";
pub const DATASET_FORMAT: &str = "sdnr-dataset/1";

/// Number of feature columns per branch row:
/// `[i, j, g, b, p_ij, q_ij, p_j, q_j]`.
pub const ENCODING_COLUMNS: usize = 8;

/// Branch-major state matrix in canonical branch-id order; rows of open
/// branches are zeroed so the shape is fixed across topologies.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkStateEncoding {
    pub rows: Vec<[f64; ENCODING_COLUMNS]>,
}

impl NetworkStateEncoding {
    pub fn n_branches(&self) -> usize {
        self.rows.len()
    }

    pub fn flattened(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows.len() * ENCODING_COLUMNS);
        for row in &self.rows {
            out.extend_from_slice(row);
        }
        out
    }
}

/// Encode a converged power-flow state. Row for branch `ij` is
/// `[i, j, g_ij, b_ij, p_ij, q_ij, p_j, q_j]` with flows in the branch's
/// reference direction and `(p_j, q_j)` the computed injections at its
/// to-bus.
pub fn encode(net: &Network, alpha: &SwitchStatus, sol: &PowerFlowSolution) -> Result<NetworkStateEncoding> {
    if !sol.converged {
        return Err(Error::Argument("encode requires a converged solution".into()));
    }
    if alpha.len() != net.n_branches() || sol.flows.len() != net.n_branches() {
        return Err(Error::Dimension("switch/flow vector length".into()));
    }
    let (p_inj, q_inj) = bus_injections(net, &sol.flows);
    let rows = net
        .branches
        .iter()
        .map(|br| {
            if !alpha.is_closed(br.id) {
                return [0.0; ENCODING_COLUMNS];
            }
            let f = &sol.flows[br.id];
            [
                br.from as f64,
                br.to as f64,
                br.g,
                br.b,
                f.p_ij,
                f.q_ij,
                p_inj[br.to],
                q_inj[br.to],
            ]
        })
        .collect();
    Ok(NetworkStateEncoding { rows })
}

/// Encodings with exact stability-index labels and a frozen train/test split.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub n_branches: usize,
    pub n_buses: usize,
    /// Row-major flattened encodings, `n_branches * ENCODING_COLUMNS` each.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    /// Sorted row indices of the held-out split.
    pub test_indices: Vec<usize>,
    pub target_kind: IndexKind,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn train_indices(&self) -> Vec<usize> {
        let test: std::collections::BTreeSet<usize> = self.test_indices.iter().copied().collect();
        (0..self.len()).filter(|i| !test.contains(i)).collect()
    }

    /// Binary rows (features then label, little-endian f64) plus a JSON
    /// sidecar `<path>.json` describing the schema.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.save_with_meta(path, None)
    }

    /// Like [`LabeledDataset::save`] with an opaque provenance blob stored in
    /// the sidecar.
    pub fn save_with_meta<P: AsRef<Path>>(
        &self,
        path: P,
        meta: Option<serde_json::Value>,
    ) -> Result<()> {
        let path = path.as_ref();
        let mut bytes =
            Vec::with_capacity(self.len() * (self.n_branches * ENCODING_COLUMNS + 1) * 8);
        for (feat, label) in self.features.iter().zip(&self.labels) {
            for v in feat {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            bytes.extend_from_slice(&label.to_le_bytes());
        }
        std::fs::write(path, bytes)?;
        let sidecar = DatasetSidecar {
            format: DATASET_FORMAT.to_string(),
            n_branches: self.n_branches,
            n_buses: self.n_buses,
            columns: ENCODING_COLUMNS,
            rows: self.len(),
            test_indices: self.test_indices.clone(),
            target_kind: self.target_kind,
            meta,
        };
        let json = serde_json::to_string_pretty(&sidecar)?;
        std::fs::write(sidecar_path(path), json)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let sidecar: DatasetSidecar =
            serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        if sidecar.format != DATASET_FORMAT {
            return Err(Error::Format(format!(
                "dataset format '{}', expected '{}'",
                sidecar.format, DATASET_FORMAT
            )));
        }
        let bytes = std::fs::read(path)?;
        let row_len = sidecar.n_branches * sidecar.columns + 1;
        if bytes.len() != sidecar.rows * row_len * 8 {
            return Err(Error::Format(format!(
                "dataset binary is {} bytes, expected {}",
                bytes.len(),
                sidecar.rows * row_len * 8
            )));
        }
        let mut features = Vec::with_capacity(sidecar.rows);
        let mut labels = Vec::with_capacity(sidecar.rows);
        for r in 0..sidecar.rows {
            let base = r * row_len * 8;
            let feat: Vec<f64> = (0..row_len - 1)
                .map(|c| {
                    let off = base + c * 8;
                    f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap())
                })
                .collect();
            let off = base + (row_len - 1) * 8;
            labels.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
            features.push(feat);
        }
        Ok(Self {
            n_branches: sidecar.n_branches,
            n_buses: sidecar.n_buses,
            features,
            labels,
            test_indices: sidecar.test_indices,
            target_kind: sidecar.target_kind,
        })
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    std::path::PathBuf::from(s)
}

#[derive(Serialize, Deserialize)]
struct DatasetSidecar {
    format: String,
    n_branches: usize,
    n_buses: usize,
    columns: usize,
    rows: usize,
    test_indices: Vec<usize>,
    target_kind: IndexKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

#[derive(Debug, Clone)]
pub struct GenOpts {
    pub seed: u64,
    /// Random subset of the (config, sample) cross product; `None` keeps all.
    pub max_pairs: Option<usize>,
    pub test_fraction: f64,
    pub solver: SolverOptions,
}

impl Default for GenOpts {
    fn default() -> Self {
        Self {
            seed: 0,
            max_pairs: None,
            test_fraction: 0.3,
            solver: SolverOptions::default(),
        }
    }
}

/// Solve every drawn (config, sample) pair, label the converged ones with
/// the exact smallest singular value of the power-flow Jacobian, and freeze
/// a train/test split. Unconverged pairs are skipped.
pub fn generate_dataset(
    net: &Network,
    configs: &[SwitchStatus],
    samples: &[Sample],
    opts: &GenOpts,
) -> Result<LabeledDataset> {
    if !(opts.test_fraction >= 0.0 && opts.test_fraction < 1.0) {
        return Err(Error::Argument("test_fraction outside [0, 1)".into()));
    }
    let mut pairs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..samples.len()).map(move |s| (c, s)))
        .collect();
    if let Some(max) = opts.max_pairs {
        if max < pairs.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            pairs.shuffle(&mut rng);
            pairs.truncate(max);
            pairs.sort_unstable();
        }
    }
    let rows: Vec<Option<(Vec<f64>, f64)>> = pairs
        .par_iter()
        .map(|&(c, s)| {
            let sol = match solve(net, &configs[c], &samples[s], &opts.solver) {
                Ok(sol) if sol.converged => sol,
                _ => return None,
            };
            let enc = encode(net, &configs[c], &sol).ok()?;
            let jac = jacobian(net, &configs[c], &sol).ok()?;
            let label = sigma_min(&jac).ok()?;
            Some((enc.flattened(), label))
        })
        .collect();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for row in rows.into_iter().flatten() {
        features.push(row.0);
        labels.push(row.1);
    }
    if features.is_empty() {
        return Err(Error::EmptyDataset(
            "no (config, sample) pair produced a converged power flow".into(),
        ));
    }
    let n = labels.len();
    let n_test = ((n as f64) * opts.test_fraction).round() as usize;
    let n_test = n_test.min(n.saturating_sub(1));
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    order.shuffle(&mut rng);
    let mut test_indices: Vec<usize> = order[..n_test].to_vec();
    test_indices.sort_unstable();
    Ok(LabeledDataset {
        n_branches: net.n_branches(),
        n_buses: net.n_buses(),
        features,
        labels,
        test_indices,
        target_kind: IndexKind::sigma_min(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchChoice {
    /// Convolutional net for long branch lists, MLP for small ones.
    Auto,
    Mlp,
    Conv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Hyperparams {
    pub arch: ArchChoice,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    /// MLP hidden widths.
    pub hidden: (usize, usize),
    /// Convolution filter counts.
    pub channels: [usize; 4],
    pub kernel: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            arch: ArchChoice::Auto,
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 20,
            dropout: 0.2,
            hidden: (128, 64),
            channels: [8, 16, 32, 64],
            kernel: 3,
        }
    }
}

/// Branch count at or below which `Auto` picks the MLP.
const AUTO_MLP_MAX_BRANCHES: usize = 64;

/// Per-column input statistics and target statistics, frozen at training
/// time. Bus-index columns are pre-scaled to [0, 1] by the bus count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Normalization {
    pub n_buses: usize,
    pub col_mean: Vec<f64>,
    pub col_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl Normalization {
    fn normalize_row(&self, features: &[f64]) -> Vec<f64> {
        let n = self.n_buses as f64;
        features
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let col = i % ENCODING_COLUMNS;
                let v = if col < 2 { v / n } else { v };
                (v - self.col_mean[col]) / self.col_std[col]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    /// MSE on the normalized target scale.
    pub final_train_mse: f64,
    pub final_test_mse: f64,
}

/// Trained predictor: architecture, flat weight vector, frozen normalization
/// statistics, target kind and training metadata. Prediction is a pure
/// function of the encoding.
#[derive(Debug, Clone)]
pub struct PredictorModel {
    pub arch: Architecture,
    pub params: Vec<f64>,
    pub norm: Normalization,
    pub target_kind: IndexKind,
    pub meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    arch: Architecture,
    normalization: Normalization,
    target_kind: IndexKind,
    training: TrainingMeta,
    weights_b64: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

impl PredictorModel {
    pub fn n_branches(&self) -> usize {
        self.arch.input_len() / ENCODING_COLUMNS
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_json(None)?)?;
        Ok(())
    }

    pub fn save_with_meta<P: AsRef<Path>>(
        &self,
        path: P,
        meta: Option<serde_json::Value>,
    ) -> Result<()> {
        std::fs::write(path, self.to_json(meta)?)?;
        Ok(())
    }

    pub fn to_json(&self, meta: Option<serde_json::Value>) -> Result<String> {
        let mut bytes = Vec::with_capacity(self.params.len() * 8);
        for p in &self.params {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            arch: self.arch.clone(),
            normalization: self.norm.clone(),
            target_kind: self.target_kind,
            training: self.meta.clone(),
            weights_b64: base64::engine::general_purpose::STANDARD.encode(bytes),
            meta,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Format(format!(
                "model format '{}', expected '{}'",
                file.format, MODEL_FORMAT
            )));
        }
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&file.weights_b64)
            .map_err(|e| Error::Format(format!("weight blob: {e}")))?;
        if bytes.len() != file.arch.param_count() * 8 {
            return Err(Error::Format(format!(
                "weight blob holds {} bytes, architecture needs {}",
                bytes.len(),
                file.arch.param_count() * 8
            )));
        }
        let params = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            arch: file.arch,
            params,
            norm: file.normalization,
            target_kind: file.target_kind,
            meta: file.training,
        })
    }
}

/// Deterministic forward pass (dropout disabled), denormalized to the target
/// scale.
pub fn predict(model: &PredictorModel, enc: &NetworkStateEncoding) -> Result<f64> {
    if enc.n_branches() != model.n_branches() {
        return Err(Error::Dimension(format!(
            "encoding has {} branch rows, model expects {}",
            enc.n_branches(),
            model.n_branches()
        )));
    }
    let x = model.norm.normalize_row(&enc.flattened());
    let y = nn::forward_eval(&model.arch, &model.params, &x);
    Ok(model.norm.target_mean + model.norm.target_std * y)
}

fn fit_normalization(data: &LabeledDataset, train: &[usize]) -> Normalization {
    let n_buses = data.n_buses.max(1);
    let mut mean = vec![0.0; ENCODING_COLUMNS];
    let mut count = 0usize;
    for &r in train {
        for (i, &v) in data.features[r].iter().enumerate() {
            let col = i % ENCODING_COLUMNS;
            let v = if col < 2 { v / n_buses as f64 } else { v };
            mean[col] += v;
        }
        count += data.features[r].len() / ENCODING_COLUMNS;
    }
    for m in mean.iter_mut() {
        *m /= count.max(1) as f64;
    }
    let mut var = vec![0.0; ENCODING_COLUMNS];
    for &r in train {
        for (i, &v) in data.features[r].iter().enumerate() {
            let col = i % ENCODING_COLUMNS;
            let v = if col < 2 { v / n_buses as f64 } else { v };
            var[col] += (v - mean[col]) * (v - mean[col]);
        }
    }
    let std: Vec<f64> = var
        .iter()
        .map(|&v| {
            let s = (v / count.max(1) as f64).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let t_mean = train.iter().map(|&r| data.labels[r]).sum::<f64>() / train.len().max(1) as f64;
    let t_var = train
        .iter()
        .map(|&r| (data.labels[r] - t_mean) * (data.labels[r] - t_mean))
        .sum::<f64>()
        / train.len().max(1) as f64;
    let t_std = if t_var.sqrt() > 1e-9 { t_var.sqrt() } else { 1.0 };
    Normalization {
        n_buses: data.n_buses,
        col_mean: mean,
        col_std: std,
        target_mean: t_mean,
        target_std: t_std,
    }
}

/// Train a predictor by mini-batch gradient descent (Adam updates) on the
/// normalized mean-squared error. Deterministic given `seed`.
pub fn train(data: &LabeledDataset, hp: &Hyperparams, seed: u64) -> Result<PredictorModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("cannot train on an empty dataset".into()));
    }
    if hp.batch_size == 0 || hp.epochs == 0 {
        return Err(Error::Argument("epochs and batch_size must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&hp.dropout) {
        return Err(Error::Argument("dropout must be in [0, 1)".into()));
    }
    let train_idx = data.train_indices();
    if train_idx.is_empty() {
        return Err(Error::EmptyDataset("train split is empty".into()));
    }
    let arch = match hp.arch {
        ArchChoice::Mlp => Architecture::Mlp {
            input: data.n_branches * ENCODING_COLUMNS,
            hidden1: hp.hidden.0,
            hidden2: hp.hidden.1,
        },
        ArchChoice::Conv => Architecture::Conv1d {
            t_len: data.n_branches,
            in_channels: ENCODING_COLUMNS,
            channels: hp.channels,
            kernel: hp.kernel,
        },
        ArchChoice::Auto => {
            if data.n_branches <= AUTO_MLP_MAX_BRANCHES {
                Architecture::Mlp {
                    input: data.n_branches * ENCODING_COLUMNS,
                    hidden1: hp.hidden.0,
                    hidden2: hp.hidden.1,
                }
            } else {
                Architecture::Conv1d {
                    t_len: data.n_branches,
                    in_channels: ENCODING_COLUMNS,
                    channels: hp.channels,
                    kernel: hp.kernel,
                }
            }
        }
    };

    let norm = fit_normalization(data, &train_idx);
    let inputs: Vec<Vec<f64>> = data
        .features
        .iter()
        .map(|f| norm.normalize_row(f))
        .collect();
    let targets: Vec<f64> = data
        .labels
        .iter()
        .map(|&y| (y - norm.target_mean) / norm.target_std)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = arch.init_params(&mut rng);
    let mut adam = nn::Adam::new(params.len());
    let mut grads = vec![0.0; params.len()];
    let drop_w = nn::dropout_width(&arch);
    let mut order = train_idx.clone();

    for _epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sse = 0.0;
        for batch in order.chunks(hp.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            for &r in batch {
                let mask = if hp.dropout > 0.0 {
                    Some(nn::sample_dropout_mask(drop_w, hp.dropout, &mut rng))
                } else {
                    None
                };
                let y = nn::forward_backward(
                    &arch,
                    &params,
                    &inputs[r],
                    mask.as_deref(),
                    targets[r],
                    &mut grads,
                );
                epoch_sse += (y - targets[r]) * (y - targets[r]);
            }
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut params, &grads, hp.learning_rate);
        }
        let epoch_mse = epoch_sse / order.len() as f64;
        if !epoch_mse.is_finite() {
            return Err(Error::Training(format!("loss diverged to {epoch_mse}")));
        }
    }

    let eval_mse = |idx: &[usize]| -> f64 {
        if idx.is_empty() {
            return f64::NAN;
        }
        idx.iter()
            .map(|&r| {
                let y = nn::forward_eval(&arch, &params, &inputs[r]);
                (y - targets[r]) * (y - targets[r])
            })
            .sum::<f64>()
            / idx.len() as f64
    };
    let final_train_mse = eval_mse(&train_idx);
    let final_test_mse = eval_mse(&data.test_indices);

    Ok(PredictorModel {
        arch,
        params,
        norm,
        target_kind: data.target_kind,
        meta: TrainingMeta {
            seed,
            epochs: hp.epochs,
            batch_size: hp.batch_size,
            learning_rate: hp.learning_rate,
            dropout: hp.dropout,
            final_train_mse,
            final_test_mse,
        },
    })
}

/// Percentage of sample pairs whose orderings agree between the two lists;
/// a pair tied in both lists counts as agreement, tied in only one does not.
/// Implemented by merge-sort inversion counting in O(H log H).
pub fn consistency(real: &[f64], predicted: &[f64]) -> Result<f64> {
    if real.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} real vs {} predicted values",
            real.len(),
            predicted.len()
        )));
    }
    let h = real.len();
    if h < 2 {
        return Err(Error::Argument("consistency needs at least two samples".into()));
    }
    if real.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(Error::Argument("consistency requires finite values".into()));
    }
    let total = (h as u64) * (h as u64 - 1) / 2;

    let count_ties = |values: &mut Vec<f64>| -> u64 {
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ties = 0u64;
        let mut run = 1u64;
        for i in 1..values.len() {
            if values[i] == values[i - 1] {
                run += 1;
            } else {
                ties += run * (run - 1) / 2;
                run = 1;
            }
        }
        ties + run * (run - 1) / 2
    };
    let ties_r = count_ties(&mut real.to_vec());
    let ties_p = count_ties(&mut predicted.to_vec());

    // pairs tied in both lists: groups of identical (r, p) tuples
    let mut tuples: Vec<(f64, f64)> = real.iter().copied().zip(predicted.iter().copied()).collect();
    tuples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut ties_both = 0u64;
    let mut run = 1u64;
    for i in 1..tuples.len() {
        if tuples[i] == tuples[i - 1] {
            run += 1;
        } else {
            ties_both += run * (run - 1) / 2;
            run = 1;
        }
    }
    ties_both += run * (run - 1) / 2;

    // discordant pairs: strict inversions of `predicted` after sorting by
    // (real asc, predicted asc)
    let seq: Vec<f64> = tuples.iter().map(|t| t.1).collect();
    let discordant = count_inversions(&seq);

    let no_tie = total - ties_r - ties_p + ties_both;
    let concordant = no_tie - discordant;
    let agree = concordant + ties_both;
    Ok(100.0 * agree as f64 / total as f64)
}

fn count_inversions(values: &[f64]) -> u64 {
    fn merge_count(v: &mut Vec<f64>, buf: &mut Vec<f64>, lo: usize, hi: usize) -> u64 {
        if hi - lo < 2 {
            return 0;
        }
        let mid = (lo + hi) / 2;
        let mut inv = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
        buf.clear();
        let (mut i, mut j) = (lo, mid);
        while i < mid && j < hi {
            if v[i] <= v[j] {
                buf.push(v[i]);
                i += 1;
            } else {
                inv += (mid - i) as u64;
                buf.push(v[j]);
                j += 1;
            }
        }
        buf.extend_from_slice(&v[i..mid]);
        buf.extend_from_slice(&v[j..hi]);
        v[lo..hi].copy_from_slice(buf);
        inv
    }
    let mut v = values.to_vec();
    let mut buf = Vec::with_capacity(v.len());
    merge_count(&mut v, &mut buf, 0, values.len())
}
