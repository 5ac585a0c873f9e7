//! PCA, eigen-image export, linear one-vs-rest SVM, and the
//! six-condition train/test experiment protocol.

use crate::features::{FeatureVector, FEATURE_DIM, FEATURE_HEIGHT, FEATURE_WIDTH};
use crate::raster::GrayImage;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RecognitionError {
    #[error("need at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("data has numerical rank 0; no principal components exist")]
    RankDeficient,
    #[error("model has {0} components, need {1}")]
    InsufficientComponents(usize, usize),
    #[error("training data contains a single class")]
    SingleClass,
    #[error("class {0:?} has no samples")]
    EmptyClass(String),
    #[error("real and synthetic subject sets differ")]
    LabelMismatch,
}

/// Principal components of a sample set, ordered by descending eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// k rows, each a unit vector in input space.
    pub components: Vec<Vec<f64>>,
    /// Sample-covariance eigenvalues matching `components`.
    pub eigenvalues: Vec<f64>,
    /// Set when the requested k exceeded the numerical rank and the
    /// model was truncated to the achievable count.
    pub truncated: bool,
}

/// Fit PCA on row vectors. Uses the n×n Gram matrix when n < dim.
/// Sign convention: each component's largest-magnitude entry is positive.
pub fn pca_fit(data: &[Vec<f64>], k: usize) -> Result<PcaModel, RecognitionError> {
    let n = data.len();
    if n < 2 {
        return Err(RecognitionError::InsufficientSamples(n));
    }
    let dim = data[0].len();
    assert!(data.iter().all(|v| v.len() == dim), "ragged input rows");
    assert!(k >= 1);

    let mut mean = vec![0.0; dim];
    for row in data {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    // centered data, rows = samples
    let xc = DMatrix::from_fn(n, dim, |i, j| data[i][j] - mean[j]);

    let (mut eigenvalues, mut components): (Vec<f64>, Vec<DVector<f64>>) = if n < dim {
        let gram = &xc * xc.transpose();
        let eig = gram.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let mut vals = Vec::new();
        let mut comps = Vec::new();
        for &i in &order {
            let mu = eig.eigenvalues[i];
            if mu <= 0.0 {
                continue;
            }
            // covariance eigenvector from the Gram eigenvector
            let u = eig.eigenvectors.column(i);
            let v = (xc.transpose() * u) / mu.sqrt();
            vals.push(mu / (n - 1) as f64);
            comps.push(v);
        }
        (vals, comps)
    } else {
        let cov = (xc.transpose() * &xc) / (n - 1) as f64;
        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let mut vals = Vec::new();
        let mut comps = Vec::new();
        for &i in &order {
            let lam = eig.eigenvalues[i];
            if lam <= 0.0 {
                continue;
            }
            vals.push(lam);
            comps.push(eig.eigenvectors.column(i).into_owned());
        }
        (vals, comps)
    };

    // numerical rank cutoff relative to the leading eigenvalue
    let rank = match eigenvalues.first() {
        Some(&top) if top > 0.0 => {
            eigenvalues.iter().take_while(|&&v| v > top * 1e-10).count()
        }
        _ => 0,
    };
    if rank == 0 {
        return Err(RecognitionError::RankDeficient);
    }
    let truncated = k > rank;
    let keep = k.min(rank);
    eigenvalues.truncate(keep);
    components.truncate(keep);

    let components = components
        .into_iter()
        .map(|mut v| {
            v /= v.norm();
            let lead = v
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            if v[lead] < 0.0 {
                v = -v;
            }
            v.iter().cloned().collect()
        })
        .collect();

    Ok(PcaModel { mean, components, eigenvalues, truncated })
}

/// Coefficients of the centered vector on the model's components.
pub fn pca_project(model: &PcaModel, vector: &[f64]) -> Vec<f64> {
    assert_eq!(vector.len(), model.mean.len());
    let centered: Vec<f64> =
        vector.iter().zip(&model.mean).map(|(x, m)| x - m).collect();
    model
        .components
        .iter()
        .map(|c| c.iter().zip(&centered).map(|(a, b)| a * b).sum())
        .collect()
}

/// First nine components reshaped to 50×30, each affinely rescaled to
/// [0,1] (zero-range components display as flat 0.5), tiled 3×3.
pub fn eigen_images(model: &PcaModel) -> Result<GrayImage, RecognitionError> {
    const COUNT: usize = 9;
    if model.components.len() < COUNT {
        return Err(RecognitionError::InsufficientComponents(model.components.len(), COUNT));
    }
    assert_eq!(model.mean.len(), FEATURE_DIM, "eigen images are defined on 50x30 features");
    let grid_w = 3 * FEATURE_WIDTH;
    let grid_h = 3 * FEATURE_HEIGHT;
    let mut values = vec![0.0; grid_w * grid_h];
    for (idx, comp) in model.components.iter().take(COUNT).enumerate() {
        let lo = comp.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = comp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let rescale = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
        let (tile_row, tile_col) = (idx / 3, idx % 3);
        for row in 0..FEATURE_HEIGHT {
            for col in 0..FEATURE_WIDTH {
                let gr = tile_row * FEATURE_HEIGHT + row;
                let gc = tile_col * FEATURE_WIDTH + col;
                values[gr * grid_w + gc] = rescale(comp[row * FEATURE_WIDTH + col]);
            }
        }
    }
    Ok(GrayImage::new(grid_w, grid_h, values).expect("grid dimensions are consistent"))
}

/// One-vs-rest linear SVM with a stored per-dimension standardizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub classes: Vec<String>,
    /// One weight row per class; last entry is the bias term acting on
    /// an appended constant-1 feature.
    pub weights: Vec<Vec<f64>>,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub reg_weight: f64,
    pub epochs: usize,
}

/// L2-regularized hinge loss, deterministic full-batch subgradient
/// descent with step 1/(reg_weight·t).
pub fn svm_train(
    samples: &[(Vec<f64>, String)],
    reg_weight: f64,
    epochs: usize,
) -> Result<SvmModel, RecognitionError> {
    assert!(reg_weight > 0.0 && epochs >= 1);
    assert!(!samples.is_empty());
    let dim = samples[0].0.len();
    assert!(samples.iter().all(|(v, _)| v.len() == dim), "ragged input rows");

    let mut by_class: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, label) in samples {
        *by_class.entry(label).or_insert(0) += 1;
    }
    if by_class.len() < 2 {
        return Err(RecognitionError::SingleClass);
    }
    if let Some((label, _)) = by_class.iter().find(|(_, &n)| n == 0) {
        return Err(RecognitionError::EmptyClass(label.to_string()));
    }
    let classes: Vec<String> = by_class.keys().map(|s| s.to_string()).collect();

    let n = samples.len() as f64;
    let mut feature_mean = vec![0.0; dim];
    for (v, _) in samples {
        for (m, x) in feature_mean.iter_mut().zip(v) {
            *m += x / n;
        }
    }
    let mut feature_scale = vec![0.0; dim];
    for (v, _) in samples {
        for (s, (x, m)) in feature_scale.iter_mut().zip(v.iter().zip(&feature_mean)) {
            *s += (x - m) * (x - m) / n;
        }
    }
    for s in &mut feature_scale {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }

    // standardized samples with the appended bias feature
    let xs: Vec<Vec<f64>> = samples
        .iter()
        .map(|(v, _)| {
            let mut row: Vec<f64> = v
                .iter()
                .zip(feature_mean.iter().zip(&feature_scale))
                .map(|(x, (m, s))| (x - m) / s)
                .collect();
            row.push(1.0);
            row
        })
        .collect();

    let weights = classes
        .iter()
        .map(|class| {
            let ys: Vec<f64> = samples
                .iter()
                .map(|(_, l)| if l == class { 1.0 } else { -1.0 })
                .collect();
            let mut w = vec![0.0; dim + 1];
            for t in 1..=epochs {
                let step = 1.0 / (reg_weight * t as f64);
                let mut grad: Vec<f64> = w.iter().map(|wi| reg_weight * wi).collect();
                for (x, &y) in xs.iter().zip(&ys) {
                    let margin: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() * y;
                    if margin < 1.0 {
                        for (g, xi) in grad.iter_mut().zip(x) {
                            *g -= y * xi / n;
                        }
                    }
                }
                for (wi, g) in w.iter_mut().zip(&grad) {
                    *wi -= step * g;
                }
            }
            w
        })
        .collect();

    Ok(SvmModel { classes, weights, feature_mean, feature_scale, reg_weight, epochs })
}

/// Per-class decision scores in `model.classes` order.
pub fn svm_scores(model: &SvmModel, vector: &[f64]) -> Vec<f64> {
    assert_eq!(vector.len(), model.feature_mean.len());
    let mut x: Vec<f64> = vector
        .iter()
        .zip(model.feature_mean.iter().zip(&model.feature_scale))
        .map(|(v, (m, s))| (v - m) / s)
        .collect();
    x.push(1.0);
    model
        .weights
        .iter()
        .map(|w| w.iter().zip(&x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Argmax over class scores; ties go to the lexicographically smallest
/// label (classes are stored sorted, so the first maximum wins).
pub fn svm_predict(model: &SvmModel, vector: &[f64]) -> String {
    let scores = svm_scores(model, vector);
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    model.classes[best].clone()
}

/// Train/test composition, matching the six conditions of the
/// real-vs-synthetic comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    RealReal,
    SynthSynth,
    RealSynth,
    SynthReal,
    MostlyRealPlusSynth,
    MostlySynthPlusReal,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::RealReal,
        Condition::SynthSynth,
        Condition::RealSynth,
        Condition::SynthReal,
        Condition::MostlyRealPlusSynth,
        Condition::MostlySynthPlusReal,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::RealReal => "R-R",
            Condition::SynthSynth => "S-S",
            Condition::RealSynth => "R-S",
            Condition::SynthReal => "S-R",
            Condition::MostlyRealPlusSynth => "70%R+S-30%R",
            Condition::MostlySynthPlusReal => "30%R+S-70%R",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub conditions: Vec<Condition>,
    /// PCA component counts to sweep, positive ascending.
    pub component_counts: Vec<usize>,
    pub split_seed: u64,
    pub reg_weight: f64,
    pub epochs: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            conditions: Condition::ALL.to_vec(),
            component_counts: vec![5, 10, 20, 50],
            split_seed: 0,
            reg_weight: 0.01,
            epochs: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResult {
    pub condition: Condition,
    pub k: usize,
    pub train_n: usize,
    pub test_n: usize,
    pub accuracy: f64,
    /// Row = true class, column = predicted, in `labels` order.
    pub confusion: Vec<Vec<usize>>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ConditionResult>,
}

/// Deterministic stratified shuffle: per label (sorted), a seeded
/// permutation split into a `fraction` part and its complement.
fn stratified_split(
    vectors: &[FeatureVector],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), RecognitionError> {
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, v) in vectors.iter().enumerate() {
        by_label.entry(&v.label).or_default().push(i);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for (_, mut idx) in by_label {
        if idx.len() < 2 {
            return Err(RecognitionError::InsufficientSamples(idx.len()));
        }
        idx.shuffle(&mut rng);
        let take = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        first.extend_from_slice(&idx[..take]);
        second.extend_from_slice(&idx[take..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

fn label_set(vectors: &[FeatureVector]) -> Vec<&str> {
    let mut labels: Vec<&str> = vectors.iter().map(|v| v.label.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    labels
}

/// Run the requested conditions over the component-count sweep. PCA and
/// the SVM are fitted on the training portion only.
pub fn run_experiment(
    real: &[FeatureVector],
    synth: &[FeatureVector],
    spec: &ExperimentSpec,
) -> Result<ExperimentResult, RecognitionError> {
    if label_set(real) != label_set(synth) {
        return Err(RecognitionError::LabelMismatch);
    }
    let pick = |set: &[FeatureVector], idx: &[usize]| -> Vec<FeatureVector> {
        idx.iter().map(|&i| set[i].clone()).collect()
    };
    let all: Vec<usize> = (0..real.len().max(synth.len())).collect();

    let mut jobs: Vec<(Condition, Vec<FeatureVector>, Vec<FeatureVector>)> = Vec::new();
    for &condition in &spec.conditions {
        let (train, test) = match condition {
            Condition::RealReal => {
                let (tr, te) = stratified_split(real, 0.7, spec.split_seed)?;
                (pick(real, &tr), pick(real, &te))
            }
            Condition::SynthSynth => {
                let (tr, te) = stratified_split(synth, 0.7, spec.split_seed)?;
                (pick(synth, &tr), pick(synth, &te))
            }
            Condition::RealSynth => {
                (pick(real, &all[..real.len()]), pick(synth, &all[..synth.len()]))
            }
            Condition::SynthReal => {
                (pick(synth, &all[..synth.len()]), pick(real, &all[..real.len()]))
            }
            Condition::MostlyRealPlusSynth => {
                let (tr, te) = stratified_split(real, 0.7, spec.split_seed)?;
                let mut train = pick(real, &tr);
                train.extend(synth.iter().cloned());
                (train, pick(real, &te))
            }
            Condition::MostlySynthPlusReal => {
                let (tr, te) = stratified_split(real, 0.3, spec.split_seed)?;
                let mut train = pick(real, &tr);
                train.extend(synth.iter().cloned());
                (train, pick(real, &te))
            }
        };
        jobs.push((condition, train, test));
    }

    let units: Vec<(usize, usize)> = (0..jobs.len())
        .flat_map(|j| (0..spec.component_counts.len()).map(move |k| (j, k)))
        .collect();
    let rows: Result<Vec<ConditionResult>, RecognitionError> = units
        .par_iter()
        .map(|&(j, ki)| {
            let (condition, train, test) = &jobs[j];
            let k = spec.component_counts[ki];
            evaluate(*condition, train, test, k, spec)
        })
        .collect();
    Ok(ExperimentResult { rows: rows? })
}

fn evaluate(
    condition: Condition,
    train: &[FeatureVector],
    test: &[FeatureVector],
    k: usize,
    spec: &ExperimentSpec,
) -> Result<ConditionResult, RecognitionError> {
    let train_rows: Vec<Vec<f64>> = train.iter().map(|v| v.values.clone()).collect();
    let pca = pca_fit(&train_rows, k)?;
    let train_proj: Vec<(Vec<f64>, String)> = train
        .iter()
        .map(|v| (pca_project(&pca, &v.values), v.label.clone()))
        .collect();
    let svm = svm_train(&train_proj, spec.reg_weight, spec.epochs)?;

    let labels = svm.classes.clone();
    let index: BTreeMap<&str, usize> =
        labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut confusion = vec![vec![0usize; labels.len()]; labels.len()];
    let mut hits = 0usize;
    for v in test {
        let predicted = svm_predict(&svm, &pca_project(&pca, &v.values));
        let (ti, pi) = (index[v.label.as_str()], index[predicted.as_str()]);
        confusion[ti][pi] += 1;
        if ti == pi {
            hits += 1;
        }
    }
    Ok(ConditionResult {
        condition,
        k,
        train_n: train.len(),
        test_n: test.len(),
        accuracy: hits as f64 / test.len() as f64,
        confusion,
        labels,
    })
}
