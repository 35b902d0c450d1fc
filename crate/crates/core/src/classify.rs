//! One-vs-rest linear max-margin classifier.
//!
//! Each class gets an L2-regularised hinge-loss model trained with seeded
//! stochastic subgradient descent (step `1 / (lambda * t)`, projection onto
//! the `1 / sqrt(lambda)` ball). The bias is an extra constant-one feature.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub lambdas: Vec<f64>,
    pub epochs: usize,
    pub seed: u64,
    pub val_fraction: f64,
    /// Standardise each dimension with training-split statistics.
    pub standardize: bool,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            lambdas: log_grid(1e-5, 1e-1, 5),
            epochs: 20,
            seed: 0,
            val_fraction: 0.2,
            standardize: true,
        }
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(Error::config("classifier.lambdas", "grid is empty"));
        }
        if self.lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::config("classifier.lambdas", "every lambda must be > 0"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::config("classifier.val_fraction", "must lie in (0, 1)"));
        }
        if self.epochs == 0 {
            return Err(Error::config("classifier.epochs", "must be >= 1"));
        }
        Ok(())
    }
}

/// Labelled examples borrowed from the caller.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a, T> {
    pub x: &'a [Vec<T>],
    pub y: &'a [String],
}

impl<'a, T: Scalar> Dataset<'a, T> {
    pub fn new(x: &'a [Vec<T>], y: &'a [String]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Input(format!(
                "{} vectors but {} labels",
                x.len(),
                y.len()
            )));
        }
        if let Some(first) = x.first() {
            if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| v.len() != first.len()) {
                return Err(Error::Input(format!(
                    "vector {i} has {} dims, expected {}",
                    v.len(),
                    first.len()
                )));
            }
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaResult {
    pub lambda: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct LinearModel<T> {
    pub labels: Vec<String>,
    /// `labels.len()` rows of `dims` weights, in standardised space.
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<T>,
    pub mean: Vec<T>,
    /// Per-dimension multiplier applied after centring (`1 / std`, or 0 for
    /// constant dimensions).
    pub inv_std: Vec<T>,
    pub lambda: f64,
    pub spec: TrainSpec,
    pub grid: Vec<LambdaResult>,
    /// Summed OvR objective after each epoch of the final fit.
    pub objective: Vec<f64>,
}

/// Accuracy and confusion matrix (rows = true class, columns = predicted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub labels: Vec<String>,
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
}

impl<T: Scalar> LinearModel<T> {
    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn check(&self) -> Result<()> {
        let d = self.dims();
        let k = self.n_classes();
        if k < 2 || self.weights.len() != k || self.bias.len() != k {
            return Err(Error::Input("classifier shape mismatch".into()));
        }
        if self.inv_std.len() != d || self.weights.iter().any(|w| w.len() != d) {
            return Err(Error::Input("classifier dimension mismatch".into()));
        }
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        if !finite(&self.mean)
            || !finite(&self.inv_std)
            || !finite(&self.bias)
            || !self.weights.iter().all(|w| finite(w))
        {
            return Err(Error::Input("classifier has non-finite parameters".into()));
        }
        Ok(())
    }

    fn standardize_into(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(
            x.iter()
                .zip(&self.mean)
                .zip(&self.inv_std)
                .map(|((&v, &m), &s)| (v - m) * s),
        );
    }

    pub fn scores(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dims() {
            return Err(Error::Input(format!(
                "vector has {} dims, model expects {}",
                x.len(),
                self.dims()
            )));
        }
        let mut z = Vec::with_capacity(x.len());
        self.standardize_into(x, &mut z);
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, &b)| dot(w, &z) + b)
            .collect())
    }

    /// Index into `labels` of the highest score; ties go to the lowest index.
    pub fn predict_index(&self, x: &[T]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }

    pub fn predict(&self, x: &[T]) -> Result<&str> {
        Ok(&self.labels[self.predict_index(x)?])
    }

    pub fn evaluate(&self, data: Dataset<'_, T>) -> Result<Evaluation> {
        if data.is_empty() {
            return Err(Error::Input("cannot evaluate on an empty set".into()));
        }
        let mut labels = self.labels.clone();
        for y in data.y {
            if !labels.contains(y) {
                labels.push(y.clone());
            }
        }
        let preds = data
            .x
            .par_iter()
            .map(|x| self.predict_index(x))
            .collect::<Result<Vec<_>>>()?;
        let k = labels.len();
        let mut confusion = vec![vec![0usize; k]; k];
        for (y, p) in data.y.iter().zip(preds) {
            let t = labels.iter().position(|l| l == y).expect("label registered above");
            confusion[t][p] += 1;
        }
        let correct = (0..k).map(|i| confusion[i][i]).sum();
        Ok(Evaluation {
            labels,
            total: data.len(),
            correct,
            accuracy: correct as f64 / data.len() as f64,
            confusion,
        })
    }
}

pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate().skip(1) {
        if s > v[best] {
            best = i;
        }
    }
    best
}

/// Sorted distinct labels.
pub fn class_labels(y: &[String]) -> Vec<String> {
    let mut l: Vec<String> = y.to_vec();
    l.sort();
    l.dedup();
    l
}

fn content_key<T: Scalar>(seed: u64, label: &str, x: &[T]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    for v in x {
        h.update(v.as_f64().to_bits().to_le_bytes());
    }
    h.finalize().into()
}

/// Stratified train/validation split over distinct examples: identical
/// (vector, label) pairs always land on the same side. Returns index lists
/// (train, validation); validation is empty when no class has two distinct
/// examples.
pub fn split_indices<T: Scalar>(
    data: Dataset<'_, T>,
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<&str, BTreeMap<[u8; 32], Vec<usize>>> = BTreeMap::new();
    for (i, (x, y)) in data.x.iter().zip(data.y).enumerate() {
        groups
            .entry(y.as_str())
            .or_default()
            .entry(content_key(seed, y, x))
            .or_default()
            .push(i);
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for class in groups.values() {
        let g = class.len();
        let n_val = if g < 2 {
            0
        } else {
            ((fraction * g as f64).round() as usize).clamp(1, g - 1)
        };
        for (j, members) in class.values().enumerate() {
            if j < n_val {
                val.extend_from_slice(members);
            } else {
                train.extend_from_slice(members);
            }
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Per-dimension mean and `1 / std` (population); constant dims get 0.
pub fn standardization<T: Scalar>(x: &[&[T]], dims: usize) -> (Vec<T>, Vec<T>) {
    let n = T::from_usize_lossy(x.len().max(1));
    let mut mean = vec![T::zero(); dims];
    for v in x {
        for (m, &a) in mean.iter_mut().zip(v.iter()) {
            *m += a;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![T::zero(); dims];
    for v in x {
        for ((s, &a), &m) in var.iter_mut().zip(v.iter()).zip(&mean) {
            let d = a - m;
            *s += d * d;
        }
    }
    let tiny = T::epsilon();
    let inv = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > tiny {
                T::one() / sd
            } else {
                T::zero()
            }
        })
        .collect();
    (mean, inv)
}

struct Fit<T> {
    weights: Vec<Vec<T>>,
    bias: Vec<T>,
    objective: Vec<f64>,
}

/// Trains all one-vs-rest models on standardised vectors `z` with class
/// indices `c`.
fn fit_ovr<T: Scalar>(
    z: &[Vec<T>],
    c: &[usize],
    n_classes: usize,
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Fit<T> {
    let dims = z.first().map_or(0, Vec::len);
    let lam = T::lit(lambda);
    let radius = T::lit(1.0 / lambda.sqrt());
    let mut weights = vec![vec![T::zero(); dims]; n_classes];
    let mut bias = vec![T::zero(); n_classes];
    // Weight vectors are kept as scale * raw so the shrink step is O(1).
    let mut scale = vec![T::one(); n_classes];
    let mut order: Vec<usize> = (0..z.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut objective = Vec::with_capacity(epochs);
    let mut t = 0u64;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = T::one() / (lam * T::from_u64_lossy(t));
            let shrink = T::one() - eta * lam;
            let x = &z[i];
            for k in 0..n_classes {
                let y = if c[i] == k { T::one() } else { -T::one() };
                let margin = y * (scale[k] * dot(&weights[k], x) + bias[k]);
                // At t = 1 the shrink factor is exactly zero.
                if shrink > T::zero() {
                    scale[k] *= shrink;
                } else {
                    scale[k] = T::one();
                    weights[k].iter_mut().for_each(|w| *w = T::zero());
                }
                bias[k] *= shrink.max(T::zero());
                if margin < T::one() {
                    let step = eta * y / scale[k];
                    for (w, &a) in weights[k].iter_mut().zip(x) {
                        *w += step * a;
                    }
                    bias[k] += eta * y;
                }
                let norm2 = scale[k] * scale[k] * dot(&weights[k], &weights[k]) + bias[k] * bias[k];
                let norm = norm2.sqrt();
                if norm > radius {
                    let f = radius / norm;
                    scale[k] *= f;
                    bias[k] *= f;
                }
                if scale[k] < T::lit(1e-9) {
                    let s = scale[k];
                    weights[k].iter_mut().for_each(|w| *w *= s);
                    scale[k] = T::one();
                }
            }
        }
        let mut obj = 0.0;
        for k in 0..n_classes {
            let mut hinge = 0.0;
            for (x, &ci) in z.iter().zip(c) {
                let y = if ci == k { 1.0 } else { -1.0 };
                let s = (scale[k] * dot(&weights[k], x) + bias[k]).as_f64();
                hinge += (1.0 - y * s).max(0.0);
            }
            let n2 = (scale[k] * scale[k] * dot(&weights[k], &weights[k]) + bias[k] * bias[k])
                .as_f64();
            obj += 0.5 * lambda * n2 + hinge / z.len().max(1) as f64;
        }
        objective.push(obj);
    }
    for k in 0..n_classes {
        let s = scale[k];
        weights[k].iter_mut().for_each(|w| *w *= s);
    }
    Fit {
        weights,
        bias,
        objective,
    }
}

fn prepare<T: Scalar>(
    x: &[&[T]],
    dims: usize,
    standardize: bool,
) -> (Vec<T>, Vec<T>, Vec<Vec<T>>) {
    let (mean, inv) = if standardize {
        standardization(x, dims)
    } else {
        (vec![T::zero(); dims], vec![T::one(); dims])
    };
    let z = x
        .iter()
        .map(|v| {
            v.iter()
                .zip(&mean)
                .zip(&inv)
                .map(|((&a, &m), &s)| (a - m) * s)
                .collect()
        })
        .collect();
    (mean, inv, z)
}

struct Prepared<'a, T> {
    labels: &'a [String],
    mean: Vec<T>,
    inv_std: Vec<T>,
    z: Vec<Vec<T>>,
    c: Vec<usize>,
}

impl<'a, T: Scalar> Prepared<'a, T> {
    fn new(labels: &'a [String], x: &[&[T]], y: &[&String], dims: usize, standardize: bool) -> Self {
        let (mean, inv_std, z) = prepare(x, dims, standardize);
        let c = y
            .iter()
            .map(|l| labels.binary_search(l).expect("label in class list"))
            .collect();
        Self {
            labels,
            mean,
            inv_std,
            z,
            c,
        }
    }

    fn fit(&self, lambda: f64, spec: &TrainSpec) -> LinearModel<T> {
        let fit = fit_ovr(&self.z, &self.c, self.labels.len(), lambda, spec.epochs, spec.seed);
        LinearModel {
            labels: self.labels.to_vec(),
            weights: fit.weights,
            bias: fit.bias,
            mean: self.mean.clone(),
            inv_std: self.inv_std.clone(),
            lambda,
            spec: spec.clone(),
            grid: Vec::new(),
            objective: fit.objective,
        }
    }
}

/// Grid-searches lambda on a held-out split (ties go to the smaller lambda)
/// and refits on all of `data`.
pub fn train<T: Scalar>(data: Dataset<'_, T>, spec: &TrainSpec) -> Result<LinearModel<T>> {
    spec.validate()?;
    let labels = class_labels(data.y);
    if labels.len() < 2 {
        return Err(Error::Input(format!(
            "need at least two classes, found {}",
            labels.len()
        )));
    }
    let dims = data.dims();
    let (tr, va) = split_indices(data, spec.val_fraction, spec.seed);
    let val_idx = if va.is_empty() { &tr } else { &va };

    let mut lambdas = spec.lambdas.clone();
    lambdas.sort_by(|a, b| a.partial_cmp(b).expect("finite lambdas"));
    lambdas.dedup();

    let grid: Vec<LambdaResult> = {
        let tr_x: Vec<&[T]> = tr.iter().map(|&i| data.x[i].as_slice()).collect();
        let tr_y: Vec<&String> = tr.iter().map(|&i| &data.y[i]).collect();
        let prepared = Prepared::new(&labels, &tr_x, &tr_y, dims, spec.standardize);
        lambdas
            .par_iter()
            .map(|&lambda| {
                let m = prepared.fit(lambda, spec);
                let mut correct = 0usize;
                for &i in val_idx {
                    if m.predict(&data.x[i])? == data.y[i] {
                        correct += 1;
                    }
                }
                Ok(LambdaResult {
                    lambda,
                    val_accuracy: correct as f64 / val_idx.len() as f64,
                })
            })
            .collect::<Result<_>>()?
    };
    let mut best = &grid[0];
    for r in &grid[1..] {
        if r.val_accuracy > best.val_accuracy {
            best = r;
        }
    }

    let all_x: Vec<&[T]> = data.x.iter().map(Vec::as_slice).collect();
    let all_y: Vec<&String> = data.y.iter().collect();
    let mut model = Prepared::new(&labels, &all_x, &all_y, dims, spec.standardize).fit(best.lambda, spec);
    model.grid = grid;
    model.check()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_model(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> LinearModel<f64> {
        let d = weights[0].len();
        LinearModel {
            labels: (0..weights.len()).map(|i| i.to_string()).collect(),
            weights,
            bias,
            mean: vec![0.0; d],
            inv_std: vec![1.0; d],
            lambda: 1e-3,
            spec: TrainSpec::default(),
            grid: vec![],
            objective: vec![],
        }
    }

    #[test]
    fn grid_defaults() {
        let g = log_grid(1e-5, 1e-1, 5);
        let want = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];
        for (a, b) in g.iter().zip(want) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn predict_examples() {
        let m = identity_model(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.0, 0.0]);
        assert_eq!(m.predict_index(&[1.0, 0.0]).unwrap(), 0);
        let m = identity_model(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.1, 0.4]);
        assert_eq!(m.predict_index(&[0.0, 0.0]).unwrap(), 1);
        let tie = identity_model(vec![vec![0.0], vec![0.0]], vec![0.2, 0.2]);
        assert_eq!(tie.predict_index(&[3.0]).unwrap(), 0);
        assert!(matches!(m.predict_index(&[1.0]), Err(Error::Input(_))));
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        let y = vec!["a".to_string(), "a".to_string()];
        let r = train::<f64>(Dataset::new(&x, &y).unwrap(), &TrainSpec::default());
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn spec_validation() {
        let mut s = TrainSpec::default();
        s.lambdas.push(0.0);
        assert!(matches!(s.validate(), Err(Error::Config { .. })));
        let s = TrainSpec { val_fraction: 1.0, ..TrainSpec::default() };
        assert!(s.validate().is_err());
    }

    #[test]
    fn duplicates_share_split_side() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<String> = (0..10).map(|i| (i % 2).to_string()).collect();
        let mut x2 = x.clone();
        x2.extend(x.clone());
        let mut y2 = y.clone();
        y2.extend(y.clone());
        let (_, v1) = split_indices(Dataset::new(&x, &y).unwrap(), 0.2, 7);
        let (_, v2) = split_indices(Dataset::new(&x2, &y2).unwrap(), 0.2, 7);
        let mut expect: Vec<usize> = v1.iter().flat_map(|&i| [i, i + 10]).collect();
        expect.sort_unstable();
        assert_eq!(v2, expect);
        assert_eq!(v1.len(), 2);
    }
}
