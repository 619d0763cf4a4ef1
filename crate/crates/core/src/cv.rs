//! Nested cross-validation with grid search over kernel parameters and the
//! SVM box constraint.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{KernelParams, SpaceTag};
use crate::graph::Dataset;
use crate::gram::{gram, Engine, GramMatrix};
use crate::scalar::Scalar;
use crate::svm::{predict_indices, svm_train, SvmConfig};
use crate::synth::rng;

/// Heights searched for every family.
pub const DEFAULT_HEIGHTS: [usize; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
/// Subtree weight factors; the `0.9, ..., 1.5` range is taken in steps of 0.1.
pub const DEFAULT_LAMBDAS: [f64; 11] = [0.1, 0.5, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.8];
pub const DEFAULT_CS: [f64; 8] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSetting {
    pub family: SpaceTag,
    pub h: usize,
    pub lambda: f64,
}

impl KernelSetting {
    pub fn params<T: Scalar>(&self) -> Result<KernelParams<T>> {
        KernelParams::new(self.h, T::of(self.lambda))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub kernels: Vec<KernelSetting>,
    pub cs: Vec<f64>,
}

impl Grid {
    /// Cartesian product of families, heights and (where used) lambdas.
    pub fn product(families: &[SpaceTag], heights: &[usize], lambdas: &[f64], cs: &[f64]) -> Self {
        let mut kernels = Vec::new();
        for &family in families {
            for &h in heights {
                if family.uses_lambda() {
                    kernels.extend(lambdas.iter().map(|&lambda| KernelSetting { family, h, lambda }));
                } else {
                    kernels.push(KernelSetting { family, h, lambda: 1.0 });
                }
            }
        }
        Grid {
            kernels,
            cs: cs.to_vec(),
        }
    }

    pub fn default_for(family: SpaceTag) -> Self {
        Self::product(&[family], &DEFAULT_HEIGHTS, &DEFAULT_LAMBDAS, &DEFAULT_CS)
    }

    pub fn len(&self) -> usize {
        self.kernels.len() * self.cs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub stratified: bool,
    pub normalize: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            outer_folds: 10,
            inner_folds: 10,
            repeats: 10,
            seed: 7,
            stratified: true,
            normalize: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub repeat: usize,
    pub fold: usize,
    pub n_test: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub selected_kernel: KernelSetting,
    pub selected_c: f64,
    pub inner_accuracy: f64,
    pub test_indices: Vec<usize>,
    /// Every index any inner split trained or tested on.
    pub inner_indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub dataset: String,
    pub kernel: String,
    pub grid: Grid,
    pub repeats: usize,
    pub config: CvConfig,
    pub folds: Vec<FoldRecord>,
    /// Pooled outer-test accuracy of each repeat.
    pub repeat_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation across repeats.
    pub std: f64,
}

impl CvReport {
    /// Recomputes per-repeat accuracies, mean and std from the fold table.
    pub fn recompute(&self) -> (Vec<f64>, f64, f64) {
        let repeat_accuracies: Vec<f64> = (0..self.repeats)
            .map(|r| {
                let (correct, total) = self
                    .folds
                    .iter()
                    .filter(|f| f.repeat == r)
                    .fold((0, 0), |(c, t), f| (c + f.n_correct, t + f.n_test));
                correct as f64 / total as f64
            })
            .collect();
        let (mean, std) = mean_std(&repeat_accuracies);
        (repeat_accuracies, mean, std)
    }

    /// True when no inner split of any fold touched that fold's test set.
    pub fn inner_outer_disjoint(&self) -> bool {
        self.folds.iter().all(|f| {
            let test: BTreeSet<usize> = f.test_indices.iter().copied().collect();
            f.inner_indices.iter().all(|i| !test.contains(i))
        })
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// splitmix64 over the parts, for independent reproducible sub-streams.
fn derive_seed(parts: &[u64]) -> u64 {
    let mut state = 0x243F_6A88_85A3_08D3u64;
    for &p in parts {
        state ^= p;
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        state = z ^ (z >> 31);
    }
    state
}

/// Splits `indices` into `k` folds. Stratified splitting deals each class
/// round-robin after shuffling, so every fold holds both classes.
pub fn make_folds(
    indices: &[usize],
    labels: &[i8],
    k: usize,
    stratified: bool,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = rng(seed);
    let mut folds = vec![Vec::new(); k];
    let groups: Vec<Vec<usize>> = if stratified {
        [-1i8, 1]
            .iter()
            .map(|&class| {
                let members: Vec<usize> =
                    indices.iter().copied().filter(|&i| labels[i] == class).collect();
                if members.len() < k {
                    return Err(Error::FoldTooSmall {
                        class,
                        count: members.len(),
                        folds: k,
                    });
                }
                Ok(members)
            })
            .collect::<Result<_>>()?
    } else {
        if indices.len() < k {
            return Err(Error::FoldTooSmall {
                class: 0,
                count: indices.len(),
                folds: k,
            });
        }
        vec![indices.to_vec()]
    };
    let mut position = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for i in group {
            folds[position % k].push(i);
            position += 1;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

fn complement(all: &[usize], exclude: &[usize]) -> Vec<usize> {
    let ex: BTreeSet<usize> = exclude.iter().copied().collect();
    all.iter().copied().filter(|i| !ex.contains(i)).collect()
}

fn correct_predictions<T: Scalar>(
    gram: &GramMatrix<T>,
    labels: &[i8],
    train: &[usize],
    test: &[usize],
    c: f64,
) -> Result<usize> {
    let y: Vec<i8> = train.iter().map(|&i| labels[i]).collect();
    let model = svm_train(gram, train, &y, &SvmConfig::new(T::of(c)))?;
    let predicted = predict_indices(&model, gram, train, test)?;
    Ok(predicted.iter().zip(test).filter(|&(&p, &i)| p == labels[i]).count())
}

/// Precomputes one Gram matrix per kernel setting of the grid.
pub fn grid_grams<T: Scalar>(dataset: &Dataset, grid: &Grid, normalize: bool) -> Result<Vec<GramMatrix<T>>> {
    grid.kernels
        .iter()
        .map(|setting| {
            let g = gram(dataset.graphs(), setting.family, &setting.params::<T>()?, Engine::Explicit)?;
            if normalize {
                g.normalize()
            } else {
                Ok(g)
            }
        })
        .collect()
}

/// Nested cross-validation: the inner split of every outer training set
/// selects kernel parameters and `C` (ties go to the earlier grid point),
/// the winner is retrained on the outer training set and scored on the
/// outer test fold.
pub fn nested_cv<T: Scalar>(dataset: &Dataset, grid: &Grid, config: &CvConfig) -> Result<CvReport> {
    let grams = grid_grams::<T>(dataset, grid, config.normalize)?;
    nested_cv_with_grams(dataset, grid, &grams, config)
}

/// As [`nested_cv`] with Gram matrices already built, one per `grid.kernels` entry.
pub fn nested_cv_with_grams<T: Scalar>(
    dataset: &Dataset,
    grid: &Grid,
    grams: &[GramMatrix<T>],
    config: &CvConfig,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty parameter grid".into()));
    }
    if grams.len() != grid.kernels.len() || grams.iter().any(|g| g.n() != dataset.len()) {
        return Err(Error::Shape("one Gram matrix per kernel setting is required".into()));
    }
    let labels = dataset.labels();
    let all: Vec<usize> = (0..dataset.len()).collect();
    let points: Vec<(usize, f64)> = (0..grid.kernels.len())
        .flat_map(|k| grid.cs.iter().map(move |&c| (k, c)))
        .collect();

    let mut folds = Vec::new();
    for repeat in 0..config.repeats {
        let outer = make_folds(
            &all,
            labels,
            config.outer_folds,
            config.stratified,
            derive_seed(&[config.seed, repeat as u64]),
        )?;
        let results: Vec<FoldRecord> = outer
            .par_iter()
            .enumerate()
            .map(|(fold, test)| -> Result<FoldRecord> {
                let train = complement(&all, test);
                let inner = make_folds(
                    &train,
                    labels,
                    config.inner_folds,
                    config.stratified,
                    derive_seed(&[config.seed, repeat as u64, fold as u64 + 1]),
                )?;
                let splits: Vec<(Vec<usize>, &Vec<usize>)> = inner
                    .iter()
                    .map(|inner_test| (complement(&train, inner_test), inner_test))
                    .collect();
                let mut inner_seen: BTreeSet<usize> = BTreeSet::new();
                for (inner_train, inner_test) in &splits {
                    inner_seen.extend(inner_train.iter().chain(inner_test.iter()));
                }
                assert!(
                    test.iter().all(|i| !inner_seen.contains(i)),
                    "inner split leaked an outer test index"
                );

                let scores: Vec<Option<f64>> = points
                    .par_iter()
                    .map(|&(k, c)| {
                        let mut total = 0.0;
                        for (inner_train, inner_test) in &splits {
                            // a grid point the solver cannot fit is never selected
                            let correct =
                                correct_predictions(&grams[k], labels, inner_train, inner_test, c).ok()?;
                            total += correct as f64 / inner_test.len() as f64;
                        }
                        Some(total / splits.len() as f64)
                    })
                    .collect();
                let mut best: Option<(usize, f64)> = None;
                for (p, score) in scores.iter().enumerate() {
                    if let Some(s) = score {
                        if best.is_none_or(|(_, b)| *s > b) {
                            best = Some((p, *s));
                        }
                    }
                }
                let (winner, inner_accuracy) = best.ok_or_else(|| {
                    Error::InvalidParameter("no grid point could be trained".into())
                })?;
                let (k, c) = points[winner];
                let n_correct = correct_predictions(&grams[k], labels, &train, test, c)?;
                Ok(FoldRecord {
                    repeat,
                    fold,
                    n_test: test.len(),
                    n_correct,
                    accuracy: n_correct as f64 / test.len() as f64,
                    selected_kernel: grid.kernels[k],
                    selected_c: c,
                    inner_accuracy,
                    test_indices: test.clone(),
                    inner_indices: inner_seen.into_iter().collect(),
                })
            })
            .collect::<Result<_>>()?;
        folds.extend(results);
    }

    let mut families: Vec<String> = grid.kernels.iter().map(|k| k.family.to_string()).collect();
    families.dedup();
    let mut report = CvReport {
        dataset: dataset.name.clone(),
        kernel: families.join(","),
        grid: grid.clone(),
        repeats: config.repeats,
        config: *config,
        folds,
        repeat_accuracies: Vec::new(),
        mean: 0.0,
        std: 0.0,
    };
    let (repeat_accuracies, mean, std) = report.recompute();
    report.repeat_accuracies = repeat_accuracies;
    report.mean = mean;
    report.std = std;
    Ok(report)
}
