//! Gram matrix assembly, normalization, export and spectral checks.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_all, KernelParams, SpaceTag, SparseFeatureVector};
use crate::graph::Graph;
use crate::implicit::{decompose_all, kernel_implicit};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Explicit,
    Implicit,
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Engine::Explicit),
            "implicit" => Ok(Engine::Implicit),
            _ => Err(Error::InvalidParameter(format!("unknown engine {s:?}"))),
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Explicit => "explicit",
            Engine::Implicit => "implicit",
        })
    }
}

/// Kernel family and parameters a Gram matrix was built with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTag {
    pub family: SpaceTag,
    pub h: usize,
    pub lambda: f64,
    pub engine: Engine,
    pub normalized: bool,
}

impl fmt::Display for KernelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} h={}", self.family, self.h)?;
        if self.family.uses_lambda() {
            write!(f, " lambda={}", self.lambda)?;
        }
        Ok(())
    }
}

/// Wall-clock seconds spent building a Gram matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub extract_seconds: f64,
    pub fill_seconds: f64,
    pub total_seconds: f64,
}

/// Dense symmetric kernel matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix<T> {
    n: usize,
    values: Vec<T>,
    pub tag: KernelTag,
    pub timing: Timing,
}

impl<T: Scalar> GramMatrix<T> {
    /// Evaluates `kernel(i, j)` once per unordered pair (rows in parallel)
    /// and mirrors the upper triangle.
    pub fn from_fn<F>(n: usize, tag: KernelTag, kernel: F) -> Self
    where
        F: Fn(usize, usize) -> T + Sync,
    {
        let rows: Vec<Vec<T>> = (0..n)
            .into_par_iter()
            .map(|i| (i..n).map(|j| kernel(i, j)).collect())
            .collect();
        let mut values = vec![T::zero(); n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (offset, v) in row.into_iter().enumerate() {
                let j = i + offset;
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        GramMatrix {
            n,
            values,
            tag,
            timing: Timing::default(),
        }
    }

    /// Wraps an existing row-major matrix (checked for squareness only).
    pub fn from_rows(rows: Vec<Vec<T>>, tag: KernelTag) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("Gram matrix rows must all have length n".into()));
        }
        Ok(GramMatrix {
            n,
            values: rows.into_iter().flatten().collect(),
            tag,
            timing: Timing::default(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Cosine normalization `K_ij / sqrt(K_ii K_jj)`.
    pub fn normalize(&self) -> Result<Self> {
        let diag: Vec<T> = (0..self.n).map(|i| self.get(i, i)).collect();
        if let Some(i) = diag.iter().position(|&d| !(d > T::zero())) {
            return Err(Error::ZeroDiagonal(i));
        }
        let scale: Vec<T> = diag.iter().map(|d| d.sqrt()).collect();
        let mut values = self.values.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                values[i * self.n + j] = if i == j {
                    T::one()
                } else {
                    self.values[i * self.n + j] / (scale[i] * scale[j])
                };
            }
        }
        Ok(GramMatrix {
            n: self.n,
            values,
            tag: KernelTag {
                normalized: true,
                ..self.tag
            },
            timing: self.timing,
        })
    }

    /// Entrywise sum; used to check additive kernel combinations.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Shape(format!("{} vs {} rows", self.n, other.n)));
        }
        Ok(GramMatrix {
            n: self.n,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect(),
            tag: self.tag,
            timing: Timing::default(),
        })
    }

    /// Ascending eigenvalues, computed in double precision.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).to_f64_lossy());
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Smallest over largest eigenvalue; 0 for an all-zero spectrum.
    pub fn min_eigen_ratio(&self) -> f64 {
        let ev = self.eigenvalues();
        let (Some(&lo), Some(&hi)) = (ev.first(), ev.last()) else {
            return 0.0;
        };
        if hi > 0.0 {
            lo / hi
        } else if lo == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Row-major CSV, full matrix, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::new();
        for i in 0..self.n {
            line.clear();
            for j in 0..self.n {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{:.16e}", self.get(i, j).to_f64_lossy()));
            }
            line.push('\n');
            out.write_all(line.as_bytes()).map_err(|e| Error::io("<csv>", e))?;
        }
        Ok(())
    }

    /// JSON metadata accompanying a CSV export.
    pub fn write_sidecar<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(
            out,
            &serde_json::json!({
                "n": self.n,
                "kernel": self.tag,
                "timing": self.timing,
            }),
        )?;
        Ok(())
    }
}

/// Reads a CSV Gram export back into rows.
pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<csv>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse("<csv>", i + 1, format!("bad number {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Gram matrix of explicit feature vectors sharing one interner.
pub fn gram_from_vectors<T: Scalar>(
    vectors: &[SparseFeatureVector<T>],
    tag: KernelTag,
) -> Result<GramMatrix<T>> {
    if let Some(first) = vectors.first() {
        if let Some(other) = vectors.iter().find(|v| v.space() != first.space()) {
            return Err(Error::SpaceMismatch {
                left: first.space(),
                right: other.space(),
            });
        }
    }
    Ok(GramMatrix::from_fn(vectors.len(), tag, |i, j| {
        vectors[i].dot(&vectors[j]).expect("checked above")
    }))
}

/// Extracts features for every graph once, then fills the Gram matrix.
pub fn gram<T: Scalar>(
    graphs: &[Graph],
    family: SpaceTag,
    params: &KernelParams<T>,
    engine: Engine,
) -> Result<GramMatrix<T>> {
    if graphs.is_empty() {
        return Err(Error::InvalidParameter("cannot build a Gram matrix of zero graphs".into()));
    }
    let tag = KernelTag {
        family,
        h: params.h,
        lambda: params.lambda.to_f64_lossy(),
        engine,
        normalized: false,
    };
    let start = Instant::now();
    let (mut g, extract_seconds) = match engine {
        Engine::Explicit => {
            let (vectors, _interner) = extract_all(graphs, family, params);
            let extracted = start.elapsed().as_secs_f64();
            (gram_from_vectors(&vectors, tag)?, extracted)
        }
        Engine::Implicit => {
            if family != SpaceTag::Tck {
                return Err(Error::InvalidParameter(format!(
                    "the implicit engine computes TCK only, not {family}"
                )));
            }
            let (spaces, _interner) = decompose_all(graphs, params.h);
            let extracted = start.elapsed().as_secs_f64();
            let g = GramMatrix::from_fn(spaces.len(), tag, |i, j| {
                kernel_implicit(&spaces[i], &spaces[j], params.lambda).expect("shared interner")
            });
            (g, extracted)
        }
    };
    let total = start.elapsed().as_secs_f64();
    g.timing = Timing {
        extract_seconds,
        fill_seconds: total - extract_seconds,
        total_seconds: total,
    };
    Ok(g)
}
