//! Semantic importance profiles: normalization, masking-based evaluation,
//! synthetic generators and the weight file format.
//!
//! Weight files are UTF-8 text with one decimal weight per line. Lines
//! starting with `#` and blank lines are skipped. A single-column CSV with
//! the header `weight` is accepted as well.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};

/// Tolerance on `sum(weights) == 1`.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Strictly positive, L1-normalized feature weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceProfile {
    weights: Vec<f64>,
}

impl ImportanceProfile {
    /// Divides `raw` by its L1 norm. Every entry must be finite and > 0.
    pub fn normalize(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(domain("importance profile needs at least one weight"));
        }
        if let Some((j, &v)) = raw
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(domain(format!(
                "importance weight {j} must be finite and > 0, got {v}"
            )));
        }
        let total: f64 = raw.iter().sum();
        Ok(Self {
            weights: raw.iter().map(|v| v / total).collect(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    /// True iff `w[0] > w[1] > ... > w[N-1]`.
    pub fn is_ordered(&self) -> bool {
        self.weights.windows(2).all(|p| p[0] > p[1])
    }

    /// Feature indices sorted by descending weight, ties by ascending index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.weights.len()).collect();
        idx.sort_by(|&i, &j| self.weights[j].total_cmp(&self.weights[i]).then(i.cmp(&j)));
        idx
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let raw = parse_weights(&text).map_err(|(line, msg)| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        })?;
        ImportanceProfile::normalize(&raw).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Serialized form written by [`ImportanceProfile::save`].
    pub fn to_text(&self) -> String {
        let mut out = format!("# importance weights, N = {}\n", self.weights.len());
        for w in &self.weights {
            out.push_str(&format!("{w}\n"));
        }
        out
    }
}

impl<'de> Deserialize<'de> for ImportanceProfile {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            weights: Vec<f64>,
        }
        let raw = Raw::deserialize(de)?;
        ImportanceProfile::normalize(&raw.weights).map_err(serde::de::Error::custom)
    }
}

fn parse_weights(text: &str) -> std::result::Result<Vec<f64>, (usize, String)> {
    let mut out = Vec::new();
    let mut seen_content = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_content {
            seen_content = true;
            if line.eq_ignore_ascii_case("weight") {
                continue;
            }
        }
        let v: f64 = line
            .trim_end_matches(',')
            .parse()
            .map_err(|_| (lineno, format!("expected a decimal weight, found `{line}`")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err((lineno, format!("weights must be finite and > 0, found {v}")));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err((0, "no weights found".into()));
    }
    Ok(out)
}

/// Scores a feature vector; stands in for the downstream task metric.
pub trait TaskSurrogate {
    fn score(&self, features: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> TaskSurrogate for F {
    fn score(&self, features: &[f64]) -> f64 {
        self(features)
    }
}

/// Raw importance of each feature: task score of the full vector minus the
/// score with that single feature zeroed.
///
/// The result is not normalized and may contain zero or negative entries
/// for surrogates where a feature does not help; callers must clamp or
/// filter before passing it to [`ImportanceProfile::normalize`].
pub fn masking_importance<T: TaskSurrogate + ?Sized>(features: &[f64], task: &T) -> Vec<f64> {
    let full = task.score(features);
    let mut masked = features.to_vec();
    (0..features.len())
        .map(|j| {
            let saved = masked[j];
            masked[j] = 0.0;
            let drop = full - task.score(&masked);
            masked[j] = saved;
            drop
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// `[1, r, r^2, ...]`, parameter is the decay ratio `r` in (0, 1).
    IsfrGeometric,
    /// Log-linear decay spanning `parameter` decades (>= 2).
    IsfrPaperLike,
    /// `1 + jitter * u`, `u ~ U(-1, 1)`, parameter is the jitter in [0, 0.2).
    UniformNoisy,
}

impl ProfileKind {
    pub fn default_parameter(self) -> f64 {
        match self {
            ProfileKind::IsfrGeometric => 0.6,
            ProfileKind::IsfrPaperLike => DEFAULT_SPAN_DECADES,
            ProfileKind::UniformNoisy => 0.1,
        }
    }
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "isfr_geometric" | "geometric" => Ok(ProfileKind::IsfrGeometric),
            "isfr_paper_like" | "paper_like" => Ok(ProfileKind::IsfrPaperLike),
            "uniform_noisy" | "uniform" => Ok(ProfileKind::UniformNoisy),
            _ => Err(config(
                "kind",
                format!("unknown profile kind `{s}` (isfr_geometric, isfr_paper_like, uniform_noisy)"),
            )),
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileKind::IsfrGeometric => "isfr_geometric",
            ProfileKind::IsfrPaperLike => "isfr_paper_like",
            ProfileKind::UniformNoisy => "uniform_noisy",
        })
    }
}

const DEFAULT_SPAN_DECADES: f64 = 2.5;

/// Generates a synthetic importance profile. Only `UniformNoisy` uses `seed`.
pub fn synthetic_profile(
    kind: ProfileKind,
    n: usize,
    parameter: f64,
    seed: u64,
) -> Result<ImportanceProfile> {
    if n == 0 {
        return Err(config("n", "need at least one feature"));
    }
    let raw: Vec<f64> = match kind {
        ProfileKind::IsfrGeometric => {
            if !(parameter > 0.0 && parameter < 1.0) {
                return Err(config(
                    "parameter",
                    format!("geometric decay ratio must be in (0, 1), got {parameter}"),
                ));
            }
            std::iter::successors(Some(1.0), |v| Some(v * parameter))
                .take(n)
                .collect()
        }
        ProfileKind::IsfrPaperLike => {
            if !(parameter >= 2.0 && parameter.is_finite()) {
                return Err(config(
                    "parameter",
                    format!("decade span must be >= 2, got {parameter}"),
                ));
            }
            let denom = (n.max(2) - 1) as f64;
            (0..n)
                .map(|j| 10f64.powf(-parameter * j as f64 / denom))
                .collect()
        }
        ProfileKind::UniformNoisy => {
            if !(0.0..0.2).contains(&parameter) {
                return Err(config(
                    "parameter",
                    format!("relative jitter must be in [0, 0.2), got {parameter}"),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n)
                .map(|_| 1.0 + parameter * rng.random_range(-1.0..1.0))
                .collect()
        }
    };
    ImportanceProfile::normalize(&raw)
}
