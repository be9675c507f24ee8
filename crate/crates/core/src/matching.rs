//! Greedy one-to-one assignment of features to subchannels: the j-th most
//! important feature goes to the j-th strongest subchannel.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::importance::ImportanceProfile;

/// Normalized SNR per subchannel (linear, per watt of transmit power).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelState {
    gammas: Vec<f64>,
}

impl ChannelState {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(domain("channel state needs at least one subchannel"));
        }
        if let Some((l, g)) = gammas
            .iter()
            .enumerate()
            .find(|(_, g)| !(**g > 0.0 && g.is_finite()))
        {
            return Err(domain(format!(
                "normalized SNR of subchannel {l} must be finite and > 0, got {g}"
            )));
        }
        Ok(Self { gammas })
    }

    pub fn from_db(db: &[f64]) -> Result<Self> {
        Self::new(db.iter().map(|&v| db_to_linear(v)).collect())
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    /// Every subchannel's SNR multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.gammas.iter().map(|g| g * factor).collect())
    }
}

impl<'de> Deserialize<'de> for ChannelState {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            gammas: Vec<f64>,
        }
        ChannelState::new(Raw::deserialize(de)?.gammas).map_err(serde::de::Error::custom)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Feature-to-subchannel assignment. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `permutation[j]` is the subchannel carrying feature `j`.
    pub permutation: Vec<usize>,
    /// `sorted_gammas[j] = gammas[permutation[j]]`.
    pub sorted_gammas: Vec<f64>,
}

impl Matching {
    pub fn from_permutation(permutation: Vec<usize>, ch: &ChannelState) -> Result<Self> {
        let n = ch.len();
        if permutation.len() != n {
            return Err(Error::DimensionMismatch {
                what: "matching permutation",
                expected: n,
                got: permutation.len(),
            });
        }
        let mut seen = vec![false; n];
        for &l in &permutation {
            if l >= n || std::mem::replace(&mut seen[l], true) {
                return Err(domain(format!(
                    "matching {permutation:?} is not a permutation of 0..{n}"
                )));
            }
        }
        let sorted_gammas = permutation.iter().map(|&l| ch.gammas()[l]).collect();
        Ok(Self {
            permutation,
            sorted_gammas,
        })
    }

    pub fn identity(ch: &ChannelState) -> Self {
        Self {
            permutation: (0..ch.len()).collect(),
            sorted_gammas: ch.gammas().to_vec(),
        }
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.permutation.len()];
        self.permutation
            .iter()
            .all(|&l| l < seen.len() && !std::mem::replace(&mut seen[l], true))
    }
}

/// Pairs features ranked by descending weight with subchannels ranked by
/// descending SNR. Ties are broken by ascending index on both sides.
pub fn greedy_match(w: &ImportanceProfile, ch: &ChannelState) -> Result<Matching> {
    if w.n_features() != ch.len() {
        return Err(Error::DimensionMismatch {
            what: "subchannels per feature",
            expected: w.n_features(),
            got: ch.len(),
        });
    }
    let g = ch.gammas();
    let mut channels: Vec<usize> = (0..g.len()).collect();
    channels.sort_by(|&i, &j| g[j].total_cmp(&g[i]).then(i.cmp(&j)));

    let mut permutation = vec![0; g.len()];
    for (feature, channel) in w.ranking().into_iter().zip(channels) {
        permutation[feature] = channel;
    }
    Matching::from_permutation(permutation, ch)
}
