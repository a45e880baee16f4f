//! Versioned JSON checkpoints for trained nets and DaDiL dictionaries.
//! Floats round-trip exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use shiftkit_core::msda::Dictionary;
use shiftkit_core::nn::{Architecture, FeedForwardNet};
use shiftkit_core::{Matrix, SimplexWeights, SoftLabeled};

use crate::error::{io_err, Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub version: u32,
    pub architecture: Architecture,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomRecord {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryCheckpoint {
    pub version: u32,
    pub atoms: Vec<AtomRecord>,
    /// One weight vector per domain, target last.
    pub weights: Vec<Vec<f64>>,
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("ragged {what} rows")));
    }
    Ok(Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Config(format!("unsupported checkpoint version {v}")));
    }
    Ok(())
}

impl NetCheckpoint {
    pub fn from_net(net: &FeedForwardNet) -> Self {
        NetCheckpoint { version: FORMAT_VERSION, architecture: net.architecture().clone(), params: net.params().to_vec() }
    }

    pub fn into_net(self) -> Result<FeedForwardNet> {
        check_version(self.version)?;
        Ok(FeedForwardNet::from_parts(self.architecture, self.params)?)
    }
}

impl DictionaryCheckpoint {
    pub fn from_dictionary(d: &Dictionary) -> Self {
        DictionaryCheckpoint {
            version: FORMAT_VERSION,
            atoms: d
                .atoms
                .iter()
                .map(|a| AtomRecord { features: rows(&a.features), labels: rows(&a.labels), weights: a.weights.clone() })
                .collect(),
            weights: d.weights.iter().map(|w| w.values().to_vec()).collect(),
        }
    }

    pub fn into_dictionary(self) -> Result<Dictionary> {
        check_version(self.version)?;
        let atoms = self
            .atoms
            .into_iter()
            .map(|a| Ok(SoftLabeled::new(matrix(&a.features, "atom feature")?, matrix(&a.labels, "atom label")?, a.weights)?))
            .collect::<Result<Vec<_>>>()?;
        let weights = self.weights.into_iter().map(SimplexWeights::new).collect::<shiftkit_core::Result<Vec<_>>>()?;
        let d = Dictionary { atoms, weights };
        d.validate()?;
        Ok(d)
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_net(path: &Path, net: &FeedForwardNet) -> Result<()> {
    save_json(path, &NetCheckpoint::from_net(net))
}

pub fn load_net(path: &Path) -> Result<FeedForwardNet> {
    load_json::<NetCheckpoint>(path)?.into_net()
}

pub fn save_dictionary(path: &Path, d: &Dictionary) -> Result<()> {
    save_json(path, &DictionaryCheckpoint::from_dictionary(d))
}

pub fn load_dictionary(path: &Path) -> Result<Dictionary> {
    load_json::<DictionaryCheckpoint>(path)?.into_dictionary()
}
