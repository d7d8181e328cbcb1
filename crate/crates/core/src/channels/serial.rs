//! JSON form of channels: `{n_qubits, form, entries}` with complex entries as
//! `[re, im]` pairs in row-major order.

use serde::{Deserialize, Serialize};

use super::{Channel, ChiMatrix, KrausSet};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};

#[derive(Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
enum Doc {
    Chi { n_qubits: usize, entries: Vec<[f64; 2]> },
    Kraus { n_qubits: usize, entries: Vec<Vec<[f64; 2]>> },
    Mixture { n_qubits: usize, components: Vec<Weighted> },
    Product { n_qubits: usize, factors: Vec<Doc> },
}

#[derive(Serialize, Deserialize)]
struct Weighted {
    weight: f64,
    channel: Doc,
}

pub(crate) fn matrix_to_pairs(m: &CMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

pub(crate) fn pairs_to_matrix(dim: usize, pairs: &[[f64; 2]]) -> Result<CMatrix> {
    if pairs.len() != dim * dim {
        return Err(Error::DimensionMismatch { expected: dim * dim, actual: pairs.len() });
    }
    Ok(CMatrix::from_row_iterator(dim, dim, pairs.iter().map(|p| c(p[0], p[1]))))
}

fn to_doc(ch: &Channel) -> Doc {
    match ch {
        Channel::Chi(chi) => Doc::Chi { n_qubits: chi.n_qubits(), entries: matrix_to_pairs(chi.entries()) },
        Channel::Kraus(k) => {
            Doc::Kraus { n_qubits: k.n_qubits(), entries: k.operators().iter().map(matrix_to_pairs).collect() }
        }
        Channel::Mixture(parts) => Doc::Mixture {
            n_qubits: ch.n_qubits(),
            components: parts.iter().map(|(w, c)| Weighted { weight: *w, channel: to_doc(c) }).collect(),
        },
        Channel::Product(factors) => {
            Doc::Product { n_qubits: ch.n_qubits(), factors: factors.iter().map(to_doc).collect() }
        }
    }
}

fn from_doc(doc: Doc) -> Result<Channel> {
    match doc {
        Doc::Chi { n_qubits, entries } => {
            let m = pairs_to_matrix(1 << (2 * n_qubits), &entries)?;
            Ok(Channel::Chi(ChiMatrix::new(n_qubits, m)?))
        }
        Doc::Kraus { n_qubits, entries } => {
            let ops = entries.iter().map(|e| pairs_to_matrix(1 << n_qubits, e)).collect::<Result<Vec<_>>>()?;
            Ok(Channel::Kraus(KrausSet::new(n_qubits, ops)?))
        }
        Doc::Mixture { n_qubits, components } => {
            let parts = components
                .into_iter()
                .map(|w| from_doc(w.channel).map(|ch| (w.weight, ch)))
                .collect::<Result<Vec<_>>>()?;
            let ch = Channel::mixture(parts)?;
            if ch.n_qubits() != n_qubits {
                return Err(Error::DimensionMismatch { expected: n_qubits, actual: ch.n_qubits() });
            }
            Ok(ch)
        }
        Doc::Product { n_qubits, factors } => {
            let ch = Channel::product(factors.into_iter().map(from_doc).collect::<Result<Vec<_>>>()?)?;
            if ch.n_qubits() != n_qubits {
                return Err(Error::DimensionMismatch { expected: n_qubits, actual: ch.n_qubits() });
            }
            Ok(ch)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ChiDoc {
    n_qubits: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for ChiMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChiDoc { n_qubits: self.n_qubits(), entries: matrix_to_pairs(self.entries()) }.serialize(s)
    }
}

/// Deserialization checks shape and Hermiticity only, so raw reconstructions
/// survive a round trip.
impl<'de> Deserialize<'de> for ChiMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ChiDoc::deserialize(d)?;
        let m = pairs_to_matrix(1 << (2 * doc.n_qubits), &doc.entries).map_err(serde::de::Error::custom)?;
        ChiMatrix::from_hermitian(doc.n_qubits, m).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn to_json(ch: &Channel) -> Result<String> {
    Ok(serde_json::to_string(&to_doc(ch))?)
}

pub(crate) fn from_json(s: &str) -> Result<Channel> {
    from_doc(serde_json::from_str(s)?)
}
