//! The weak-binarity check for one pair of tuples: reconstruct the pair type
//! from its three pieces and compare with direct computation and, optionally,
//! with every completion the enumerator finds.

use std::collections::BTreeSet;

use crate::expansion::Structure;

use super::enumerate::{enumerate_extensions, Constraint, EnumOptions};
use super::{meet_witness, qf_type_of, reconstruct_pair_type, QfError, QfType};

#[derive(Debug, Clone)]
pub struct WbReport {
    /// Witness set the pair type is taken over.
    pub c: Vec<String>,
    pub reconstructed: QfType,
    pub direct: QfType,
    /// Completions over the base of the three input types, when requested.
    pub completions: Option<Vec<QfType>>,
}

impl WbReport {
    pub fn agree(&self) -> bool {
        self.reconstructed == self.direct
            && self
                .completions
                .as_ref()
                .is_none_or(|c| c.len() == 1 && c[0] == self.direct)
    }
}

/// The three input types: each tuple over `m` and the pair over the witness.
pub fn pieces(
    s: &Structure,
    m: &BTreeSet<usize>,
    b0: &[usize],
    b1: &[usize],
) -> Result<(QfType, QfType, QfType, Vec<String>), QfError> {
    let b: Vec<usize> = b0.iter().chain(b1).copied().collect();
    let w = meet_witness(&s.tree, m, &b)?;
    let c = s.tree.indices(&w.c)?;
    Ok((
        qf_type_of(s, m, b0)?,
        qf_type_of(s, m, b1)?,
        qf_type_of(s, &c, &b)?,
        w.c,
    ))
}

pub fn wb_check(
    s: &Structure,
    m: &BTreeSet<usize>,
    b0: &[usize],
    b1: &[usize],
    oracle: Option<EnumOptions>,
) -> Result<WbReport, QfError> {
    let (tp_a, tp_b, tp_c, c) = pieces(s, m, b0, b1)?;
    let reconstructed = reconstruct_pair_type(&tp_a, &tp_b, &tp_c)?;
    let b: Vec<usize> = b0.iter().chain(b1).copied().collect();
    let direct = qf_type_of(s, m, &b)?;
    let completions = match oracle {
        None => None,
        Some(opts) => {
            let (n0, n1) = (b0.len(), b1.len());
            let (base, _) = s.restrict(m).map_err(|e| QfError::Malformed(e.to_string()))?;
            let pi = [
                Constraint::Type {
                    vars: (0..n0).collect(),
                    qf: tp_a,
                },
                Constraint::Type {
                    vars: (n0..n0 + n1).collect(),
                    qf: tp_b,
                },
                Constraint::Type {
                    vars: (0..n0 + n1).collect(),
                    qf: tp_c,
                },
            ];
            Some(enumerate_extensions(&base, n0 + n1, &pi, opts)?)
        }
    };
    Ok(WbReport {
        c,
        reconstructed,
        direct,
        completions,
    })
}
