//! Per-node accounting of one conversion.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, Rational};
use crate::error::{Error, Result};

/// A storage node taking part in a conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    /// Node `node` of initial stripe `stripe`; data nodes come first.
    Initial { stripe: usize, node: usize },
    /// The `index`-th parity node of the final stripe.
    New { index: usize },
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Initial { stripe, node } => write!(f, "s{stripe}n{node}"),
            NodeId::New { index } => write!(f, "new{index}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Present in both the initial and the final stripe.
    Unchanged,
    /// Only in an initial stripe; discarded after conversion.
    Retired,
    /// Only in the final stripe; written during conversion.
    New,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Unchanged => "unchanged",
            Role::Retired => "retired",
            Role::New => "new",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRecord {
    pub id: NodeId,
    pub role: Role,
    /// Subsymbols downloaded from this node.
    pub read: usize,
    /// Subsymbols written to this node.
    pub written: usize,
}

/// Download and write counts of one conversion, in subsymbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversionTrace {
    pub alpha: usize,
    pub records: Vec<NodeRecord>,
}

impl ConversionTrace {
    pub fn total_read(&self) -> usize {
        self.records.iter().map(|r| r.read).sum()
    }

    pub fn total_written(&self) -> usize {
        self.records.iter().map(|r| r.written).sum()
    }

    /// Total bandwidth: everything read plus everything written.
    pub fn gamma(&self) -> usize {
        self.total_read() + self.total_written()
    }

    pub fn count(&self, role: Role) -> usize {
        self.records.iter().filter(|r| r.role == role).count()
    }

    /// Largest download from a node of the given role.
    pub fn max_read(&self, role: Role) -> usize {
        self.records
            .iter()
            .filter(|r| r.role == role)
            .map(|r| r.read)
            .max()
            .unwrap_or(0)
    }

    pub fn read_from(&self, id: NodeId) -> usize {
        self.records
            .iter()
            .find(|r| r.id == id)
            .map_or(0, |r| r.read)
    }

    /// Checks per-node limits: no node gives more than `α`, every new node is
    /// written in full, and no stripe keeps more than `k_initial` nodes.
    pub fn validate(&self, k_initial: usize) -> Result<()> {
        let mut unchanged_per_stripe: Vec<usize> = Vec::new();
        for r in &self.records {
            if r.read > self.alpha {
                return Err(Error::Internal(format!(
                    "{} reads {} subsymbols, more than alpha = {}",
                    r.id, r.read, self.alpha
                )));
            }
            match (r.id, r.role) {
                (NodeId::New { .. }, Role::New) => {
                    if r.written != self.alpha || r.read != 0 {
                        return Err(Error::Internal(format!("{} is not written in full", r.id)));
                    }
                }
                (NodeId::Initial { stripe, .. }, role) if role != Role::New => {
                    if r.written != 0 {
                        return Err(Error::Internal(format!("initial node {} is written", r.id)));
                    }
                    if role == Role::Unchanged {
                        if unchanged_per_stripe.len() <= stripe {
                            unchanged_per_stripe.resize(stripe + 1, 0);
                        }
                        unchanged_per_stripe[stripe] += 1;
                    }
                }
                _ => return Err(Error::Internal(format!("{} has role {}", r.id, r.role))),
            }
        }
        if let Some((s, &u)) = unchanged_per_stripe
            .iter()
            .enumerate()
            .find(|(_, &u)| u > k_initial)
        {
            return Err(Error::Internal(format!(
                "stripe {s} keeps {u} unchanged nodes, more than {k_initial}"
            )));
        }
        Ok(())
    }

    /// CSV rows `node_id,role,subsymbols_read,subsymbols_written`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "role", "subsymbols_read", "subsymbols_written"])?;
        for r in &self.records {
            w.write_record([
                r.id.to_string(),
                r.role.to_string(),
                r.read.to_string(),
                r.written.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Compares the trace against the bandwidth lower bound and the default
    /// conversion for the given parameters.
    pub fn summary(
        &self,
        k_initial: usize,
        r_initial: usize,
        r_final: usize,
        sigma: usize,
    ) -> TraceSummary {
        let bound = bounds::merge_bandwidth_lower_bound(k_initial, r_initial, r_final, sigma, self.alpha);
        let default = bounds::default_conversion_bandwidth(k_initial, r_final, sigma, self.alpha);
        let gamma = Rational::from_integer(self.gamma() as i64);
        TraceSummary {
            gamma: self.gamma(),
            beta1: self.max_read(Role::Retired),
            beta2: self.max_read(Role::Unchanged),
            alpha: self.alpha,
            bound: RationalValue(bound),
            optimal: gamma == bound,
            savings_vs_default: bounds::to_f64(Rational::from_integer(1) - gamma / default),
            default_gamma: default.to_integer() as usize,
        }
    }
}

/// A rational that serializes as an integer when it is one and as a float
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RationalValue(pub Rational);

impl Serialize for RationalValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match bounds::to_integer(self.0) {
            Some(i) => s.serialize_i64(i),
            None => s.serialize_f64(bounds::to_f64(self.0)),
        }
    }
}

/// The summary document emitted next to a trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub gamma: usize,
    /// Largest download from a retired node.
    pub beta1: usize,
    /// Largest download from an unchanged node.
    pub beta2: usize,
    pub alpha: usize,
    pub bound: RationalValue,
    pub optimal: bool,
    pub savings_vs_default: f64,
    pub default_gamma: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_trace() -> ConversionTrace {
        let mut records = Vec::new();
        for stripe in 0..2 {
            for node in 0..4 {
                records.push(NodeRecord {
                    id: NodeId::Initial { stripe, node },
                    role: Role::Unchanged,
                    read: 1,
                    written: 0,
                });
            }
            records.push(NodeRecord {
                id: NodeId::Initial { stripe, node: 4 },
                role: Role::Retired,
                read: 2,
                written: 0,
            });
        }
        for index in 0..2 {
            records.push(NodeRecord {
                id: NodeId::New { index },
                role: Role::New,
                read: 0,
                written: 2,
            });
        }
        ConversionTrace { alpha: 2, records }
    }

    #[test]
    fn totals_and_summary() {
        let t = example_trace();
        assert_eq!((t.total_read(), t.total_written(), t.gamma()), (12, 4, 16));
        t.validate(4).unwrap();
        let s = t.summary(4, 1, 2, 2);
        assert!(s.optimal);
        assert_eq!((s.beta1, s.beta2, s.default_gamma), (2, 1, 20));
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(
            json,
            r#"{"gamma":16,"beta1":2,"beta2":1,"alpha":2,"bound":16,"optimal":true,"savings_vs_default":0.2,"default_gamma":20}"#
        );
    }

    #[test]
    fn csv_format() {
        let mut buf = Vec::new();
        example_trace().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("node_id,role,subsymbols_read,subsymbols_written"));
        assert_eq!(lines.next(), Some("s0n0,unchanged,1,0"));
        assert_eq!(text.lines().last(), Some("new1,new,0,2"));
    }

    #[test]
    fn validation_catches_violations() {
        let mut t = example_trace();
        t.records[0].read = 3;
        assert!(t.validate(4).is_err());
        let t = example_trace();
        assert!(t.validate(3).is_err());
    }
}
