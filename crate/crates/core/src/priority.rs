//! Ordered partition of the objectives into priority levels.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{ObjectiveId, K};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PriorityLevel {
    #[serde(rename = "H")]
    High,
    #[serde(rename = "M")]
    Mid,
    #[serde(rename = "L")]
    Low,
}

impl fmt::Display for PriorityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorityLevel::High => "H",
            PriorityLevel::Mid => "M",
            PriorityLevel::Low => "L",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityGroup {
    pub level: PriorityLevel,
    pub objectives: Vec<ObjectiveId>,
}

/// How an assignment was obtained from aggregated deltas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentProvenance {
    pub tau_lower: f64,
    pub tau_upper: f64,
    pub aggregated_delta: [f64; K],
}

/// Non-empty objective groups, highest priority first, partitioning all
/// objectives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorityAssignment {
    groups: Vec<PriorityGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<AssignmentProvenance>,
}

impl PriorityAssignment {
    /// Validates and normalizes: empty groups are dropped, objectives within
    /// a group are sorted, levels must be strictly increasing.
    pub fn new(
        groups: Vec<PriorityGroup>,
        provenance: Option<AssignmentProvenance>,
    ) -> Result<Self> {
        let mut seen = [false; K];
        let mut out: Vec<PriorityGroup> = Vec::with_capacity(groups.len());
        for mut g in groups {
            if g.objectives.is_empty() {
                continue;
            }
            if let Some(prev) = out.last() {
                if prev.level >= g.level {
                    return Err(Error::domain("priority levels must be strictly ordered H, M, L"));
                }
            }
            for o in &g.objectives {
                if std::mem::replace(&mut seen[o.index()], true) {
                    return Err(Error::domain(format!("objective {o} appears in two groups")));
                }
            }
            g.objectives.sort();
            out.push(g);
        }
        if let Some(missing) = ObjectiveId::ALL.iter().find(|o| !seen[o.index()]) {
            return Err(Error::domain(format!("objective {missing} is not assigned a level")));
        }
        Ok(PriorityAssignment { groups: out, provenance })
    }

    /// Every objective on one level; ranking reduces to plain NSGA-II.
    pub fn single_level() -> Self {
        PriorityAssignment {
            groups: vec![PriorityGroup {
                level: PriorityLevel::Mid,
                objectives: ObjectiveId::ALL.to_vec(),
            }],
            provenance: None,
        }
    }

    /// `high` on the top level, everything else on the middle level.
    pub fn prioritizing(high: &[ObjectiveId]) -> Result<Self> {
        let rest = ObjectiveId::ALL
            .into_iter()
            .filter(|o| !high.contains(o))
            .collect();
        Self::new(
            vec![
                PriorityGroup { level: PriorityLevel::High, objectives: high.to_vec() },
                PriorityGroup { level: PriorityLevel::Mid, objectives: rest },
            ],
            None,
        )
    }

    pub fn groups(&self) -> &[PriorityGroup] {
        &self.groups
    }

    pub fn provenance(&self) -> Option<&AssignmentProvenance> {
        self.provenance.as_ref()
    }

    pub fn level_count(&self) -> usize {
        self.groups.len()
    }

    pub fn level_of(&self, id: ObjectiveId) -> PriorityLevel {
        self.groups
            .iter()
            .find(|g| g.objectives.contains(&id))
            .map(|g| g.level)
            .expect("assignment covers every objective")
    }

    pub fn group(&self, level: PriorityLevel) -> &[ObjectiveId] {
        self.groups
            .iter()
            .find(|g| g.level == level)
            .map(|g| g.objectives.as_slice())
            .unwrap_or(&[])
    }

    /// Objective indices per level, highest first.
    pub fn level_indices(&self) -> Vec<Vec<usize>> {
        self.groups
            .iter()
            .map(|g| g.objectives.iter().map(|o| o.index()).collect())
            .collect()
    }
}
