//! Wire schema. Every frame is one JSON object with a `type` tag.

use serde::{Deserialize, Serialize};

use preflex_core::objectives::{ObjectiveId, K};
use preflex_core::priority::PriorityAssignment;
use preflex_core::scene::{LayoutMap, SceneDocument};
use preflex_core::session::{AdaptDiagnostics, Mode, Session, SessionReport};

pub const PROTOCOL_VERSION: u32 = 1;

/// Optional per-session overrides of the server's solver settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionOptions {
    pub population_size: Option<usize>,
    pub generations: Option<usize>,
    pub tau_lower: Option<f64>,
    pub tau_upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        #[serde(default)]
        client: Option<String>,
    },
    SceneData {
        scene: String,
    },
    StartSession {
        scene: String,
        mode: Mode,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        options: Option<SessionOptions>,
    },
    SubmitMoves {
        session_id: String,
        moves: LayoutMap,
    },
    Adapt {
        session_id: String,
        /// Objective pairs to project the front onto.
        #[serde(default)]
        pairs: Vec<[ObjectiveId; 2]>,
    },
    Finish {
        session_id: String,
    },
}

/// Which solver run a `progress` frame belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// The initial front computed by `start_session`.
    Start,
    Adapt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    UnknownSession,
    /// The frame did not parse against the schema.
    Schema,
    /// Well-formed request that breaks the session rules.
    Protocol,
    /// An adaptation is already running for the session.
    Busy,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Index into the archive of this adaptation.
    pub index: usize,
    pub objectives: [f64; K],
    /// Objectives on the moved widgets only.
    pub restricted: [f64; K],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub moved_ids: Vec<String>,
    pub values: [f64; K],
}

/// Restricted front projected onto two objectives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub pair: [ObjectiveId; 2],
    pub points: Vec<[f64; 2]>,
    pub chosen: [f64; 2],
    pub reference: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adapted {
    pub session_id: String,
    pub adaptation: usize,
    pub iteration: usize,
    pub layout: LayoutMap,
    #[serde(default)]
    pub assignment: Option<PriorityAssignment>,
    #[serde(default)]
    pub aggregated_delta: Option<[f64; K]>,
    pub distance: f64,
    pub candidate: Candidate,
    pub archive_size: usize,
    pub hypervolume: f64,
    pub reference: Reference,
    pub projections: Vec<Projection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        version: u32,
        server: String,
    },
    SceneData {
        name: String,
        scene: SceneDocument,
    },
    State {
        session_id: String,
        mode: Mode,
        iteration: usize,
        pending_moves: usize,
        layout: LayoutMap,
        /// Present only in the reply to `start_session`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scene: Option<SceneDocument>,
    },
    Progress {
        session_id: String,
        phase: Phase,
        generation: usize,
        total_generations: usize,
        best_ranks: Vec<usize>,
        best_count: usize,
    },
    Adapted(Adapted),
    Finish {
        session_id: String,
        report: SessionReport,
    },
    Error {
        kind: ErrorKind,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session_id: Option<String>,
    },
}

impl ServerMessage {
    pub fn error(kind: ErrorKind, message: impl Into<String>, session_id: Option<&str>) -> Self {
        ServerMessage::Error {
            kind,
            message: message.into(),
            session_id: session_id.map(str::to_string),
        }
    }

    pub fn state(session_id: &str, session: &Session, scene: Option<SceneDocument>) -> Self {
        ServerMessage::State {
            session_id: session_id.to_string(),
            mode: session.mode(),
            iteration: session.iteration(),
            pending_moves: session.pending_adjustments(),
            layout: session.scene().layout_to_map(session.current()),
            scene,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

impl Adapted {
    pub fn new(
        session_id: &str,
        session: &Session,
        diagnostics: &AdaptDiagnostics,
        pairs: &[[ObjectiveId; 2]],
    ) -> Self {
        let scene = session.scene();
        let chosen = &diagnostics.restricted_front[diagnostics.chosen_index];
        let reference = &diagnostics.reference.values;
        let projections = pairs
            .iter()
            .map(|&[a, b]| Projection {
                pair: [a, b],
                points: diagnostics
                    .restricted_front
                    .iter()
                    .map(|v| [v.get(a), v.get(b)])
                    .collect(),
                chosen: [chosen.get(a), chosen.get(b)],
                reference: [reference.get(a), reference.get(b)],
            })
            .collect();
        Adapted {
            session_id: session_id.to_string(),
            adaptation: diagnostics.adaptation,
            iteration: diagnostics.iteration,
            layout: scene.layout_to_map(session.current()),
            assignment: diagnostics.assignment.clone(),
            aggregated_delta: diagnostics.aggregated_delta,
            distance: diagnostics.chosen_distance,
            candidate: Candidate {
                index: diagnostics.chosen_index,
                objectives: diagnostics.archive_objectives[diagnostics.chosen_index].0,
                restricted: chosen.0,
            },
            archive_size: diagnostics.archive_size,
            hypervolume: diagnostics.hypervolume,
            reference: Reference {
                moved_ids: diagnostics
                    .reference
                    .moved
                    .iter()
                    .map(|&i| scene.widgets()[i].id.clone())
                    .collect(),
                values: reference.0,
            },
            projections,
        }
    }
}
