//! A temporal knowledge base for portions of matter.
//!
//! Quantities are sets of granules (objects) fixed at creation. They come
//! into being only through events: a creation takes free objects, a granule
//! transfer terminates its donors and redistributes their granules among the
//! quantities it creates. The log is append-only, so any past world can be
//! reconstructed with [`Kb::world_at`].
//!
//! - [`Kb`] holds declarations, adjacency and the event log.
//! - [`Validator`] checks a KB against the axioms and reports [`Violation`]s.
//! - [`Provenance`] answers inheritance, history and cohort queries.
//! - [`canonical`] reads and writes the `.mpkb` interchange format.
//! - [`dsl`] parses `.mp` scenario files.

pub mod canonical;
pub mod dsl;
pub mod error;
pub mod event;
mod graph;
pub mod ids;
pub mod model;
pub mod provenance;
pub mod testkit;
pub mod validate;

pub use error::{KbError, Result};
pub use event::{EventInput, EventKind, EventRec, NewQuantity, RoleBinding, TransferSpec};
pub use ids::{EventId, KindName, ObjectId, ParseTimeError, QuantityId, TimePoint};
pub use model::{
    AdjacencyAssertion, GranuleOf, Kb, KindDecl, KindMeta, Mode, ObjectInst, QuantityInst,
    QuantityState, Status, SubQuantityAssertion, WorldView, MIN_GRANULES,
};
pub use provenance::{
    ConstitutionView, Episode, GranuleHistory, Origin, Phase, Provenance, ProvenanceEdge,
};
pub use validate::{Report, Rule, Validator, Violation, WorldSummary};
