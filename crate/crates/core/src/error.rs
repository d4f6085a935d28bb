use crate::ids::{KindName, ObjectId, QuantityId, TimePoint};

/// Errors raised by the model kernel, the event engine and the query layer.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KbError {
    #[error("kind `{0}` is already declared")]
    DuplicateKind(KindName),
    #[error(
        "kind `{kind}` requires granule kind `{required}`, which is not a declared object kind"
    )]
    UnknownGranuleKind { kind: KindName, required: KindName },
    #[error("identifier `{0}` is already in use")]
    DuplicateId(String),
    #[error("unknown kind `{0}`")]
    UnknownKind(KindName),
    #[error("kind `{kind}` is not {expected}")]
    KindMismatch {
        kind: KindName,
        expected: &'static str,
    },
    #[error("unknown object `{0}`")]
    UnknownObject(ObjectId),
    #[error("unknown quantity `{0}`")]
    UnknownQuantity(QuantityId),
    #[error("`{0}` does not exist at {1}")]
    NotLiveAt(String, TimePoint),
    #[error("object `{0}` cannot be adjacent to itself")]
    SelfAdjacency(ObjectId),
    #[error("adjacency {a}-{b} from {from} overlaps an existing interval")]
    OverlappingInterval {
        a: ObjectId,
        b: ObjectId,
        from: TimePoint,
    },
    #[error("no open adjacency interval {a}-{b} to close at {at}")]
    NoOpenInterval {
        a: ObjectId,
        b: ObjectId,
        at: TimePoint,
    },
    #[error("event at {at} does not follow the last event at {last}")]
    NonMonotonicTime { at: TimePoint, last: TimePoint },
    #[error("granule `{granule}` is held by live quantity `{holder}`")]
    GranuleNotFree {
        granule: ObjectId,
        holder: QuantityId,
    },
    #[error("quantity `{quantity}` has {count} granule(s); at least 2 are required")]
    TooFewGranules { quantity: QuantityId, count: usize },
    #[error("donor `{0}` is not live before the event")]
    DonorNotLive(QuantityId),
    #[error("granule `{granule}` of `{quantity}` is neither a donor granule nor free")]
    GranuleProvenanceViolation {
        granule: ObjectId,
        quantity: QuantityId,
    },
    #[error("granule `{0}` is assigned more than once in the same event")]
    DuplicateGranuleAssignment(ObjectId),
    #[error("discarded object `{0}` is not a granule of any donor")]
    DiscardNotDonated(ObjectId),
    #[error("a transfer needs at least one donor")]
    NoDonors,
    #[error("a transfer must create at least one quantity")]
    NothingCreated,
    #[error("quantity `{0}` inherits no granule from any donor")]
    NoInheritedGranules(QuantityId),
    #[error("`{0}` cannot be a sub-quantity of itself")]
    SelfSubQuantity(QuantityId),
    #[error("sub-quantity `{part}` of `{whole}` is already asserted")]
    DuplicateSubQuantity { part: QuantityId, whole: QuantityId },
    #[error("lifetimes of `{part}` and `{whole}` do not overlap")]
    DisjointLifetimes { part: QuantityId, whole: QuantityId },
    #[error("object `{0}` is not a granule of any quantity at {1}")]
    NotAGranuleAt(ObjectId, TimePoint),
}

pub type Result<T, E = KbError> = std::result::Result<T, E>;
