use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no {0}-dimensional cone in the complex")]
    MissingNDimCone(usize),
    #[error("stratum {stratum:?} containing cone {rho:?} meets a divisor with positive discrepancy")]
    BadDivisorMeetsGoodCurve { rho: Vec<usize>, stratum: Vec<usize> },
    #[error("good boundary of stratum {0:?} is disconnected")]
    DisconnectedGoodBoundary(Vec<usize>),
    #[error("chart transition across {0:?} is not unimodular")]
    NonUnimodularChart(Vec<usize>),
    #[error("pseudomanifold condition fails at cone {0:?}")]
    NotPseudomanifold(Vec<usize>),
    #[error("intersection numbers missing for interior cone {0:?}")]
    MissingIntersections(Vec<usize>),
    #[error("kink missing for interior cone {0:?}")]
    MissingKink(Vec<usize>),
    #[error("maximal cones {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("complex carries no relative data")]
    NotRelative,
    #[error("g_trop is not affine across {0:?}")]
    NotSubmersion(Vec<usize>),
    #[error("boundary chain must have length at least 1")]
    ChainTooShort,
    #[error("point lies in the singular locus")]
    LocationInDelta,

    #[error("ring elements live in different cones ({0} vs {1})")]
    ConeMismatch(usize, usize),
    #[error("exponential of an element with a unit term")]
    NonNilpotentArgument,
    #[error("element is not congruent to 1 modulo the maximal ideal")]
    NotUnipotent,
    #[error("exponent {0:?} points out of the source cone")]
    InadmissibleExponent(Vec<i64>),

    #[error("wall direction inadmissible: {0}")]
    InadmissibleWallDirection(String),
    #[error("curve class {0:?} lies in the truncation ideal")]
    ClassInIdeal(Vec<i64>),
    #[error("point is in the singular set of the wall structure")]
    SingularPoint,
    #[error("slab lies on the boundary")]
    BoundarySlab,
    #[error("fiber divisor {0} has multiplicity other than one")]
    NonReducedFiber(String),

    #[error("crossing has nonpositive pairing")]
    WrongSideCrossing,
    #[error("endpoint is not generic: {witness}; try {suggestion}")]
    NonGenericEndpoint { witness: String, suggestion: String },
    #[error("broken line search exceeded {0} steps")]
    TraceLimit(usize),

    #[error("joint lies on the boundary")]
    BoundaryJoint,
    #[error("joint is the apex")]
    ApexJoint,
    #[error("scattering did not converge below weight {0}")]
    NonConvergent(i64),

    #[error("vertex {0} maps into the singular locus")]
    VertexInDelta(usize),
    #[error("type is not realizable")]
    Unrealizable,
    #[error("inadmissible type: {0}")]
    InadmissibleType(String),
    #[error("endpoint is outside the family")]
    EndpointOutsideFamily,
    #[error("gluing map is not surjective over the rationals")]
    RankDeficient,
    #[error("output legs do not glue")]
    IncompatibleOutputs,
    #[error("slice is not two-dimensional")]
    NonPlanarSlice,
}
