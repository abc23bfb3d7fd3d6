use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("precision p^n = {p}^{n} does not fit the supported modulus range")]
    ModulusTooLarge { p: u64, n: u32 },
    #[error("relation for generator `{0}` is not monic")]
    NonMonicRelation(String),
    #[error("relation for generator `{0}` refers to a later generator")]
    NonTriangularPresentation(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("valuation undefined: {0}")]
    ValuationUndefined(String),
    #[error("operands live in different rings")]
    MixedRings,
    #[error("fractional exponent on variable `{0}` whose image is not a monomial")]
    FractionalExponentOnNonMonoidVariable(String),
    #[error("coefficient ring is not F_p")]
    NotCharP,
    #[error("element has a non-zero constant term outside the divided-power ideal")]
    NonzeroConstantTerm,
    #[error("operands live in different divided-power algebras")]
    MixedParents,
    #[error("sequence is not regular: {0}")]
    NotRegularSequence(String),
    #[error("unsupported presentation: {0}")]
    UnsupportedPresentation(String),
    #[error("not reduced modulo p")]
    NotModP,
    #[error("weight cap {cap} is below the required {required}")]
    CapTooSmall { cap: u32, required: u32 },
    #[error("polynomial is not Eisenstein: {0}")]
    NotEisenstein(String),
    #[error("cohomology requires a field of coefficients (n = 1)")]
    NotField,
    #[error("form does not live on the Frobenius twist")]
    NotOnTwist,
    #[error("dimensions unstable under truncation: {0}")]
    TruncationUnstable(String),
    #[error("truncated total dimension {size} exceeds memory guard {limit}")]
    WindowTooWide { size: usize, limit: usize },
    #[error("class is not a cocycle")]
    NotACocycle,
    #[error("requested entry lies outside the certified stable range: {0}")]
    OutOfStableRange(String),
    #[error("Frobenius lift check failed: {0}")]
    LiftNotFrobenius(String),
    #[error("Witt vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("precision n = {n} exceeds tilt depth k + 1 = {limit}")]
    PrecisionExceedsDepth { n: u32, limit: u32 },
    #[error("element is not in ker(theta)")]
    NotInKernel,
    #[error("wrong valuation: expected {expected}, found {found}")]
    WrongValuation { expected: String, found: String },
    #[error("not a compatible system of p-power roots: {0}")]
    NotARootSystem(String),
    #[error("element does not lie in Fil^1")]
    Fil1Failure,
    #[error("Galois data does not define an automorphism: {0}")]
    NotAnAutomorphism(String),
    #[error("Galois element is not compatible with the Kummer data: {0}")]
    NotKummerCompatible(String),
    #[error("model unavailable: {0}")]
    ModelUnavailable(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
