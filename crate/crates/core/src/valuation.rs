use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use serde::{Serialize, Serializer};

/// A normalized valuation (`val(p) = 1`) with rational values, or a lower bound
/// when the element vanishes at the working precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Valuation {
    Exact(Ratio<i64>),
    /// The element is zero modulo the precision cap; its true valuation is at least this.
    AtLeast(Ratio<i64>),
}

impl Valuation {
    pub fn integer(v: i64) -> Self {
        Valuation::Exact(Ratio::from_integer(v))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Valuation::Exact(Ratio::new(num, den))
    }

    pub fn capped(v: i64) -> Self {
        Valuation::AtLeast(Ratio::from_integer(v))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Valuation::Exact(_))
    }

    pub fn value(&self) -> Ratio<i64> {
        match self {
            Valuation::Exact(r) | Valuation::AtLeast(r) => *r,
        }
    }

    pub fn exact(&self) -> Option<Ratio<i64>> {
        match self {
            Valuation::Exact(r) => Some(*r),
            Valuation::AtLeast(_) => None,
        }
    }

    pub fn scale(&self, k: i64) -> Self {
        match self {
            Valuation::Exact(r) => Valuation::Exact(r * k),
            Valuation::AtLeast(r) => Valuation::AtLeast(r * k),
        }
    }

    pub fn as_fraction(&self) -> String {
        let fr = |r: &Ratio<i64>| format!("{}/{}", r.numer(), r.denom());
        match self {
            Valuation::Exact(r) => fr(r),
            Valuation::AtLeast(r) => format!(">={}", fr(r)),
        }
    }
}

impl PartialOrd for Valuation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Valuation::Exact(a), Valuation::Exact(b)) => a.partial_cmp(b),
            _ => None,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_fraction())
    }
}

impl Serialize for Valuation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.as_fraction())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_never_floats() {
        assert_eq!(Valuation::ratio(2, 4).to_string(), "1/2");
        assert_eq!(Valuation::integer(1).to_string(), "1/1");
        assert_eq!(Valuation::capped(3).to_string(), ">=3/1");
        assert_eq!(serde_json::to_string(&Valuation::ratio(3, 4)).unwrap(), "\"3/4\"");
    }
}
