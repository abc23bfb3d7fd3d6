//! Exact p-adic derived de Rham and crystalline computations.

pub mod algebra;
pub mod derham;
pub mod derived;
pub mod error;
pub mod linalg;
pub mod pd;
pub mod period;
pub mod poly;
pub mod ring;
pub mod valuation;
pub mod witt;
pub mod zmod;

pub use error::{Error, Result};
pub use valuation::Valuation;
pub use zmod::Zmod;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/coefficients.md")]
mod book_coefficients {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/divided-powers.md")]
mod book_divided_powers {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/de-rham.md")]
mod book_de_rham {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/derived-de-rham.md")]
mod book_derived_de_rham {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/witt.md")]
mod book_witt {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/period-rings.md")]
mod book_period_rings {}
