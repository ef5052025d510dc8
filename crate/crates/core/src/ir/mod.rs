//! Symbolic PDEs: AST, surface syntax, invariants, the polynomial family and
//! domain rescaling.

mod ast;
mod family;
mod parser;
mod rescale;
mod validate;

pub use ast::{Expr, PdeAst};
pub use family::{CoefSlot, PdeCoefficients, VISCOSITY_NAME};
pub use parser::{coef_table, parse_pde, CoefTable, ParseError};
pub use rescale::{rescale_to_canonical, AffineMap, Family, RescaleError, RescaleSpec, Rescaled};
pub use validate::{validate_ast, validate_with, ValidationReport, Violation};
