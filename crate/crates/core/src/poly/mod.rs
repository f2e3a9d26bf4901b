pub mod cdata;
pub mod galois;
pub mod ops;

pub use cdata::{cdata_new, cdata_resize, CData, Domain};
pub use ops::*;
