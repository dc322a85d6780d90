pub mod approx;
pub mod construction;
pub mod discrepancy;
pub mod distribution;
pub mod expander;
pub mod halfspace;
pub mod lp;
pub mod numeric;
pub mod poly;
