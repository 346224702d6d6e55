//! Shared context for the fuzz targets: a small ring so seeds stay compact.

use std::sync::{Arc, OnceLock};

use hevf_core::ckks::{CkksContext, ParameterSet};

pub fn params() -> ParameterSet {
    ParameterSet::custom(2048, vec![20, 17, 17], 17, 128)
}

pub fn ctx() -> &'static Arc<CkksContext> {
    static CTX: OnceLock<Arc<CkksContext>> = OnceLock::new();
    CTX.get_or_init(|| CkksContext::new(params()).expect("fuzz parameters are valid"))
}
