//! Shared inputs for the engine benchmarks under `benches/`.

use std::sync::Arc;

use groundflow_core::dataset::{golden_workflow, QaItem, Tier};
use groundflow_core::{fixtures, NcenApi, WorkflowProgram};

pub fn api() -> NcenApi {
    NcenApi::new(Arc::new(fixtures::bundled_corpus()))
}

/// The first bundled item of `tier` with its golden workflow source.
pub fn golden(tier: Tier) -> (QaItem, String) {
    let item = fixtures::bundled_dataset().into_iter().find(|i| i.tier == tier).expect("bundled tier");
    let code = golden_workflow(&item).expect("golden workflow");
    (item, code)
}

pub fn parsed(code: &str) -> WorkflowProgram {
    WorkflowProgram::parse(code).expect("golden code parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use groundflow_core::workflow::{execute, NcenBindings};
    use groundflow_core::ExecLimits;

    #[test]
    fn every_tier_has_a_runnable_golden_program() {
        let api = api();
        for tier in Tier::ALL {
            let (_, code) = golden(tier);
            execute(&parsed(&code), &NcenBindings::new(&api), ExecLimits::default()).unwrap();
        }
    }
}
