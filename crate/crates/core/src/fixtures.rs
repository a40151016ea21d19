//! Small hand-built instances used as regression anchors.

use crate::instance::{Instance, RawInstance};

/// Three agents, two hospitals, no stable matching. `a3` has size 2 and `h2`
/// capacity 2; every other size and capacity is 1.
pub fn no_stable_matching() -> Instance {
    RawInstance::new()
        .agent("a1", 1, &["h2", "h1"])
        .agent("a2", 1, &["h1", "h2"])
        .agent("a3", 2, &["h2"])
        .hospital("h1", 1, &["a1", "a2"])
        .hospital("h2", 2, &["a2", "a3", "a1"])
        .build()
        .expect("fixture is valid")
}

/// Hospital lists that follow a generalized master list with classes
/// `{a1,a2}`, `{a3}`, `{a4,a5}`. Sizes are 1,1,2,3,3; the agents' own orders
/// and the capacities are free choices (3, 2, 3).
pub fn gen_master_list_demo() -> Instance {
    RawInstance::new()
        .agent("a1", 1, &["h2", "h1"])
        .agent("a2", 1, &["h1", "h2"])
        .agent("a3", 2, &["h2"])
        .agent("a4", 3, &["h3", "h1"])
        .agent("a5", 3, &["h3"])
        .hospital("h1", 3, &["a2", "a1", "a4"])
        .hospital("h2", 2, &["a1", "a2", "a3"])
        .hospital("h3", 3, &["a5", "a4"])
        .build()
        .expect("fixture is valid")
}

/// Instance where the size-descending run matches total size 3 while the
/// largest occupancy-stable matching has size 7.
pub fn ratio_gap() -> Instance {
    RawInstance::new()
        .agent("a1", 3, &["h1", "h2"])
        .agent("a2", 2, &["h1"])
        .agent("a3", 2, &["h1"])
        .hospital("h1", 4, &["a2", "a3", "a1"])
        .hospital("h2", 3, &["a1"])
        .build()
        .expect("fixture is valid")
}
