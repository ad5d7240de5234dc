//! Mining message-flow specifications from system-on-chip communication
//! traces.
//!
//! The pipeline takes a message dictionary (quadruples with initial and
//! terminal markings) and a set of traces, builds a structural causality
//! graph, scores its edges against the traces, prunes weak edges, assembles
//! candidate flows, and refines the model until it accepts a target fraction
//! of the trace messages. A seeded synthetic generator closes the loop for
//! testing.
//!
//! ```
//! use flowmine::mining::{mine, MineConfig};
//! use flowmine::model::{parse_message_definitions, parse_traces};
//!
//! let defs = "\
//! 1 (cpu:cache:rd:req)
//! 2 (cache:cpu:rd:resp)
//! initial = {1}
//! terminal = {2}
//! ";
//! let dict = parse_message_definitions(defs)?;
//! let traces = parse_traces("1 2 1 2\n", &dict)?;
//! let outcome = mine(&traces, &dict, &MineConfig::default())?;
//! assert_eq!(outcome.eval.acceptance_ratio, 1.0);
//! # Ok::<(), flowmine::error::Error>(())
//! ```

pub mod acceptor;
pub mod causality;
pub mod error;
pub mod essential;
pub mod export;
pub mod mining;
pub mod model;
pub mod report;
pub mod synth;

#[doc(hidden)]
pub mod testdata;

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(messages_and_traces, "../../../book/src/messages-and-traces.md");
    chapter!(causality_graphs, "../../../book/src/causality-graphs.md");
    chapter!(essential_flows, "../../../book/src/essential-flows.md");
    chapter!(mining_and_refinement, "../../../book/src/mining-and-refinement.md");
    chapter!(synthetic_corpora, "../../../book/src/synthetic-corpora.md");
    chapter!(cli, "../../../book/src/cli.md");
}
