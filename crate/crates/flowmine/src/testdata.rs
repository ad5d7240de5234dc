//! Shared fixtures for the worked CPU-read example used across tests.
#![doc(hidden)]

pub const FIG2_DEFS: &str = "\
1 (cpu0:cache:rd:req)
2 (cache:cpu0:rd:resp)
3 (cpu1:cache:rd:req)
4 (cache:cpu1:rd:resp)
5 (cache:mem:rd:req)
6 (mem:cache:rd:resp)
initial = {1,3}
terminal = {2,4}
";

/// Interleaving of three cpu0 reads and two cpu1 reads.
pub const EXAMPLE_TRACE: &str = "3 4 1 1 5 6 2 5 6 2 1 2 3 4\n";
