//! Non-adaptive query strategies for stochastic minimum vertex cover and
//! stochastic matching, with exact oracles, lower-bound instance families
//! and a Monte-Carlo evaluator.

pub mod error;
pub mod evaluator;
pub mod filling;
pub mod format;
pub mod graph;
pub mod instances;
pub mod matching;
pub mod partition;
pub mod rng;
pub mod strategies;
pub mod vim;

pub use error::{Error, Result};
pub use evaluator::{evaluate_strategy, exact_expected_stats, EvalReport, ExpectedStats};
pub use filling::{filling, general_vc_cover, general_vc_plan, truncate_at, FillingResult, GeneralVcPlan};
pub use format::{parse_graph, read_graph_file, write_graph, GraphFile};
pub use graph::{
    bipartition, half_stochastic_union, sample_realization, Bipartition, EdgePartition, FractionalAssignment, Graph,
    QueryAnswers, Realization, Side, Subgraph,
};
pub use instances::{Family, InstanceDescriptor};
pub use matching::{Matching, VertexCover};
pub use partition::{build_partition, MatchingPolicy, PartitionConfig, PartitionOutcome};
pub use strategies::{plan, respond, QueryPlan, StrategyAnswer, StrategyId, StrategyParams};
