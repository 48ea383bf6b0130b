//! Adversarial sequence of slowly changing graphs on which no first-order
//! decentralized method can accelerate: two stars joined through a connector
//! vertex, worst-case chain functions on marked leaves, an information-flow
//! tracker and the resulting distance floor.

mod floor;
mod functions;
mod span;
mod two_star;

pub use floor::{
    chi0_below, floor_check_decopt, floor_check_dgd, kappa_local, kappa_relations,
    theoretical_floor, FloorRow, FloorRun, KappaRelations, FLOOR_MIN_CHI,
};
pub use functions::{closed_form_solution, FunctionRole, WorstCaseFunction, WorstCaseInstance};
pub use span::{first_nonzero_time, span_step, FirstNonzero, SpanState, StepKind};
pub use two_star::{
    build_two_star, phase_start, retuned_period, two_star_graph, CounterexampleSequence, Mark,
    RetunedPeriod, Role, StepRecord, TwoStarGraph,
};
