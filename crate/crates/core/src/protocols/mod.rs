//! The concrete protocol constructions the lab studies. Two base games turn
//! counting instances into reward protocols (a one-bit majority vote and a
//! quadratic-score count claim); the rest are transforms: collapsing rewards
//! to a single bit, eliciting continuation expectations, splitting a protocol
//! at a round, composing subprotocols under an adaptive oracle machine,
//! stacking an extra majority round on top of a protocol family, comparing
//! two acceptance expectations, and selecting an optimal message by a
//! knockout tournament.

mod brier;
mod compare;
mod compose;
mod elicit;
mod knockout;
mod one_bit;
mod oracle_round;
mod pp_vote;

pub use brier::make_brier_count;
pub use compare::compare_expectations_prob;
pub use compose::{
    compose_with_machine, composition_reward, MachineRun, MachineStep, OracleMachine,
};
pub use elicit::{elicit_expectation, split_at_round, SplitReport};
pub use knockout::knockout_argmax;
pub use one_bit::one_bit_transform;
pub use oracle_round::pp_oracle_round;
pub use pp_vote::make_pp_vote;
