//! Synthetic GUI worlds: definitions, seeded generation, an exhaustive
//! reachability model and the runtime environment.

mod env;
mod generate;
mod model;
mod world;

pub use env::{CheckpointToken, EnvError, Environment, Observation, SimEnv, StepOutcome};
pub use generate::{check_decoy_depth, check_params, generate_world, GenParamError, MAX_PAGES};
pub use model::{StateInfo, WorldModel, MAX_MODEL_STATES};
pub use world::{
    DecoyEdge, EnvState, GenParams, GoalSpec, Page, PageId, PlanRevisionHint, ScenarioClass, Transition, WorldError,
    WorldSpec,
};

#[cfg(test)]
mod tests;
