//! Persona-driven product ideation engine.

pub mod corpus;
pub mod engine;
pub mod gateway;
pub mod pipeline;
pub mod scaffold;
pub mod session;
pub mod settings;
