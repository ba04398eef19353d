pub mod alignment;
pub mod codec;
pub mod line;
pub mod normalize;
pub mod analytics;
pub mod report;
pub mod voting;
pub mod manifest;
pub mod corpus;
pub mod pipeline;
pub mod reference;
pub mod cli;
