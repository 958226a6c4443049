pub mod builder;
pub mod event;
pub mod model;
pub mod query;
pub mod xml;
