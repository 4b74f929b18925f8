//! Built-in procedures, type tags, and the JSON data type.

pub mod builtins;
pub mod json;
