pub mod commands;
pub mod dsl;
pub mod run;
