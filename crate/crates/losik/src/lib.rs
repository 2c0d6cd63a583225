pub mod checks;
pub mod error;
pub mod expr;
pub mod forms;
pub mod jets;
pub mod prolong;
pub mod taylor;
pub mod triviality;
