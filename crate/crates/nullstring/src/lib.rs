pub mod catalog;
pub mod exprlang;
pub mod frame;
pub mod jets;
pub mod pdes;
pub mod report;
pub mod strings;
pub mod verify;
pub mod weyl;
