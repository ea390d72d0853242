pub mod action;
pub mod basis;
pub mod cases;
pub mod dcopf;
pub mod error;
pub mod linalg;
pub mod matpower;
pub mod network;
pub mod simplex;
pub mod sparse;
pub mod bus_split;
pub mod sensitivity;
pub mod pivot;
pub mod bench;
