pub mod lattice;
pub mod price;
pub mod rank;
