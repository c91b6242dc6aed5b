pub mod amalgam;
pub mod cli;
pub mod dommonoid;
pub mod expansion;
pub mod io;
pub mod qftype;
pub mod symtype;
pub mod tree;
