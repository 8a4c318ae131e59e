pub mod lang;
pub mod lex;
pub mod bdt;
pub mod vm;
pub mod requirements;
pub mod matcher;
pub mod par;
pub mod suite;
pub mod crossref;
pub mod cli;
