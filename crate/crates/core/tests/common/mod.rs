pub mod corpus;
pub mod curation;
pub mod gen;
pub mod oracle;
