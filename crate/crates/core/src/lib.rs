pub mod applications;
pub mod corpus;
pub mod earliest;
pub mod equiv;
pub mod herbrand;
pub mod model;
pub mod oracle;
pub mod syntax;
pub mod terms;
